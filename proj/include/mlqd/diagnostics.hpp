#pragma once

#include <span>
#include <vector>

#include "mlqd/driver.hpp"

namespace mlqd {

/// ||a - ref||_2 / ||ref||_2. Throws std::invalid_argument on a size mismatch.
double relative_error(std::span<const double> a, std::span<const double> ref);

/// Errors of the low-order iterates of one block measured in the 2-norm over
/// space and time, relative to the same norm of the reference.
struct BlockErrors {
  int block = 0;
  std::vector<double> energy;       // [outer]
  std::vector<double> temperature;  // [outer]
};

/// Per-block error series of the iterates against reference fields indexed
/// by step. Iterates must be grouped by block and outer iteration.
std::vector<BlockErrors> error_vs_reference(const std::vector<IterateFields>& iterates,
                                            const std::vector<StepFields>& reference);

/// Same series rebuilt from a logged per-step error history, combining the
/// per-step relative errors with the reference norms.
std::vector<BlockErrors> error_vs_reference(const std::vector<IterationRecord>& log,
                                            const std::vector<StepFields>& reference);

struct ConvergenceRate {
  double energy = 0.0;
  double temperature = 0.0;
  int energy_pairs = 0;
  int temperature_pairs = 0;
};

/// Geometric mean of e_{j+1} / e_j over all blocks and iterations; a pair is
/// skipped when either error is below `floor`. Throws std::invalid_argument
/// when no pair is left for E or T.
ConvergenceRate average_convergence_rate(const std::vector<BlockErrors>& errors,
                                         double floor = 1e-10);

struct FieldComparison {
  int steps = 0;
  double max_energy = 0.0;       // max over steps of relative L2 in E
  double max_temperature = 0.0;  // same for T
  double final_energy = 0.0;
  double final_temperature = 0.0;
};

/// Compares two field histories step by step; `b` is the reference.
FieldComparison compare_fields(const std::vector<StepFields>& a, const std::vector<StepFields>& b);

}  // namespace mlqd
