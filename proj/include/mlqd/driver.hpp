#pragma once

#include <limits>
#include <vector>

#include "mlqd/loqd.hpp"
#include "mlqd/transport.hpp"

namespace mlqd {

struct ConvergenceCriteria {
  double epsilon = 1e-14;
  /// Inner s-cycle tolerance; 0 selects max(1e-2 * epsilon, 1e-15).
  double inner_epsilon = 0.0;
  int max_outer = 100;
  int max_inner = 200;
  DriftReference drift = DriftReference::flux_weighted;
};

double inner_tolerance(const ConvergenceCriteria& criteria);

struct ProblemSetup {
  Discretization disc;
  MaterialModel material;
  TimeBlockPartition time;
  double initial_temperature = 1e-3;
};

/// Cell fields at one time level.
struct StepFields {
  std::vector<double> temperature;
  std::vector<double> energy;        // grey E
  std::vector<double> group_energy;  // [g][cell]
};

/// One (block, outer iteration, step) entry of the convergence log.
/// Outer iteration 0 is the low-order pass with the isotropic closure.
struct IterationRecord {
  int block = 0;
  int outer = 0;
  int step = 0;
  double xi_e = std::numeric_limits<double>::quiet_NaN();
  double xi_t = std::numeric_limits<double>::quiet_NaN();
  /// Relative 2-norm errors against a reference, when one is given.
  double error_e = std::numeric_limits<double>::quiet_NaN();
  double error_t = std::numeric_limits<double>::quiet_NaN();
};

/// Low-order iterate of one step, kept for a posteriori error analysis.
struct IterateFields {
  int block = 0;
  int outer = 0;
  int step = 0;
  std::vector<double> energy;
  std::vector<double> temperature;
};

struct BlockLog {
  int block = 0;
  int steps = 0;
  int outer_iterations = 0;
  /// ||I^end - I^start - sum tau H|| / ||I^end|| of the final high-order pass,
  /// NaN unless tracked.
  double multi_step_residual = std::numeric_limits<double>::quiet_NaN();
};

struct RunRecord {
  /// fields[n] at t^n, n = 0..N.
  std::vector<StepFields> fields;
  std::vector<BlockLog> blocks;
  std::vector<IterationRecord> iterations;
  std::vector<IterateFields> iterates;
  /// Relative energy balance residual of the accepted low-order solution per
  /// step (index n, entry 0 unused).
  std::vector<double> conservation;
  int degenerate_closures = 0;
};

struct RunOptions {
  bool track_multi_step = false;
  bool keep_iterates = false;
  /// Reference fields indexed by step (same layout as RunRecord::fields).
  const std::vector<StepFields>* reference = nullptr;
};

/// State handed from one block to the next.
struct BlockState {
  AngularIntensity intensity;
  LowOrderState low_order;
};

BlockState initial_state(const ProblemSetup& setup);

/// Runs the outer iteration cycle of block b (1-based) from `start`, appends
/// its log and converged step fields to `record`, and returns the terminal
/// state. Throws OuterIterationError when max_outer is exceeded.
BlockState run_block(const ProblemSetup& setup, int b, const BlockState& start,
                     const ConvergenceCriteria& criteria, const RunOptions& options,
                     RunRecord& record);

RunRecord run_problem(const ProblemSetup& setup, const ConvergenceCriteria& criteria,
                      const RunOptions& options = {});

/// Outer iteration budget exhausted; carries the convergence log so far.
class OuterIterationError : public SolverError {
 public:
  OuterIterationError(const std::string& what, std::vector<IterationRecord> history)
      : SolverError(what), history_(std::move(history)) {}
  const std::vector<IterationRecord>& history() const { return history_; }

 private:
  std::vector<IterationRecord> history_;
};

StepFields step_fields(const LowOrderState& state);

}  // namespace mlqd
