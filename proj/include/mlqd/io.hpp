#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlqd/diagnostics.hpp"
#include "mlqd/driver.hpp"

namespace mlqd {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  int nx = 0;
  int ny = 0;
  double lx = 0.0;
  double ly = 0.0;

  int group_count = 0;
  double group_min = 1e-2;
  double group_max = 1e2;
  /// Explicit edges; overrides count/min/max when non-empty.
  std::vector<double> group_bounds;

  QuadratureSpec quadrature;

  double dt = 0.0;
  double t_end = 0.0;
  double block_length = 0.0;

  OpacityLaw opacity = FleckCummingsOpacity{};
  /// Law coefficient (27 for Fleck-Cummings, the value for constant); 0 keeps the default.
  double opacity_coefficient = 0.0;
  /// c_v = cv_factor * a_R.
  double cv_factor = 0.0;
  double initial_temperature = 1e-3;

  BoundaryConditions boundaries{};

  ConvergenceCriteria criteria;

  std::string output_directory = "output";
  int save_every = 1;
  bool save_iterates = false;
  bool binary_fields = false;
  bool track_multi_step = false;
  /// Directory of a previous run whose fields_<n>.csv serve as the reference.
  std::string reference;
};

/// Parses the INI-like run configuration:
///
///   # comment
///   [section]
///   key = value
///
/// Sections and keys are listed in README.md. Unknown sections or keys,
/// malformed values and missing required keys raise ConfigError with the
/// offending line; an empty text lists every missing key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

ProblemSetup make_setup(const RunConfig& config);

/// Number formatting with the shortest representation that round-trips.
std::string format_double(double value);

/// fields_<n>.csv: one row per cell with cell,T,E,E_0..E_{G-1}.
void write_fields(const std::filesystem::path& file, const StepFields& fields);
StepFields read_fields(const std::filesystem::path& file);
/// Raw little-endian doubles: cells, groups, then T, E, E_g.
void write_fields_binary(const std::filesystem::path& file, const StepFields& fields);
StepFields read_fields_binary(const std::filesystem::path& file);

/// All fields_<n>.csv in a run directory keyed by n.
std::map<int, StepFields> read_run_fields(const std::filesystem::path& directory);

/// Reference fields for every step 0..steps; throws if any is missing.
std::vector<StepFields> read_reference(const std::filesystem::path& directory, int steps);

void write_iterates(const std::filesystem::path& file, const std::vector<IterateFields>& iterates);
std::vector<IterateFields> read_iterates(const std::filesystem::path& file);

void write_rates(const std::filesystem::path& file, int block_steps, const ConvergenceRate& rate);

/// Writes fields, itercount.csv, conv.csv, conservation.csv and, when
/// requested, iterates.csv.
void write_outputs(const RunConfig& config, const ProblemSetup& setup, const RunRecord& record);

}  // namespace mlqd
