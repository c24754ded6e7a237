// Command-line entry point: run a configuration, compare two runs, or
// measure convergence rates of a run against a reference.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "mlqd/diagnostics.hpp"
#include "mlqd/io.hpp"

namespace fs = std::filesystem;
using namespace mlqd;

namespace {

int run(const fs::path& cfg_path, std::optional<double> block_length, std::optional<double> epsilon,
        std::optional<std::string> output, std::optional<std::string> reference) {
  RunConfig config = load_config(cfg_path);
  if (block_length) config.block_length = *block_length;
  if (epsilon) config.criteria.epsilon = *epsilon;
  if (output) config.output_directory = *output;
  if (reference) config.reference = *reference;
  const ProblemSetup setup = make_setup(config);

  std::vector<StepFields> ref;
  RunOptions options;
  options.keep_iterates = config.save_iterates;
  options.track_multi_step = config.track_multi_step;
  if (!config.reference.empty()) {
    ref = read_reference(config.reference, setup.time.steps());
    options.reference = &ref;
  }

  std::cout << "mesh " << config.nx << "x" << config.ny << ", " << setup.disc.groups().count()
            << " groups, " << setup.disc.quadrature().size() << " directions, "
            << setup.time.steps() << " steps in " << setup.time.blocks() << " blocks\n";
  const auto t0 = std::chrono::steady_clock::now();
  const RunRecord record = run_problem(setup, config.criteria, options);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_outputs(config, setup, record);
  int total = 0;
  for (const auto& b : record.blocks) total += b.outer_iterations;
  std::cout << "outer iterations: " << total << " total, "
            << static_cast<double>(total) / record.blocks.size() << " per block\n";
  if (options.reference) {
    const auto rate = average_convergence_rate(error_vs_reference(record.iterations, ref));
    write_rates(fs::path(config.output_directory) / "rates.csv", setup.time.block_steps(1), rate);
    std::cout << "rho_E " << format_double(rate.energy) << ", rho_T "
              << format_double(rate.temperature) << '\n';
  }
  std::cout << "wall time " << seconds << " s; output in " << config.output_directory << '\n';
  return 0;
}

int compare(const fs::path& a, const fs::path& b) {
  const auto fa = read_run_fields(a);
  const auto fb = read_run_fields(b);
  std::vector<StepFields> va, vb;
  std::cout << "step,rel_E,rel_T\n";
  for (const auto& [n, fields] : fa) {
    const auto it = fb.find(n);
    if (it == fb.end()) continue;
    va.push_back(fields);
    vb.push_back(it->second);
    std::cout << n << ',' << format_double(relative_error(fields.energy, it->second.energy)) << ','
              << format_double(relative_error(fields.temperature, it->second.temperature)) << '\n';
  }
  if (va.empty()) throw std::runtime_error("the runs share no saved steps");
  const auto cmp = compare_fields(va, vb);
  std::cout << "max rel_E " << format_double(cmp.max_energy) << ", max rel_T "
            << format_double(cmp.max_temperature) << '\n';
  return 0;
}

int rates(const fs::path& run_dir, const fs::path& ref_dir, double floor) {
  const auto iterates = read_iterates(run_dir / "iterates.csv");
  if (iterates.empty()) throw std::runtime_error("no iterates recorded in " + run_dir.string());
  int steps = 0;
  for (const auto& it : iterates) steps = std::max(steps, it.step);
  const auto ref = read_reference(ref_dir, steps);
  const auto errors = error_vs_reference(iterates, ref);
  const auto rate = average_convergence_rate(errors, floor);
  int block_steps = 0;
  for (const auto& it : iterates)
    if (it.block == 1 && it.outer == 0) ++block_steps;
  write_rates(run_dir / "rates.csv", block_steps, rate);
  std::cout << "block_steps,rho_E,rho_T\n"
            << block_steps << ',' << format_double(rate.energy) << ','
            << format_double(rate.temperature) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel quasidiffusion solver with outer iterations over time blocks"};
  app.require_subcommand(1);

  fs::path cfg;
  std::optional<double> block_length, epsilon;
  std::optional<std::string> output, reference;
  auto* run_cmd = app.add_subcommand("run", "Run a configuration file");
  run_cmd->add_option("config", cfg, "Configuration file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--block-length", block_length, "Override time.block_length (ns)");
  run_cmd->add_option("--epsilon", epsilon, "Override solver.epsilon");
  run_cmd->add_option("--output", output, "Override output.directory");
  run_cmd->add_option("--reference", reference, "Reference run directory");

  fs::path run_a, run_b;
  auto* cmp_cmd = app.add_subcommand("compare", "Relative L2 differences of two runs' fields");
  cmp_cmd->add_option("runA", run_a, "Run to compare")->required()->check(CLI::ExistingDirectory);
  cmp_cmd->add_option("runB", run_b, "Reference run")->required()->check(CLI::ExistingDirectory);

  fs::path rate_run, rate_ref;
  double floor = 1e-10;
  auto* rates_cmd = app.add_subcommand("rates", "Average convergence rate against a reference");
  rates_cmd->add_option("run", rate_run, "Run saved with output.iterates = true")
      ->required()
      ->check(CLI::ExistingDirectory);
  rates_cmd->add_option("ref", rate_ref, "Reference run with every step saved")
      ->required()
      ->check(CLI::ExistingDirectory);
  rates_cmd->add_option("--floor", floor, "Errors below this are excluded");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return run(cfg, block_length, epsilon, output, reference);
    if (*cmp_cmd) return compare(run_a, run_b);
    if (*rates_cmd) return rates(rate_run, rate_ref, floor);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
