#include "mlqd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

namespace mlqd {

namespace {

double sum_squares(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double diff_squares(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("field size mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

// Sums keyed by (block, outer); the step sets are implied by the log order.
struct Accumulator {
  double err_e = 0.0, err_t = 0.0, ref_e = 0.0, ref_t = 0.0;
};

std::vector<BlockErrors> collect(const std::map<std::pair<int, int>, Accumulator>& sums) {
  std::vector<BlockErrors> out;
  for (const auto& [key, acc] : sums) {
    if (out.empty() || out.back().block != key.first) out.push_back({key.first, {}, {}});
    if (static_cast<int>(out.back().energy.size()) != key.second)
      throw std::invalid_argument("error_vs_reference: outer iterations are not contiguous");
    out.back().energy.push_back(std::sqrt(acc.err_e / acc.ref_e));
    out.back().temperature.push_back(std::sqrt(acc.err_t / acc.ref_t));
  }
  return out;
}

const StepFields& reference_step(const std::vector<StepFields>& reference, int step) {
  if (step < 0 || step >= static_cast<int>(reference.size()))
    throw std::invalid_argument("error_vs_reference: step outside the reference time grid");
  return reference[step];
}

}  // namespace

double relative_error(std::span<const double> a, std::span<const double> ref) {
  return std::sqrt(diff_squares(a, ref) / sum_squares(ref));
}

std::vector<BlockErrors> error_vs_reference(const std::vector<IterateFields>& iterates,
                                            const std::vector<StepFields>& reference) {
  std::map<std::pair<int, int>, Accumulator> sums;
  for (const auto& it : iterates) {
    const StepFields& ref = reference_step(reference, it.step);
    auto& acc = sums[{it.block, it.outer}];
    acc.err_e += diff_squares(it.energy, ref.energy);
    acc.err_t += diff_squares(it.temperature, ref.temperature);
    acc.ref_e += sum_squares(ref.energy);
    acc.ref_t += sum_squares(ref.temperature);
  }
  return collect(sums);
}

std::vector<BlockErrors> error_vs_reference(const std::vector<IterationRecord>& log,
                                            const std::vector<StepFields>& reference) {
  std::map<std::pair<int, int>, Accumulator> sums;
  for (const auto& rec : log) {
    if (std::isnan(rec.error_e) || std::isnan(rec.error_t))
      throw std::invalid_argument("error_vs_reference: log has no reference errors");
    const StepFields& ref = reference_step(reference, rec.step);
    const double re = sum_squares(ref.energy);
    const double rt = sum_squares(ref.temperature);
    auto& acc = sums[{rec.block, rec.outer}];
    acc.err_e += rec.error_e * rec.error_e * re;
    acc.err_t += rec.error_t * rec.error_t * rt;
    acc.ref_e += re;
    acc.ref_t += rt;
  }
  return collect(sums);
}

ConvergenceRate average_convergence_rate(const std::vector<BlockErrors>& errors, double floor) {
  ConvergenceRate rate;
  double log_e = 0.0, log_t = 0.0;
  auto add_pairs = [floor](const std::vector<double>& e, double& log_sum, int& count) {
    for (std::size_t j = 0; j + 1 < e.size(); ++j) {
      if (e[j] < floor || e[j + 1] < floor) continue;
      log_sum += std::log(e[j + 1] / e[j]);
      ++count;
    }
  };
  for (const auto& block : errors) {
    add_pairs(block.energy, log_e, rate.energy_pairs);
    add_pairs(block.temperature, log_t, rate.temperature_pairs);
  }
  if (rate.energy_pairs == 0 || rate.temperature_pairs == 0)
    throw std::invalid_argument("average_convergence_rate: no iteration pairs above the floor");
  rate.energy = std::exp(log_e / rate.energy_pairs);
  rate.temperature = std::exp(log_t / rate.temperature_pairs);
  return rate;
}

FieldComparison compare_fields(const std::vector<StepFields>& a, const std::vector<StepFields>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("compare_fields: time grids differ");
  FieldComparison out;
  out.steps = static_cast<int>(a.size());
  for (std::size_t n = 0; n < a.size(); ++n) {
    const double e = relative_error(a[n].energy, b[n].energy);
    const double t = relative_error(a[n].temperature, b[n].temperature);
    out.max_energy = std::max(out.max_energy, e);
    out.max_temperature = std::max(out.max_temperature, t);
    out.final_energy = e;
    out.final_temperature = t;
  }
  return out;
}

}  // namespace mlqd
