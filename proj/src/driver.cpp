#include "mlqd/driver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mlqd {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double diff_norm2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

// Accumulates sum_n c dt (kappa B - Omega.grad I - kappa I) over a block.
struct MultiStepTracker {
  std::vector<double> start;
  std::vector<double> sum;

  void reset(const AngularIntensity& initial) {
    start = initial.values;
    sum.assign(start.size(), 0.0);
  }
  void add(const AngularIntensity& intensity, const SweepResult& sweep,
           const GroupMaterialData& material, double dt) {
    const double tau = kSpeedOfLight * dt;
    for (int g = 0; g < intensity.groups; ++g)
      for (int m = 0; m < intensity.directions; ++m)
        for (int c = 0; c < intensity.cells; ++c) {
          const std::size_t k = intensity.index(g, m, c);
          const double kappa = material.kappa_at(g, c);
          sum[k] += tau * (kappa * material.planck_at(g, c) - sweep.streaming[k] -
                           kappa * intensity.values[k]);
        }
  }
  double residual(const AngularIntensity& end) const {
    double num = 0.0;
    for (std::size_t k = 0; k < sum.size(); ++k) {
      const double r = end.values[k] - start[k] - sum[k];
      num += r * r;
    }
    return std::sqrt(num) / norm2(end.values);
  }
};

}  // namespace

double inner_tolerance(const ConvergenceCriteria& criteria) {
  if (criteria.inner_epsilon > 0.0) return criteria.inner_epsilon;
  return std::max(1e-2 * criteria.epsilon, 1e-15);
}

StepFields step_fields(const LowOrderState& state) {
  return {state.temperature, state.grey.energy, state.group.energy};
}

BlockState initial_state(const ProblemSetup& setup) {
  const std::vector<double> t(setup.disc.mesh().cells(), setup.initial_temperature);
  return {isotropic_planck(setup.disc, t), equilibrium_state(setup.disc, t)};
}

BlockState run_block(const ProblemSetup& setup, int b, const BlockState& start,
                     const ConvergenceCriteria& criteria, const RunOptions& options,
                     RunRecord& record) {
  if (!(criteria.epsilon > 0.0) || criteria.max_outer < 1 || criteria.max_inner < 1)
    throw std::invalid_argument("run_block: invalid convergence criteria");
  const auto& disc = setup.disc;
  const auto& time = setup.time;
  const int first = time.first_step(b);
  const int steps = time.block_steps(b);
  const InnerCriteria inner{inner_tolerance(criteria), criteria.max_inner, criteria.drift};
  const std::size_t log_start = record.iterations.size();

  std::vector<LowOrderState> current(steps);
  std::vector<double> residuals(steps, 0.0);

  auto low_order_pass = [&](int outer, auto&& closure_of) {
    std::vector<LowOrderState> next(steps);
    for (int k = 0; k < steps; ++k) {
      const int n = first + k;
      const LowOrderState& prev = k == 0 ? start.low_order : next[k - 1];
      // The temperature guess is the previous outer iterate at the same step;
      // on the first pass it is the previous step.
      const std::vector<double>& guess = outer == 0 ? prev.temperature : current[k].temperature;
      LowOrderStepResult r =
          solve_low_order_step(disc, setup.material, prev, closure_of(k), guess, time.dt(n), inner);
      residuals[k] = r.energy_residual;
      next[k] = std::move(r.state);
    }
    return next;
  };

  auto log_pass = [&](int outer, const std::vector<LowOrderState>* previous) {
    double max_xi_e = 0.0, max_xi_t = 0.0, max_e = 0.0, max_t = 0.0;
    for (int k = 0; k < steps; ++k) {
      const int n = first + k;
      IterationRecord rec;
      rec.block = b;
      rec.outer = outer;
      rec.step = n;
      const auto& e = current[k].grey.energy;
      const auto& t = current[k].temperature;
      if (previous) {
        rec.xi_e = diff_norm2(e, (*previous)[k].grey.energy);
        rec.xi_t = diff_norm2(t, (*previous)[k].temperature);
        max_xi_e = std::max(max_xi_e, rec.xi_e);
        max_xi_t = std::max(max_xi_t, rec.xi_t);
      }
      max_e = std::max(max_e, norm2(e));
      max_t = std::max(max_t, norm2(t));
      if (options.reference) {
        const StepFields& ref = (*options.reference).at(n);
        rec.error_e = diff_norm2(e, ref.energy) / norm2(ref.energy);
        rec.error_t = diff_norm2(t, ref.temperature) / norm2(ref.temperature);
      }
      record.iterations.push_back(rec);
      if (options.keep_iterates) record.iterates.push_back({b, outer, n, e, t});
    }
    return previous && max_xi_e <= criteria.epsilon * max_e && max_xi_t <= criteria.epsilon * max_t;
  };

  const EddingtonClosure isotropic = isotropic_closure(disc);
  current = low_order_pass(0, [&](int) -> const EddingtonClosure& { return isotropic; });
  log_pass(0, nullptr);

  std::vector<EddingtonClosure> closures(steps);
  AngularIntensity terminal;
  MultiStepTracker tracker;
  SweepOptions sweep_options;
  sweep_options.streaming = options.track_multi_step;
  double multi_step = std::numeric_limits<double>::quiet_NaN();

  for (int outer = 1; outer <= criteria.max_outer; ++outer) {
    // High-order pass at the previous outer temperatures.
    const AngularIntensity* prev = &start.intensity;
    if (options.track_multi_step) tracker.reset(start.intensity);
    SweepResult sweep;
    for (int k = 0; k < steps; ++k) {
      const int n = first + k;
      const GroupMaterialData material =
          evaluate_material(setup.material, disc.groups(), current[k].temperature);
      SweepResult next = sweep_step(disc, *prev, material, time.dt(n), sweep_options);
      closures[k] = eddington_tensor(disc, next);
      record.degenerate_closures += closures[k].degenerate_cells;
      if (options.track_multi_step) tracker.add(next.intensity, next, material, time.dt(n));
      sweep = std::move(next);
      prev = &sweep.intensity;
    }
    if (options.track_multi_step) multi_step = tracker.residual(sweep.intensity);
    terminal = std::move(sweep.intensity);

    const std::vector<LowOrderState> previous = std::move(current);
    current = previous;  // temperature guesses for the pass below
    current = low_order_pass(outer, [&](int k) -> const EddingtonClosure& { return closures[k]; });
    if (log_pass(outer, &previous)) {
      record.blocks.push_back({b, steps, outer, multi_step});
      for (int k = 0; k < steps; ++k) {
        record.fields.push_back(step_fields(current[k]));
        record.conservation.push_back(residuals[k]);
      }
      return {std::move(terminal), std::move(current.back())};
    }
  }

  std::ostringstream msg;
  msg << "block " << b << ": outer iteration did not converge in " << criteria.max_outer
      << " iterations";
  std::vector<IterationRecord> history(record.iterations.begin() + static_cast<std::ptrdiff_t>(log_start),
                                       record.iterations.end());
  throw OuterIterationError(msg.str(), std::move(history));
}

RunRecord run_problem(const ProblemSetup& setup, const ConvergenceCriteria& criteria,
                      const RunOptions& options) {
  if (options.reference &&
      static_cast<int>(options.reference->size()) != setup.time.steps() + 1)
    throw std::invalid_argument("run_problem: reference has the wrong number of steps");
  RunRecord record;
  BlockState state = initial_state(setup);
  record.fields.push_back(step_fields(state.low_order));
  record.conservation.push_back(0.0);
  for (int b = 1; b <= setup.time.blocks(); ++b)
    state = run_block(setup, b, state, criteria, options, record);
  return record;
}

}  // namespace mlqd
