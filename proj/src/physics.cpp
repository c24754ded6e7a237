#include "mlqd/physics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace mlqd {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPlanckTotal = kPi * kPi * kPi * kPi / 15.0;
constexpr double kSeriesLimit = 2.0;

// B_2k / (2k)!, k = 1..15.
constexpr std::array<double, 15> kBernoulliOverFactorial = {
    8.33333333333333287e-02,  -1.38888888888888894e-03, 3.30687830687830710e-05,
    -8.26719576719576754e-07, 2.08767569878681002e-08,  -5.28419013868749322e-10,
    1.33825365306846789e-11,  -3.38968029632258272e-13, 8.58606205627784517e-15,
    -2.17486869855806192e-16, 5.50900282836022953e-18,  -1.39544646858125223e-19,
    3.53470703962946728e-21,  -8.95351742703754628e-23, 2.26795245233768293e-24};

// t^3/(e^t-1) = t^2 * sum B_n t^n / n!, integrated term by term. Valid for
// x < 2 pi; used below kSeriesLimit.
double planck_integral_series(double x) {
  const double x2 = x * x;
  double sum = x * x2 / 3.0 - x2 * x2 / 8.0;
  double power = x2 * x;  // x^(2k+3) for k = 0
  for (int k = 1; k <= static_cast<int>(kBernoulliOverFactorial.size()); ++k) {
    power *= x2;
    const double term = kBernoulliOverFactorial[k - 1] * power / (2 * k + 3);
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

double tail(double x) {
  if (std::isinf(x)) return 0.0;
  return std::exp(-x) * planck_tail_scaled(x);
}

// Integral of t^3/(e^t-1) over [xa, xb], xb may be +inf.
double planck_fraction_integral(double xa, double xb) {
  if (xa >= kSeriesLimit) return tail(xa) - tail(xb);
  return planck_integral(xb) - planck_integral(xa);
}

void require_positive_temperature(double temperature) {
  if (!(temperature > 0.0)) throw std::domain_error("temperature must be > 0");
}

}  // namespace

double planck_tail_scaled(double x) {
  // sum_k e^{-(k-1)x} (x^3/k + 3x^2/k^2 + 6x/k^3 + 6/k^4)
  const double x2 = x * x;
  const double x3 = x2 * x;
  const double decay = std::exp(-x);
  double weight = 1.0;
  double sum = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double kd = k;
    const double term = weight * (x3 / kd + 3.0 * x2 / (kd * kd) + 6.0 * x / (kd * kd * kd) +
                                  6.0 / (kd * kd * kd * kd));
    sum += term;
    if (term < 1e-17 * sum) break;
    weight *= decay;
  }
  return sum;
}

double planck_integral(double x) {
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return kPlanckTotal;
  if (x < kSeriesLimit) return planck_integral_series(x);
  return kPlanckTotal - tail(x);
}

double planck_group(double temperature, int group, const FrequencyGroups& groups) {
  require_positive_temperature(temperature);
  const double xa = groups.lower(group) / temperature;
  const double xb = groups.upper(group) / temperature;
  const double t2 = temperature * temperature;
  const double total = kRadiationConstant * kSpeedOfLight * t2 * t2 / (4.0 * kPi);
  return total * planck_fraction_integral(xa, xb) / kPlanckTotal;
}

double planck_group_derivative(double temperature, int group, const FrequencyGroups& groups) {
  require_positive_temperature(temperature);
  const double xa = groups.lower(group) / temperature;
  const double xb = groups.upper(group) / temperature;
  // x^4 / (e^x - 1), vanishing at 0 and inf.
  auto edge = [](double x) {
    if (x <= 0.0 || x > 700.0) return 0.0;
    return x * x * x * x / std::expm1(x);
  };
  const double t3 = temperature * temperature * temperature;
  const double scale = kRadiationConstant * kSpeedOfLight / (4.0 * kPi * kPlanckTotal);
  return scale * t3 * (4.0 * planck_fraction_integral(xa, xb) - edge(xb) + edge(xa));
}

MaterialModel::MaterialModel(double heat_capacity, OpacityLaw opacity)
    : cv_(heat_capacity), opacity_(std::move(opacity)) {
  if (!(cv_ > 0.0)) throw std::invalid_argument("material: heat capacity must be > 0");
}

double MaterialModel::material_energy(double temperature) const {
  require_positive_temperature(temperature);
  return cv_ * temperature;
}

double MaterialModel::temperature_of(double energy) const {
  if (!(energy > 0.0)) throw std::domain_error("material energy must be > 0");
  return energy / cv_;
}

namespace {

double fleck_cummings_group(double coefficient, double temperature, double xa, double xb) {
  const double t3 = temperature * temperature * temperature;
  if (xa >= kSeriesLimit) {
    // Factor e^{-xa} out of numerator and denominator.
    const double gap = xb - xa;
    const double shrink = std::isinf(xb) ? 0.0 : std::exp(-gap);
    const double num = std::isinf(xb) ? 1.0 : -std::expm1(-gap);
    const double den = planck_tail_scaled(xa) - (std::isinf(xb) ? 0.0 : shrink * planck_tail_scaled(xb));
    return coefficient * num / (t3 * den);
  }
  const double num = std::exp(-xa) - (std::isinf(xb) ? 0.0 : std::exp(-xb));
  return coefficient * num / (t3 * planck_fraction_integral(xa, xb));
}

double spectral_group(const SpectralOpacity& law, double temperature, double xa, double xb) {
  using boost::math::quadrature::gauss_kronrod;
  // Planck weight scaled by e^{xa}; the spectrum beyond xa + 60 is negligible.
  const double upper = std::min(xb, xa + 60.0);
  auto weight = [xa](double x) { return x * x * x * std::exp(-(x - xa)) / -std::expm1(-x); };
  const double den = gauss_kronrod<double, 31>::integrate(weight, xa, upper, 15, 1e-13);
  const double num = gauss_kronrod<double, 31>::integrate(
      [&](double x) { return law.kappa(x * temperature, temperature) * weight(x); }, xa, upper,
      15, 1e-13);
  return num / den;
}

}  // namespace

double MaterialModel::group_opacity(double temperature, int group,
                                    const FrequencyGroups& groups) const {
  require_positive_temperature(temperature);
  const double xa = groups.lower(group) / temperature;
  const double xb = groups.upper(group) / temperature;
  if (const auto* fc = std::get_if<FleckCummingsOpacity>(&opacity_))
    return fleck_cummings_group(fc->coefficient, temperature, xa, xb);
  if (const auto* constant = std::get_if<ConstantOpacity>(&opacity_)) return constant->value;
  return spectral_group(std::get<SpectralOpacity>(opacity_), temperature, xa, xb);
}

GroupMaterialData evaluate_material(const MaterialModel& material, const FrequencyGroups& groups,
                                    std::span<const double> temperature) {
  GroupMaterialData data;
  data.groups = groups.count();
  data.cells = static_cast<int>(temperature.size());
  data.kappa.resize(static_cast<std::size_t>(data.groups) * data.cells);
  data.planck.resize(data.kappa.size());
  for (int g = 0; g < data.groups; ++g) {
    for (int c = 0; c < data.cells; ++c) {
      data.kappa[g * data.cells + c] = material.group_opacity(temperature[c], g, groups);
      data.planck[g * data.cells + c] = planck_group(temperature[c], g, groups);
    }
  }
  return data;
}

double rosseland_mean(const FrequencyGroups& groups, const GroupMaterialData& data, int cell,
                      double temperature) {
  double num = 0.0;
  double den = 0.0;
  for (int g = 0; g < data.groups; ++g) {
    const double dbdt = planck_group_derivative(temperature, g, groups);
    num += dbdt;
    den += dbdt / data.kappa_at(g, cell);
  }
  return den > 0.0 ? num / den : data.kappa_at(0, cell);
}

}  // namespace mlqd
