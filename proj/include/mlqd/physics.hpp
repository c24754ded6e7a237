#pragma once

#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "mlqd/grid.hpp"

namespace mlqd {

// Units: cm, ns, keV, energy in GJ (1 GJ = 1e16 erg).
inline constexpr double kSpeedOfLight = 29.9792458;      // cm/ns
inline constexpr double kRadiationConstant = 0.01372;    // GJ / (cm^3 keV^4)

/// Integral of t^3 / (e^t - 1) over [0, x]; x = inf gives pi^4 / 15.
double planck_integral(double x);

/// e^x times the integral of t^3 / (e^t - 1) over [x, inf), for x >= 1.
double planck_tail_scaled(double x);

/// Group-integrated Planck intensity, normalized so that the sum over all
/// groups is a_R c T^4 / (4 pi). Throws std::domain_error for T <= 0.
double planck_group(double temperature, int group, const FrequencyGroups& groups);

/// dB_g/dT.
double planck_group_derivative(double temperature, int group, const FrequencyGroups& groups);

/// Spectral opacity laws. The Fleck-Cummings law is
/// kappa_nu = coefficient / nu^3 * (1 - exp(-nu / T)).
struct FleckCummingsOpacity {
  double coefficient = 27.0;
};
struct ConstantOpacity {
  double value = 1.0;
};
/// Arbitrary kappa(nu, T); group averages by numerical quadrature.
struct SpectralOpacity {
  std::function<double(double nu, double temperature)> kappa;
};
using OpacityLaw = std::variant<FleckCummingsOpacity, ConstantOpacity, SpectralOpacity>;

class MaterialModel {
 public:
  MaterialModel(double heat_capacity, OpacityLaw opacity);

  /// Specific heat c_v of the linear equation of state.
  double heat_capacity() const { return cv_; }
  const OpacityLaw& opacity_law() const { return opacity_; }

  double material_energy(double temperature) const;
  double temperature_of(double energy) const;

  /// Planck-weighted group opacity (cm^-1).
  double group_opacity(double temperature, int group, const FrequencyGroups& groups) const;

 private:
  double cv_;
  OpacityLaw opacity_;
};

/// kappa_g(T) and B_g(T) evaluated cell by cell, stored [g * cells + cell].
struct GroupMaterialData {
  int groups = 0;
  int cells = 0;
  std::vector<double> kappa;
  std::vector<double> planck;

  double kappa_at(int g, int cell) const { return kappa[g * cells + cell]; }
  double planck_at(int g, int cell) const { return planck[g * cells + cell]; }
};

GroupMaterialData evaluate_material(const MaterialModel& material, const FrequencyGroups& groups,
                                    std::span<const double> temperature);

/// Group Rosseland mean of kappa_g in one cell.
double rosseland_mean(const FrequencyGroups& groups, const GroupMaterialData& data, int cell,
                      double temperature);

}  // namespace mlqd
