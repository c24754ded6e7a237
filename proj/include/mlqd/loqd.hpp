#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlqd/problem.hpp"
#include "mlqd/transport.hpp"

namespace mlqd {

/// Raised when an iterative solve fails; the message carries the diagnostics.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Group moments at one time level: E_g at cell centers, normal fluxes on
/// x- and y-faces, and E_g on boundary faces.
struct GroupMoments {
  int groups = 0;
  int cells = 0;
  int x_faces = 0;
  int y_faces = 0;
  int boundary_faces = 0;
  std::vector<double> energy;           // [g][cell]
  std::vector<double> flux_x;           // [g][x face]
  std::vector<double> flux_y;           // [g][y face]
  std::vector<double> boundary_energy;  // [g][boundary face]

  GroupMoments() = default;
  GroupMoments(const SpatialMesh& mesh, int groups);

  std::span<const double> energy_of(int g) const {
    return {energy.data() + static_cast<std::size_t>(g) * cells, static_cast<std::size_t>(cells)};
  }
};

struct GreyMoments {
  std::vector<double> energy;
  std::vector<double> flux_x;
  std::vector<double> flux_y;
  std::vector<double> boundary_energy;

  GreyMoments() = default;
  explicit GreyMoments(const SpatialMesh& mesh);
};

/// Sum over groups; the grey system is built so that this is exact at the
/// fixed point of the inner cycle.
GreyMoments sum_groups(const GroupMoments& group);

struct LowOrderState {
  GroupMoments group;
  GreyMoments grey;
  std::vector<double> temperature;
};

/// Equilibrium radiation at the material temperature with zero flux.
LowOrderState equilibrium_state(const Discretization& disc, std::span<const double> temperature);

/// Backward-Euler multigroup low-order step:
///   (E_g - E_g^prev)/dt + div F_g + c kappa_g E_g = 4 pi kappa_g B_g,
///   (F_g - F_g^prev)/(c dt) + c div(f_g E_g) + kappa_g F_g = 0,
/// with kappa_g, B_g frozen from `material`. Face fluxes are eliminated into a
/// nine-point cell system solved directly.
GroupMoments mg_loqd_step(const Discretization& disc, const GroupMoments& previous,
                          const EddingtonClosure& closure, const GroupMaterialData& material,
                          double dt);

/// Which opacity multiplies F in the grey first-moment equation; eta absorbs
/// the remainder of sum_g kappa_g F_g.
enum class DriftReference { flux_weighted, rosseland };

struct GreyCoefficients {
  std::vector<double> kappa_e;   // <kappa>_E per cell
  std::vector<double> kappa_b;   // <kappa>_B per cell
  std::vector<double> kappa_fx;  // <kappa>_{F_x} per x face
  std::vector<double> kappa_fy;  // <kappa>_{F_y} per y face
  std::vector<double> reference_x;  // opacity multiplying F_x in the grey equation
  std::vector<double> reference_y;
  std::vector<double> drift_x;   // eta_x per x face
  std::vector<double> drift_y;   // eta_y per y face
  std::vector<EddingtonTensor> eddington;  // <f>_E per cell
  std::vector<BoundaryFactors> boundary;   // grey boundary factors
};

/// Spectrum-averaged coefficients of the grey system from a group solution.
/// `temperature` is only used for the Rosseland drift reference.
GreyCoefficients grey_coefficients(const Discretization& disc, const GroupMoments& group,
                                   const GroupMaterialData& material,
                                   const EddingtonClosure& closure,
                                   DriftReference reference = DriftReference::flux_weighted,
                                   std::span<const double> temperature = {});

struct GreySolution {
  GreyMoments grey;
  std::vector<double> temperature;
  int newton_iterations = 0;
  /// Cell-summed (d eps + d E) + dt * boundary outflow, relative.
  double energy_residual = 0.0;
};

/// Grey low-order equations coupled to the material energy balance
///   c_v (T - T_prev)/dt = c <kappa>_E E - c <kappa>_B a_R T^4,
/// with T eliminated per cell and Newton on E.
GreySolution grey_meb_solve(const Discretization& disc, const MaterialModel& material,
                            const GreyMoments& previous, std::span<const double> previous_temperature,
                            const GreyCoefficients& coeffs, double dt,
                            std::span<const double> initial_energy);

/// Positive root of c kB a_R T^4 + (c_v/dt) T = c kE E + (c_v/dt) T_prev.
double meb_temperature(double energy, double previous_temperature, double kappa_e, double kappa_b,
                       double heat_capacity, double dt);

/// Net energy leaving through the domain boundary per unit time, summed over
/// faces with their areas.
double boundary_outflow(const SpatialMesh& mesh, std::span<const double> flux_x,
                        std::span<const double> flux_y);

struct InnerCriteria {
  double tolerance = 1e-14;
  int max_iterations = 200;
  DriftReference drift = DriftReference::flux_weighted;
};

struct LowOrderStepResult {
  LowOrderState state;
  int inner_iterations = 0;
  double energy_residual = 0.0;
};

/// One time step of the low-order system: the nested cycle of multigroup
/// and grey-MEB solves, iterated until successive grey E and T agree to the
/// inner tolerance in the 2-norm.
LowOrderStepResult solve_low_order_step(const Discretization& disc, const MaterialModel& material,
                                        const LowOrderState& previous,
                                        const EddingtonClosure& closure,
                                        std::span<const double> temperature_guess, double dt,
                                        const InnerCriteria& criteria);

}  // namespace mlqd
