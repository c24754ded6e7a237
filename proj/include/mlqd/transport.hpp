#pragma once

#include <vector>

#include "mlqd/problem.hpp"

namespace mlqd {

/// Cell-average intensities I[g][m][cell] at one time level.
struct AngularIntensity {
  int groups = 0;
  int directions = 0;
  int cells = 0;
  std::vector<double> values;

  AngularIntensity() = default;
  AngularIntensity(int groups, int directions, int cells);

  std::size_t index(int g, int m, int cell) const {
    return (static_cast<std::size_t>(g) * directions + m) * cells + cell;
  }
  double& at(int g, int m, int cell) { return values[index(g, m, cell)]; }
  double at(int g, int m, int cell) const { return values[index(g, m, cell)]; }
};

/// Isotropic Planck intensity B_g(T) in every cell and direction.
AngularIntensity isotropic_planck(const Discretization& disc, std::span<const double> temperature);

/// Face-average intensities on boundary faces, [g][m][boundary face]. Holds
/// the incident value for incoming directions and the exiting value for
/// outgoing ones.
struct BoundaryIntensity {
  int groups = 0;
  int directions = 0;
  int faces = 0;
  std::vector<double> values;

  std::size_t index(int g, int m, int face) const {
    return (static_cast<std::size_t>(g) * directions + m) * faces + face;
  }
  double at(int g, int m, int face) const { return values[index(g, m, face)]; }
};

struct SweepOptions {
  /// Keep the discrete streaming term Omega.grad I per (g, m, cell).
  bool streaming = false;
  /// Accumulate face fluxes sum_m w_m Omega_m I_m on every face.
  bool face_fluxes = false;
  /// Convergence of the boundary iteration when a side is reflective.
  double reflection_tolerance = 1e-15;
  int max_reflection_sweeps = 10000;
};

struct SweepResult {
  AngularIntensity intensity;
  BoundaryIntensity boundary;
  std::vector<double> streaming;    // [g][m][cell] when requested
  std::vector<double> face_flux_x;  // [g][x face] when requested
  std::vector<double> face_flux_y;  // [g][y face] when requested
};

/// One backward-Euler step of the multigroup transport equation,
///   (1/(c dt) + Omega.grad + kappa_g) I = kappa_g B_g + I_prev / (c dt),
/// by a step-characteristics sweep. material holds kappa_g and B_g at the
/// new-time temperature.
SweepResult sweep_step(const Discretization& disc, const AngularIntensity& previous,
                       const GroupMaterialData& material, double dt,
                       const SweepOptions& options = {});

/// Exiting face averages and cell average of one step-characteristics cell
/// solve. Inputs are the incoming face averages on the x- and y-faces.
struct CellSolution {
  double out_x;
  double out_y;
  double average;
};
CellSolution step_characteristic_cell(double in_x, double in_y, double sigma, double source,
                                      double abs_mu, double abs_eta, double dx, double dy);

struct EddingtonTensor {
  double xx = 1.0 / 3.0;
  double yy = 1.0 / 3.0;
  double xy = 0.0;
  double zz = 1.0 / 3.0;
};

/// Low-order boundary data of one group on one boundary face. With n the
/// outward normal, the boundary condition closed by these factors reads
///   F.n = C (c E_b - c E_in) + F_in.
struct BoundaryFactors {
  /// Normal-normal Eddington factor at the face.
  double normal_eddington = 1.0 / 3.0;
  /// C = sum_out w (Omega.n) I / sum_out w I.
  double conductance = 0.5;
  /// (1/c) sum_in w I_in.
  double incoming_energy = 0.0;
  /// sum_in w (Omega.n) I_in, non-positive.
  double incoming_flux = 0.0;
};

struct EddingtonClosure {
  int groups = 0;
  int cells = 0;
  int faces = 0;
  std::vector<EddingtonTensor> tensor;     // [g][cell]
  std::vector<BoundaryFactors> boundary;   // [g][boundary face]
  /// (g, cell) pairs where sum w I underflowed and the isotropic tensor was used.
  int degenerate_cells = 0;

  const EddingtonTensor& at(int g, int cell) const { return tensor[g * cells + cell]; }
  const BoundaryFactors& boundary_at(int g, int face) const { return boundary[g * faces + face]; }
};

/// f = I/3 everywhere with boundary factors of an isotropic exiting field.
EddingtonClosure isotropic_closure(const Discretization& disc);

/// Eddington tensor and boundary factors of a transport solution.
EddingtonClosure eddington_tensor(const Discretization& disc, const SweepResult& sweep);
EddingtonClosure eddington_tensor(const Discretization& disc, const AngularIntensity& intensity,
                                  const BoundaryIntensity& boundary);

/// Cell-centered group moments E_g = (1/c) sum w I and F_g = sum w Omega I.
struct CellMoments {
  int groups = 0;
  int cells = 0;
  std::vector<double> energy;  // [g][cell]
  std::vector<double> flux_x;
  std::vector<double> flux_y;
};
CellMoments moments(const Discretization& disc, const AngularIntensity& intensity);

}  // namespace mlqd
