#pragma once

#include <array>
#include <vector>

#include "mlqd/grid.hpp"
#include "mlqd/physics.hpp"

namespace mlqd {

enum class BoundaryKind {
  vacuum,
  blackbody,
  /// Specular reflection; intended for verification problems.
  reflective,
};

struct BoundaryCondition {
  BoundaryKind kind = BoundaryKind::vacuum;
  /// Black-body temperature (keV) for BoundaryKind::blackbody.
  double temperature = 0.0;
};

using BoundaryConditions = std::array<BoundaryCondition, 4>;

/// Phase-space discretization shared by the high- and low-order solvers.
class Discretization {
 public:
  Discretization(SpatialMesh mesh, AngularQuadrature quadrature, FrequencyGroups groups,
                 BoundaryConditions boundaries);

  const SpatialMesh& mesh() const { return mesh_; }
  const AngularQuadrature& quadrature() const { return quadrature_; }
  const FrequencyGroups& groups() const { return groups_; }
  const BoundaryCondition& boundary(Side side) const {
    return boundaries_[static_cast<int>(side)];
  }
  bool reflective(Side side) const { return boundary(side).kind == BoundaryKind::reflective; }

  /// Isotropic incident intensity of group g on a side (0 for vacuum).
  double incident_intensity(int g, Side side) const {
    return incident_[g * 4 + static_cast<int>(side)];
  }

 private:
  SpatialMesh mesh_;
  AngularQuadrature quadrature_;
  FrequencyGroups groups_;
  BoundaryConditions boundaries_;
  std::vector<double> incident_;
};

}  // namespace mlqd
