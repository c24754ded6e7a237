#pragma once

#include <vector>

#include "mlqd/problem.hpp"

namespace mlqd::test {

inline BoundaryConditions all_sides(BoundaryKind kind, double temperature = 0.0) {
  BoundaryConditions b;
  b.fill({kind, temperature});
  return b;
}

inline Discretization make_disc(int nx, int ny, double lx, double ly, int groups,
                                QuadratureSpec quadrature, BoundaryConditions bcs) {
  return Discretization(SpatialMesh(nx, ny, lx, ly), build_quadrature(quadrature),
                        FrequencyGroups::log_spaced(groups, 1e-2, 1e2), bcs);
}

inline GroupMaterialData constant_material(int groups, int cells, double kappa, double planck) {
  GroupMaterialData d;
  d.groups = groups;
  d.cells = cells;
  d.kappa.assign(static_cast<std::size_t>(groups) * cells, kappa);
  d.planck.assign(d.kappa.size(), planck);
  return d;
}

}  // namespace mlqd::test
