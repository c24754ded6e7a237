#include "mlqd/problem.hpp"

#include <stdexcept>

namespace mlqd {

Discretization::Discretization(SpatialMesh mesh, AngularQuadrature quadrature,
                               FrequencyGroups groups, BoundaryConditions boundaries)
    : mesh_(std::move(mesh)),
      quadrature_(std::move(quadrature)),
      groups_(std::move(groups)),
      boundaries_(boundaries) {
  incident_.assign(static_cast<std::size_t>(groups_.count()) * 4, 0.0);
  for (Side side : kAllSides) {
    const auto& bc = boundary(side);
    if (bc.kind == BoundaryKind::reflective) {
      for (int m = 0; m < quadrature_.size(); ++m)
        if (quadrature_.reflect_x(m) < 0 || quadrature_.reflect_y(m) < 0)
          throw std::invalid_argument("reflective boundary needs a reflection-symmetric quadrature");
    }
    if (bc.kind != BoundaryKind::blackbody) continue;
    if (!(bc.temperature > 0.0))
      throw std::invalid_argument("black-body boundary temperature must be > 0");
    for (int g = 0; g < groups_.count(); ++g)
      incident_[g * 4 + static_cast<int>(side)] = planck_group(bc.temperature, g, groups_);
  }
}

}  // namespace mlqd
