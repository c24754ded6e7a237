#include "mlqd/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/legendre.hpp>

namespace mlqd {

std::string to_string(Side side) {
  switch (side) {
    case Side::left:
      return "left";
    case Side::right:
      return "right";
    case Side::bottom:
      return "bottom";
    case Side::top:
      return "top";
  }
  return "?";
}

Normal outward_normal(Side side) {
  switch (side) {
    case Side::left:
      return {-1.0, 0.0};
    case Side::right:
      return {1.0, 0.0};
    case Side::bottom:
      return {0.0, -1.0};
    case Side::top:
      return {0.0, 1.0};
  }
  return {0.0, 0.0};
}

SpatialMesh::SpatialMesh(int nx, int ny, double lx, double ly)
    : nx_(nx), ny_(ny), lx_(lx), ly_(ly) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("mesh: nx and ny must be >= 1");
  if (!(lx > 0.0) || !(ly > 0.0)) throw std::invalid_argument("mesh: extents must be > 0");
}

int SpatialMesh::side_length(Side side) const {
  return (side == Side::left || side == Side::right) ? ny_ : nx_;
}

int SpatialMesh::boundary_face(Side side, int k) const {
  switch (side) {
    case Side::left:
      return k;
    case Side::right:
      return ny_ + k;
    case Side::bottom:
      return 2 * ny_ + k;
    case Side::top:
      return 2 * ny_ + nx_ + k;
  }
  return -1;
}

int SpatialMesh::boundary_cell(Side side, int k) const {
  switch (side) {
    case Side::left:
      return cell(0, k);
    case Side::right:
      return cell(nx_ - 1, k);
    case Side::bottom:
      return cell(k, 0);
    case Side::top:
      return cell(k, ny_ - 1);
  }
  return -1;
}

double SpatialMesh::face_area(Side side) const {
  return (side == Side::left || side == Side::right) ? dy() : dx();
}

AngularQuadrature::AngularQuadrature(std::vector<Direction> directions)
    : directions_(std::move(directions)) {
  const int count = size();
  reflect_x_.assign(count, -1);
  reflect_y_.assign(count, -1);
  auto find = [&](double mu, double eta, double xi) {
    for (int k = 0; k < count; ++k) {
      const auto& d = directions_[k];
      if (std::abs(d.mu - mu) < 1e-13 && std::abs(d.eta - eta) < 1e-13 &&
          std::abs(d.xi - xi) < 1e-13)
        return k;
    }
    return -1;
  };
  for (int m = 0; m < count; ++m) {
    const auto& d = directions_[m];
    if (d.mu == 0.0 || d.eta == 0.0)
      throw std::invalid_argument("quadrature: direction with mu == 0 or eta == 0");
    reflect_x_[m] = find(-d.mu, d.eta, d.xi);
    reflect_y_[m] = find(d.mu, -d.eta, d.xi);
  }
}

namespace {

struct PolarLevel {
  double xi;
  double weight;  // sums to 1 over the upper hemisphere
};

// Positive half of the 2n-point Gauss-Legendre rule on [-1, 1]; integrates
// xi^2 exactly for every n >= 1.
std::vector<PolarLevel> polar_levels(int n) {
  const auto zeros = boost::math::legendre_p_zeros<double>(2 * n);
  std::vector<PolarLevel> levels;
  for (double x : zeros) {
    if (x <= 0.0) continue;
    const double dp = boost::math::legendre_p_prime(2 * n, x);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    levels.push_back({x, w});
  }
  std::sort(levels.begin(), levels.end(),
            [](const PolarLevel& a, const PolarLevel& b) { return a.xi > b.xi; });
  return levels;
}

}  // namespace

AngularQuadrature build_quadrature(const QuadratureSpec& spec) {
  if (spec.polar < 1 || spec.azimuthal < 1)
    throw std::invalid_argument("quadrature: polar and azimuthal counts must be >= 1");
  if (spec.layout == QuadratureSpec::Layout::triangular && spec.azimuthal < spec.polar)
    throw std::invalid_argument("quadrature: triangular layout needs azimuthal >= polar");

  const auto levels = polar_levels(spec.polar);
  const double pi = std::numbers::pi;
  // Quadrant signs in (mu, eta) order: (+,+), (-,+), (-,-), (+,-).
  constexpr std::array<std::array<double, 2>, 4> quadrants = {
      {{1.0, 1.0}, {-1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}}};

  std::vector<Direction> dirs;
  for (const auto& sign : quadrants) {
    for (std::size_t p = 0; p < levels.size(); ++p) {
      int n_az = spec.azimuthal;
      if (spec.layout == QuadratureSpec::Layout::triangular) {
        // p counts from the pole; the equatorial level gets spec.azimuthal.
        n_az = spec.azimuthal - static_cast<int>(levels.size() - 1 - p);
      }
      const double xi = levels[p].xi;
      const double sin_theta = std::sqrt(1.0 - xi * xi);
      // Both hemispheres project onto the same planar direction.
      const double w = 2.0 * levels[p].weight * (0.5 * pi) / n_az;
      for (int a = 0; a < n_az; ++a) {
        const double phi = (a + 0.5) * (0.5 * pi) / n_az;
        dirs.push_back({sign[0] * sin_theta * std::cos(phi), sign[1] * sin_theta * std::sin(phi),
                        xi, w});
      }
    }
  }
  return AngularQuadrature(std::move(dirs));
}

FrequencyGroups::FrequencyGroups(std::vector<double> bounds) : bounds_(std::move(bounds)) {
  if (bounds_.size() < 2) throw std::invalid_argument("groups: need at least two boundaries");
  if (!(bounds_.front() > 0.0)) throw std::invalid_argument("groups: nu_0 must be > 0");
  for (std::size_t k = 1; k < bounds_.size(); ++k) {
    if (!(bounds_[k] > bounds_[k - 1]) || !std::isfinite(bounds_[k]))
      throw std::invalid_argument("groups: boundaries must be finite and strictly increasing");
  }
}

FrequencyGroups FrequencyGroups::log_spaced(int count, double nu_min, double nu_max) {
  if (count < 1) throw std::invalid_argument("groups: count must be >= 1");
  if (!(nu_min > 0.0) || !(nu_max > nu_min))
    throw std::invalid_argument("groups: need 0 < nu_min < nu_max");
  std::vector<double> b(count + 1);
  const double lo = std::log10(nu_min);
  const double hi = std::log10(nu_max);
  for (int k = 0; k <= count; ++k) b[k] = std::pow(10.0, lo + (hi - lo) * k / count);
  b.front() = nu_min;
  b.back() = nu_max;
  return FrequencyGroups(std::move(b));
}

double FrequencyGroups::lower(int g) const { return g == 0 ? 0.0 : bounds_[g]; }

double FrequencyGroups::upper(int g) const {
  return g == count() - 1 ? std::numeric_limits<double>::infinity() : bounds_[g + 1];
}

TimeBlockPartition::TimeBlockPartition(std::vector<double> step_edges, std::vector<int> block_edges)
    : step_edges_(std::move(step_edges)), block_edges_(std::move(block_edges)) {
  if (step_edges_.size() < 2 || step_edges_.front() != 0.0)
    throw std::invalid_argument("time grid: need t^0 = 0 and at least one step");
  for (std::size_t n = 1; n < step_edges_.size(); ++n)
    if (!(step_edges_[n] > step_edges_[n - 1]))
      throw std::invalid_argument("time grid: step edges must be strictly increasing");
  if (block_edges_.size() < 2 || block_edges_.front() != 0 || block_edges_.back() != steps())
    throw std::invalid_argument("time grid: block edges must run from 0 to N");
  for (std::size_t b = 1; b < block_edges_.size(); ++b)
    if (block_edges_[b] <= block_edges_[b - 1])
      throw std::invalid_argument("time grid: blocks must contain at least one step");
}

namespace {

int commensurate(double length, double dt, const char* what) {
  const double ratio = length / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-12 * std::max(1.0, rounded))
    throw std::invalid_argument(std::string("time grid: ") + what + " is not a multiple of dt");
  return static_cast<int>(rounded);
}

}  // namespace

TimeBlockPartition build_time_blocks(double dt, double t_end, double block_len) {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw std::invalid_argument("time grid: dt, t_end must be > 0");
  const int steps = commensurate(t_end, dt, "t_end");
  int per_block = 0;
  if (std::abs(block_len - t_end) <= 1e-12 * t_end) {
    per_block = steps;
  } else {
    if (!(block_len > 0.0)) throw std::invalid_argument("time grid: block length must be > 0");
    per_block = commensurate(block_len, dt, "block length");
  }
  std::vector<double> edges(steps + 1);
  for (int n = 0; n <= steps; ++n) edges[n] = n * dt;
  edges.back() = t_end;

  std::vector<int> blocks{0};
  while (blocks.back() < steps) blocks.push_back(std::min(blocks.back() + per_block, steps));
  return TimeBlockPartition(std::move(edges), std::move(blocks));
}

}  // namespace mlqd
