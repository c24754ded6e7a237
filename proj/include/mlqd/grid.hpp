#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace mlqd {

/// Boundary side of the rectangular domain.
enum class Side { left = 0, right = 1, bottom = 2, top = 3 };

inline constexpr std::array<Side, 4> kAllSides = {Side::left, Side::right, Side::bottom,
                                                  Side::top};

std::string to_string(Side side);

/// Outward unit normal components of a side.
struct Normal {
  double x;
  double y;
};
Normal outward_normal(Side side);

/// Uniform orthogonal cell-centered mesh on [0, lx] x [0, ly].
///
/// Cells are numbered i + nx*j. x-faces are numbered i + (nx+1)*j where
/// face i sits on the left of cell i; y-faces are numbered i + nx*j where
/// face j sits below row j. Boundary faces get a separate compact
/// numbering: left, right, bottom, top.
class SpatialMesh {
 public:
  SpatialMesh(int nx, int ny, double lx, double ly);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double dx() const { return lx_ / nx_; }
  double dy() const { return ly_ / ny_; }
  double cell_volume() const { return dx() * dy(); }

  int cells() const { return nx_ * ny_; }
  int cell(int i, int j) const { return i + nx_ * j; }
  double x_center(int i) const { return (i + 0.5) * dx(); }
  double y_center(int j) const { return (j + 0.5) * dy(); }

  int x_faces() const { return (nx_ + 1) * ny_; }
  int x_face(int i, int j) const { return i + (nx_ + 1) * j; }
  int y_faces() const { return nx_ * (ny_ + 1); }
  int y_face(int i, int j) const { return i + nx_ * j; }

  int boundary_faces() const { return 2 * (nx_ + ny_); }
  /// Faces along a side: ny for left/right, nx for bottom/top.
  int side_length(Side side) const;
  int boundary_face(Side side, int k) const;
  /// Cell adjacent to the k-th face on a side.
  int boundary_cell(Side side, int k) const;
  /// Area (length in 2D) of a face on this side.
  double face_area(Side side) const;

 private:
  int nx_;
  int ny_;
  double lx_;
  double ly_;
};

/// One discrete ordinate. (mu, eta) stream in the plane; xi only enters the
/// weights and the zz moment.
struct Direction {
  double mu;
  double eta;
  double xi;
  double weight;
};

class AngularQuadrature {
 public:
  explicit AngularQuadrature(std::vector<Direction> directions);

  const std::vector<Direction>& directions() const { return directions_; }
  const Direction& operator[](std::size_t m) const { return directions_[m]; }
  int size() const { return static_cast<int>(directions_.size()); }

  /// Index of the direction mirrored across a face normal to x (mu -> -mu).
  int reflect_x(int m) const { return reflect_x_[m]; }
  int reflect_y(int m) const { return reflect_y_[m]; }

 private:
  std::vector<Direction> directions_;
  std::vector<int> reflect_x_;
  std::vector<int> reflect_y_;
};

struct QuadratureSpec {
  enum class Layout { product, triangular };
  Layout layout = Layout::product;
  /// Polar levels per hemisphere.
  int polar = 3;
  /// Azimuthal angles per quadrant (product) or on the equatorial level
  /// (triangular: level p carries p angles counting from the pole).
  int azimuthal = 12;
};

/// Gauss (polar cosine) x Chebyshev (azimuth) set on the unit sphere,
/// collapsed onto the (mu, eta) plane. Weights sum to 4*pi.
AngularQuadrature build_quadrature(const QuadratureSpec& spec);

/// Frequency group edges nu_0 < ... < nu_G in keV. The Planck spectrum below
/// nu_0 is folded into the first group and the tail above nu_G into the last,
/// so the groups partition (0, inf).
class FrequencyGroups {
 public:
  explicit FrequencyGroups(std::vector<double> bounds);
  static FrequencyGroups log_spaced(int count, double nu_min, double nu_max);

  int count() const { return static_cast<int>(bounds_.size()) - 1; }
  const std::vector<double>& bounds() const { return bounds_; }
  /// Integration limits of group g including the folded tails; the upper
  /// limit of the last group is +inf.
  double lower(int g) const;
  double upper(int g) const;

 private:
  std::vector<double> bounds_;
};

/// Time steps t^0..t^N grouped into blocks of consecutive steps.
class TimeBlockPartition {
 public:
  TimeBlockPartition(std::vector<double> step_edges, std::vector<int> block_edges);

  int steps() const { return static_cast<int>(step_edges_.size()) - 1; }
  int blocks() const { return static_cast<int>(block_edges_.size()) - 1; }
  double time(int n) const { return step_edges_[n]; }
  double dt(int n) const { return step_edges_[n] - step_edges_[n - 1]; }
  double t_end() const { return step_edges_.back(); }

  /// Steps of block b (1-based) are first_step(b) .. last_step(b) inclusive.
  int first_step(int b) const { return block_edges_[b - 1] + 1; }
  int last_step(int b) const { return block_edges_[b]; }
  int block_steps(int b) const { return block_edges_[b] - block_edges_[b - 1]; }
  double block_length(int b) const {
    return step_edges_[block_edges_[b]] - step_edges_[block_edges_[b - 1]];
  }

  const std::vector<double>& step_edges() const { return step_edges_; }
  const std::vector<int>& block_edges() const { return block_edges_; }

 private:
  std::vector<double> step_edges_;
  std::vector<int> block_edges_;
};

/// Uniform steps of dt with blocks of block_len / dt steps; the last block
/// may be shorter. Throws std::invalid_argument when block_len is not a
/// multiple of dt or dt does not divide t_end.
TimeBlockPartition build_time_blocks(double dt, double t_end, double block_len);

}  // namespace mlqd
