#include "mlqd/loqd.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <limits>
#include <sstream>

#include "mlqd/banded.hpp"

namespace mlqd {

GroupMoments::GroupMoments(const SpatialMesh& mesh, int groups)
    : groups(groups),
      cells(mesh.cells()),
      x_faces(mesh.x_faces()),
      y_faces(mesh.y_faces()),
      boundary_faces(mesh.boundary_faces()),
      energy(static_cast<std::size_t>(groups) * cells, 0.0),
      flux_x(static_cast<std::size_t>(groups) * x_faces, 0.0),
      flux_y(static_cast<std::size_t>(groups) * y_faces, 0.0),
      boundary_energy(static_cast<std::size_t>(groups) * boundary_faces, 0.0) {}

GreyMoments::GreyMoments(const SpatialMesh& mesh)
    : energy(mesh.cells(), 0.0),
      flux_x(mesh.x_faces(), 0.0),
      flux_y(mesh.y_faces(), 0.0),
      boundary_energy(mesh.boundary_faces(), 0.0) {}

namespace {

void accumulate(std::vector<double>& sum, const std::vector<double>& values, int groups) {
  const std::size_t n = sum.size();
  for (int g = 0; g < groups; ++g)
    for (std::size_t k = 0; k < n; ++k) sum[k] += values[g * n + k];
}

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

}  // namespace

GreyMoments sum_groups(const GroupMoments& group) {
  GreyMoments grey;
  grey.energy.assign(group.cells, 0.0);
  grey.flux_x.assign(group.x_faces, 0.0);
  grey.flux_y.assign(group.y_faces, 0.0);
  grey.boundary_energy.assign(group.boundary_faces, 0.0);
  accumulate(grey.energy, group.energy, group.groups);
  accumulate(grey.flux_x, group.flux_x, group.groups);
  accumulate(grey.flux_y, group.flux_y, group.groups);
  accumulate(grey.boundary_energy, group.boundary_energy, group.groups);
  return grey;
}

LowOrderState equilibrium_state(const Discretization& disc, std::span<const double> temperature) {
  const auto& mesh = disc.mesh();
  const int groups = disc.groups().count();
  LowOrderState state;
  state.group = GroupMoments(mesh, groups);
  for (int g = 0; g < groups; ++g) {
    for (int c = 0; c < mesh.cells(); ++c)
      state.group.energy[g * mesh.cells() + c] =
          4.0 * std::numbers::pi * planck_group(temperature[c], g, disc.groups()) / kSpeedOfLight;
    for (Side side : kAllSides)
      for (int k = 0; k < mesh.side_length(side); ++k)
        state.group.boundary_energy[g * mesh.boundary_faces() + mesh.boundary_face(side, k)] =
            state.group.energy[g * mesh.cells() + mesh.boundary_cell(side, k)];
  }
  state.grey = sum_groups(state.group);
  state.temperature.assign(temperature.begin(), temperature.end());
  return state;
}

namespace {

// Face flux as an affine function of cell energies.
struct AffineFlux {
  double constant = 0.0;
  int count = 0;
  std::array<int, 10> cell{};
  std::array<double, 10> coeff{};

  void add(int c, double v) {
    for (int k = 0; k < count; ++k)
      if (cell[k] == c) {
        coeff[k] += v;
        return;
      }
    cell[count] = c;
    coeff[count++] = v;
  }
  void scale(double s) {
    constant *= s;
    for (int k = 0; k < count; ++k) coeff[k] *= s;
  }
  double eval(std::span<const double> e) const {
    double v = constant;
    for (int k = 0; k < count; ++k) v += coeff[k] * e[cell[k]];
    return v;
  }
};

struct BoundaryData {
  BoundaryFactors factors;
  bool reflective = false;
};

// Coefficients of one first-moment system (a group or the grey one).
struct FluxSystem {
  double dt = 0.0;
  std::vector<double> fxx, fyy, fxy;          // per cell
  std::vector<double> opacity_x, opacity_y;   // per face, multiplies F
  std::vector<double> drift_x, drift_y;       // per face, multiplies face E
  std::span<const double> previous_x, previous_y;
  std::vector<BoundaryData> boundary;         // per boundary face
};

struct FluxOperator {
  std::vector<AffineFlux> x;
  std::vector<AffineFlux> y;
};

// Average of f_xy E over the cells touching mesh corner (ci, cj).
void add_corner(const SpatialMesh& mesh, const std::vector<double>& fxy, int ci, int cj,
                double scale, AffineFlux& out) {
  int cells[4];
  int n = 0;
  for (int j = cj - 1; j <= cj; ++j)
    for (int i = ci - 1; i <= ci; ++i)
      if (i >= 0 && i < mesh.nx() && j >= 0 && j < mesh.ny()) cells[n++] = mesh.cell(i, j);
  for (int k = 0; k < n; ++k) out.add(cells[k], scale * fxy[cells[k]] / n);
}

int side_sign(Side side) { return (side == Side::right || side == Side::top) ? 1 : -1; }

// Half-cell first-moment equation between a boundary cell and its face, with
// E_b eliminated through F.n = C (c E_b - c E_in) + F_in.
void close_boundary_face(const BoundaryData& bd, Side side, double h, double removal,
                         double drift, double f_cell, int cell, AffineFlux& f) {
  if (bd.reflective) {
    f = AffineFlux{};
    return;
  }
  const double c = kSpeedOfLight;
  const double s = side_sign(side);
  const auto& b = bd.factors;
  const double coef = removal + 2.0 * b.normal_eddington / (h * b.conductance) +
                      s * drift / (c * b.conductance);
  const double offset = (drift + s * (2.0 * c / h) * b.normal_eddington) *
                        (c * b.conductance * b.incoming_energy - b.incoming_flux) /
                        (c * b.conductance);
  // f already holds alpha * F_prev and the tangential cross-derivative term.
  f.constant -= offset;
  f.add(cell, s * (2.0 * c / h) * f_cell);
  f.scale(1.0 / coef);
}

FluxOperator build_fluxes(const SpatialMesh& mesh, const FluxSystem& sys) {
  const double c = kSpeedOfLight;
  const double alpha = 1.0 / (c * sys.dt);
  const int nx = mesh.nx();
  const int ny = mesh.ny();
  const double dx = mesh.dx();
  const double dy = mesh.dy();
  FluxOperator op;
  op.x.resize(mesh.x_faces());
  op.y.resize(mesh.y_faces());

  for (int j = 0; j < ny; ++j) {
    for (int fi = 0; fi <= nx; ++fi) {
      const int face = mesh.x_face(fi, j);
      AffineFlux& f = op.x[face];
      f.constant = alpha * sys.previous_x[face];
      // -c d(f_xy E)/dy at the face
      add_corner(mesh, sys.fxy, fi, j + 1, -c / dy, f);
      add_corner(mesh, sys.fxy, fi, j, c / dy, f);
      const double removal = alpha + sys.opacity_x[face];
      const double drift = sys.drift_x[face];
      if (fi == 0 || fi == nx) {
        const Side side = fi == 0 ? Side::left : Side::right;
        const int cell = mesh.boundary_cell(side, j);
        close_boundary_face(sys.boundary[mesh.boundary_face(side, j)], side, dx, removal, drift,
                            sys.fxx[cell], cell, f);
        continue;
      }
      const int left = mesh.cell(fi - 1, j);
      const int right = mesh.cell(fi, j);
      f.add(left, c * sys.fxx[left] / dx - 0.5 * drift);
      f.add(right, -c * sys.fxx[right] / dx - 0.5 * drift);
      f.scale(1.0 / removal);
    }
  }

  for (int fj = 0; fj <= ny; ++fj) {
    for (int i = 0; i < nx; ++i) {
      const int face = mesh.y_face(i, fj);
      AffineFlux& f = op.y[face];
      f.constant = alpha * sys.previous_y[face];
      add_corner(mesh, sys.fxy, i + 1, fj, -c / dx, f);
      add_corner(mesh, sys.fxy, i, fj, c / dx, f);
      const double removal = alpha + sys.opacity_y[face];
      const double drift = sys.drift_y[face];
      if (fj == 0 || fj == ny) {
        const Side side = fj == 0 ? Side::bottom : Side::top;
        const int cell = mesh.boundary_cell(side, i);
        close_boundary_face(sys.boundary[mesh.boundary_face(side, i)], side, dy, removal, drift,
                            sys.fyy[cell], cell, f);
        continue;
      }
      const int below = mesh.cell(i, fj - 1);
      const int above = mesh.cell(i, fj);
      f.add(below, c * sys.fyy[below] / dy - 0.5 * drift);
      f.add(above, -c * sys.fyy[above] / dy - 0.5 * drift);
      f.scale(1.0 / removal);
    }
  }
  return op;
}

// Adds div F(E) to the matrix rows and moves its constant part to the rhs.
void assemble_divergence(const SpatialMesh& mesh, const FluxOperator& op, BandMatrix& a,
                         std::vector<double>& rhs) {
  auto add_face = [&](int row, const AffineFlux& f, double sign) {
    rhs[row] -= sign * f.constant;
    for (int k = 0; k < f.count; ++k) a.add(row, f.cell[k], sign * f.coeff[k]);
  };
  for (int j = 0; j < mesh.ny(); ++j)
    for (int i = 0; i < mesh.nx(); ++i) {
      const int row = mesh.cell(i, j);
      add_face(row, op.x[mesh.x_face(i + 1, j)], 1.0 / mesh.dx());
      add_face(row, op.x[mesh.x_face(i, j)], -1.0 / mesh.dx());
      add_face(row, op.y[mesh.y_face(i, j + 1)], 1.0 / mesh.dy());
      add_face(row, op.y[mesh.y_face(i, j)], -1.0 / mesh.dy());
    }
}

// Evaluates the face fluxes and the boundary-face energies.
void evaluate_fluxes(const SpatialMesh& mesh, const FluxOperator& op,
                     const std::vector<BoundaryData>& boundary, std::span<const double> energy,
                     std::span<double> flux_x, std::span<double> flux_y,
                     std::span<double> boundary_energy) {
  for (int f = 0; f < mesh.x_faces(); ++f) flux_x[f] = op.x[f].eval(energy);
  for (int f = 0; f < mesh.y_faces(); ++f) flux_y[f] = op.y[f].eval(energy);
  for (Side side : kAllSides) {
    const bool x_side = side == Side::left || side == Side::right;
    for (int k = 0; k < mesh.side_length(side); ++k) {
      const int bf = mesh.boundary_face(side, k);
      const int cell = mesh.boundary_cell(side, k);
      const auto& bd = boundary[bf];
      if (bd.reflective) {
        boundary_energy[bf] = energy[cell];
        continue;
      }
      double flux = 0.0;
      if (x_side)
        flux = flux_x[mesh.x_face(side == Side::left ? 0 : mesh.nx(), k)];
      else
        flux = flux_y[mesh.y_face(k, side == Side::bottom ? 0 : mesh.ny())];
      const auto& b = bd.factors;
      boundary_energy[bf] =
          (side_sign(side) * flux - b.incoming_flux) / (kSpeedOfLight * b.conductance) +
          b.incoming_energy;
    }
  }
}

BandMatrix make_matrix(const SpatialMesh& mesh) {
  return BandMatrix(mesh.cells(), mesh.nx() + 1, mesh.nx() + 1);
}

double relative_residual(const BandMatrix& a, std::span<const double> x, std::span<const double> b) {
  std::vector<double> ax(x.size());
  a.multiply(x, ax);
  return diff_norm2(ax, b) / std::max(norm2(b), 1e-300);
}

}  // namespace

GroupMoments mg_loqd_step(const Discretization& disc, const GroupMoments& previous,
                          const EddingtonClosure& closure, const GroupMaterialData& material,
                          double dt) {
  const auto& mesh = disc.mesh();
  const int groups = disc.groups().count();
  const int cells = mesh.cells();
  const int nbf = mesh.boundary_faces();
  const double c = kSpeedOfLight;
  if (previous.groups != groups || closure.groups != groups || material.groups != groups)
    throw std::invalid_argument("mg_loqd_step: group count mismatch");

  GroupMoments out(mesh, groups);
  FluxSystem sys;
  sys.dt = dt;
  sys.fxx.resize(cells);
  sys.fyy.resize(cells);
  sys.fxy.resize(cells);
  sys.opacity_x.resize(mesh.x_faces());
  sys.opacity_y.resize(mesh.y_faces());
  sys.drift_x.assign(mesh.x_faces(), 0.0);
  sys.drift_y.assign(mesh.y_faces(), 0.0);
  sys.boundary.resize(nbf);
  BandMatrix a = make_matrix(mesh);
  std::vector<double> rhs(cells), b(cells);

  for (int g = 0; g < groups; ++g) {
    for (int k = 0; k < cells; ++k) {
      const auto& t = closure.at(g, k);
      sys.fxx[k] = t.xx;
      sys.fyy[k] = t.yy;
      sys.fxy[k] = t.xy;
    }
    for (int j = 0; j < mesh.ny(); ++j)
      for (int fi = 0; fi <= mesh.nx(); ++fi) {
        const int left = mesh.cell(std::max(fi - 1, 0), j);
        const int right = mesh.cell(std::min(fi, mesh.nx() - 1), j);
        sys.opacity_x[mesh.x_face(fi, j)] =
            0.5 * (material.kappa_at(g, left) + material.kappa_at(g, right));
      }
    for (int fj = 0; fj <= mesh.ny(); ++fj)
      for (int i = 0; i < mesh.nx(); ++i) {
        const int below = mesh.cell(i, std::max(fj - 1, 0));
        const int above = mesh.cell(i, std::min(fj, mesh.ny() - 1));
        sys.opacity_y[mesh.y_face(i, fj)] =
            0.5 * (material.kappa_at(g, below) + material.kappa_at(g, above));
      }
    sys.previous_x = {previous.flux_x.data() + static_cast<std::size_t>(g) * mesh.x_faces(),
                      static_cast<std::size_t>(mesh.x_faces())};
    sys.previous_y = {previous.flux_y.data() + static_cast<std::size_t>(g) * mesh.y_faces(),
                      static_cast<std::size_t>(mesh.y_faces())};
    for (Side side : kAllSides)
      for (int k = 0; k < mesh.side_length(side); ++k) {
        const int bf = mesh.boundary_face(side, k);
        sys.boundary[bf] = {closure.boundary_at(g, bf), disc.reflective(side)};
      }

    const FluxOperator op = build_fluxes(mesh, sys);
    a.clear();
    for (int k = 0; k < cells; ++k) {
      const double kappa = material.kappa_at(g, k);
      a.add(k, k, 1.0 / dt + c * kappa);
      rhs[k] = 4.0 * std::numbers::pi * kappa * material.planck_at(g, k) +
               previous.energy[g * cells + k] / dt;
    }
    assemble_divergence(mesh, op, a, rhs);
    b = rhs;
    a.solve(rhs);
    const double residual = relative_residual(a, rhs, b);
    if (!(residual <= 1e-10)) {
      std::ostringstream msg;
      msg << "mg_loqd_step: group " << g << " linear solve residual " << residual;
      throw SolverError(msg.str());
    }

    std::copy(rhs.begin(), rhs.end(), out.energy.begin() + static_cast<std::ptrdiff_t>(g) * cells);
    evaluate_fluxes(mesh, op, sys.boundary, rhs,
                    {out.flux_x.data() + static_cast<std::size_t>(g) * mesh.x_faces(),
                     static_cast<std::size_t>(mesh.x_faces())},
                    {out.flux_y.data() + static_cast<std::size_t>(g) * mesh.y_faces(),
                     static_cast<std::size_t>(mesh.y_faces())},
                    {out.boundary_energy.data() + static_cast<std::size_t>(g) * nbf,
                     static_cast<std::size_t>(nbf)});
  }
  return out;
}

GreyCoefficients grey_coefficients(const Discretization& disc, const GroupMoments& group,
                                   const GroupMaterialData& material,
                                   const EddingtonClosure& closure, DriftReference reference,
                                   std::span<const double> temperature) {
  const auto& mesh = disc.mesh();
  const int groups = group.groups;
  const int cells = mesh.cells();
  const int nbf = mesh.boundary_faces();
  GreyCoefficients gc;
  gc.kappa_e.resize(cells);
  gc.kappa_b.resize(cells);
  gc.eddington.resize(cells);
  std::vector<double> e_sum(cells, 0.0);
  std::vector<double> rosseland;
  if (reference == DriftReference::rosseland) {
    if (static_cast<int>(temperature.size()) != cells)
      throw std::invalid_argument("grey_coefficients: Rosseland reference needs temperatures");
    rosseland.resize(cells);
    for (int k = 0; k < cells; ++k)
      rosseland[k] = rosseland_mean(disc.groups(), material, k, temperature[k]);
  }

  for (int k = 0; k < cells; ++k) {
    double e = 0.0, ke = 0.0, kb = 0.0, bsum = 0.0;
    EddingtonTensor f{0.0, 0.0, 0.0, 0.0};
    for (int g = 0; g < groups; ++g) {
      const double eg = group.energy[g * cells + k];
      const double kg = material.kappa_at(g, k);
      const auto& t = closure.at(g, k);
      e += eg;
      ke += kg * eg;
      kb += kg * material.planck_at(g, k);
      bsum += material.planck_at(g, k);
      f.xx += t.xx * eg;
      f.yy += t.yy * eg;
      f.xy += t.xy * eg;
      f.zz += t.zz * eg;
    }
    if (!(e > 0.0)) {
      std::ostringstream msg;
      msg << "grey_coefficients: non-positive total energy " << e << " in cell " << k;
      throw SolverError(msg.str());
    }
    e_sum[k] = e;
    gc.kappa_e[k] = ke / e;
    gc.kappa_b[k] = bsum > 0.0 ? kb / bsum : material.kappa_at(0, k);
    gc.eddington[k] = {f.xx / e, f.yy / e, f.xy / e, f.zz / e};
  }

  // Face averages. cell_a/cell_b coincide on boundary faces.
  auto face_coefficients = [&](int face, int cell_a, int cell_b, int n_faces,
                               const std::vector<double>& flux, double face_energy,
                               double& kappa_f, double& ref, double& drift) {
    double abs_sum = 0.0, weighted = 0.0, signed_kf = 0.0, f_sum = 0.0;
    for (int g = 0; g < groups; ++g) {
      const double fg = flux[static_cast<std::size_t>(g) * n_faces + face];
      const double kg = 0.5 * (material.kappa_at(g, cell_a) + material.kappa_at(g, cell_b));
      abs_sum += std::abs(fg);
      weighted += kg * std::abs(fg);
      signed_kf += kg * fg;
      f_sum += fg;
    }
    kappa_f = abs_sum > 0.0 ? weighted / abs_sum : 0.5 * (gc.kappa_e[cell_a] + gc.kappa_e[cell_b]);
    ref = reference == DriftReference::rosseland ? 0.5 * (rosseland[cell_a] + rosseland[cell_b])
                                                   : kappa_f;
    drift = face_energy > 0.0 ? (signed_kf - ref * f_sum) / face_energy : 0.0;
  };

  std::vector<double> eb_sum(nbf, 0.0);
  for (int g = 0; g < groups; ++g)
    for (int f = 0; f < nbf; ++f) eb_sum[f] += group.boundary_energy[g * nbf + f];

  gc.kappa_fx.resize(mesh.x_faces());
  gc.reference_x.resize(mesh.x_faces());
  gc.drift_x.resize(mesh.x_faces());
  for (int j = 0; j < mesh.ny(); ++j)
    for (int fi = 0; fi <= mesh.nx(); ++fi) {
      const int face = mesh.x_face(fi, j);
      const int a = mesh.cell(std::max(fi - 1, 0), j);
      const int b = mesh.cell(std::min(fi, mesh.nx() - 1), j);
      double fe = 0.5 * (e_sum[a] + e_sum[b]);
      if (fi == 0) fe = eb_sum[mesh.boundary_face(Side::left, j)];
      if (fi == mesh.nx()) fe = eb_sum[mesh.boundary_face(Side::right, j)];
      face_coefficients(face, a, b, mesh.x_faces(), group.flux_x, fe, gc.kappa_fx[face],
                        gc.reference_x[face], gc.drift_x[face]);
    }
  gc.kappa_fy.resize(mesh.y_faces());
  gc.reference_y.resize(mesh.y_faces());
  gc.drift_y.resize(mesh.y_faces());
  for (int fj = 0; fj <= mesh.ny(); ++fj)
    for (int i = 0; i < mesh.nx(); ++i) {
      const int face = mesh.y_face(i, fj);
      const int a = mesh.cell(i, std::max(fj - 1, 0));
      const int b = mesh.cell(i, std::min(fj, mesh.ny() - 1));
      double fe = 0.5 * (e_sum[a] + e_sum[b]);
      if (fj == 0) fe = eb_sum[mesh.boundary_face(Side::bottom, i)];
      if (fj == mesh.ny()) fe = eb_sum[mesh.boundary_face(Side::top, i)];
      face_coefficients(face, a, b, mesh.y_faces(), group.flux_y, fe, gc.kappa_fy[face],
                        gc.reference_y[face], gc.drift_y[face]);
    }

  gc.boundary.resize(nbf);
  for (int f = 0; f < nbf; ++f) {
    double fnn = 0.0, cond = 0.0, q = 0.0, fin = 0.0, fnn_avg = 0.0, cond_avg = 0.0;
    for (int g = 0; g < groups; ++g) {
      const auto& b = closure.boundary_at(g, f);
      const double eb = group.boundary_energy[g * nbf + f];
      fnn += b.normal_eddington * eb;
      cond += b.conductance * eb;
      q += b.conductance * b.incoming_energy;
      fin += b.incoming_flux;
      fnn_avg += b.normal_eddington / groups;
      cond_avg += b.conductance / groups;
    }
    BoundaryFactors& out = gc.boundary[f];
    if (eb_sum[f] > 0.0 && cond > 0.0) {
      out.normal_eddington = fnn / eb_sum[f];
      out.conductance = cond / eb_sum[f];
    } else {
      out.normal_eddington = fnn_avg;
      out.conductance = cond_avg;
    }
    out.incoming_energy = q / out.conductance;
    out.incoming_flux = fin;
  }
  return gc;
}

double meb_temperature(double energy, double previous_temperature, double kappa_e, double kappa_b,
                       double heat_capacity, double dt) {
  const double c = kSpeedOfLight;
  const double a4 = c * kappa_b * kRadiationConstant;
  const double lin = heat_capacity / dt;
  const double rhs = c * kappa_e * energy + lin * previous_temperature;
  if (!(rhs > 0.0)) {
    std::ostringstream msg;
    msg << "meb_temperature: no positive root (E = " << energy << ", T_prev = "
        << previous_temperature << ")";
    throw SolverError(msg.str());
  }
  // Both terms are non-negative, so each alone bounds the root from above;
  // Newton on the convex quartic then decreases monotonically to the root.
  double hi = rhs / lin;
  if (a4 > 0.0) hi = std::min(hi, std::sqrt(std::sqrt(rhs / a4)));
  double lo = 0.0;
  double t = hi;
  for (int it = 0; it < 200; ++it) {
    const double t3 = t * t * t;
    const double p = a4 * t3 * t + lin * t - rhs;
    if (p > 0.0) hi = std::min(hi, t);
    else lo = std::max(lo, t);
    const double dp = 4.0 * a4 * t3 + lin;
    double next = t - p / dp;
    if (!(next > lo && next <= hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-15 * t) return next;
    t = next;
  }
  return t;
}

double boundary_outflow(const SpatialMesh& mesh, std::span<const double> flux_x,
                        std::span<const double> flux_y) {
  double out = 0.0;
  for (int j = 0; j < mesh.ny(); ++j)
    out += mesh.dy() * (flux_x[mesh.x_face(mesh.nx(), j)] - flux_x[mesh.x_face(0, j)]);
  for (int i = 0; i < mesh.nx(); ++i)
    out += mesh.dx() * (flux_y[mesh.y_face(i, mesh.ny())] - flux_y[mesh.y_face(i, 0)]);
  return out;
}

GreySolution grey_meb_solve(const Discretization& disc, const MaterialModel& material,
                            const GreyMoments& previous, std::span<const double> previous_temperature,
                            const GreyCoefficients& coeffs, double dt,
                            std::span<const double> initial_energy) {
  const auto& mesh = disc.mesh();
  const int cells = mesh.cells();
  const double c = kSpeedOfLight;
  const double cv = material.heat_capacity();

  FluxSystem sys;
  sys.dt = dt;
  sys.fxx.resize(cells);
  sys.fyy.resize(cells);
  sys.fxy.resize(cells);
  for (int k = 0; k < cells; ++k) {
    sys.fxx[k] = coeffs.eddington[k].xx;
    sys.fyy[k] = coeffs.eddington[k].yy;
    sys.fxy[k] = coeffs.eddington[k].xy;
  }
  sys.opacity_x = coeffs.reference_x;
  sys.opacity_y = coeffs.reference_y;
  sys.drift_x = coeffs.drift_x;
  sys.drift_y = coeffs.drift_y;
  sys.previous_x = previous.flux_x;
  sys.previous_y = previous.flux_y;
  sys.boundary.resize(mesh.boundary_faces());
  for (Side side : kAllSides)
    for (int k = 0; k < mesh.side_length(side); ++k) {
      const int bf = mesh.boundary_face(side, k);
      sys.boundary[bf] = {coeffs.boundary[bf], disc.reflective(side)};
    }
  const FluxOperator op = build_fluxes(mesh, sys);

  // Linear part: E/dt + div F(E) = lin_rhs.
  BandMatrix lin = make_matrix(mesh);
  std::vector<double> lin_rhs(cells, 0.0);
  for (int k = 0; k < cells; ++k) lin.add(k, k, 1.0 / dt);
  assemble_divergence(mesh, op, lin, lin_rhs);

  GreySolution sol;
  std::vector<double> e(initial_energy.begin(), initial_energy.end());
  std::vector<double> t(cells), dtde(cells), residual(cells), step(cells), trial(cells);

  auto update_temperature = [&](const std::vector<double>& energy) {
    for (int k = 0; k < cells; ++k) {
      t[k] = meb_temperature(energy[k], previous_temperature[k], coeffs.kappa_e[k],
                             coeffs.kappa_b[k], cv, dt);
      const double t3 = t[k] * t[k] * t[k];
      dtde[k] = c * coeffs.kappa_e[k] / (4.0 * c * coeffs.kappa_b[k] * kRadiationConstant * t3 + cv / dt);
    }
  };
  auto feasible = [&](const std::vector<double>& energy) {
    for (int k = 0; k < cells; ++k)
      if (!(c * coeffs.kappa_e[k] * energy[k] + cv * previous_temperature[k] / dt > 0.0)) return false;
    return true;
  };

  constexpr int kMaxNewton = 60;
  bool converged = false;
  for (int it = 1; it <= kMaxNewton && !converged; ++it) {
    update_temperature(e);
    lin.multiply(e, residual);
    BandMatrix jac = lin;
    for (int k = 0; k < cells; ++k) {
      residual[k] += -lin_rhs[k] - previous.energy[k] / dt + cv * (t[k] - previous_temperature[k]) / dt;
      jac.add(k, k, cv * dtde[k] / dt);
      step[k] = -residual[k];
    }
    jac.solve(step);
    double damping = 1.0;
    for (int h = 0; h < 40; ++h) {
      for (int k = 0; k < cells; ++k) trial[k] = e[k] + damping * step[k];
      if (feasible(trial)) break;
      damping *= 0.5;
    }
    e = trial;
    sol.newton_iterations = it;
    converged = damping == 1.0 && norm2(step) <= 1e-13 * norm2(e);
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "grey_meb_solve: Newton did not converge in " << kMaxNewton
        << " iterations; |dE|/|E| = " << norm2(step) / norm2(e);
    throw SolverError(msg.str());
  }
  update_temperature(e);

  sol.grey = GreyMoments(mesh);
  sol.grey.energy = e;
  evaluate_fluxes(mesh, op, sys.boundary, e, sol.grey.flux_x, sol.grey.flux_y,
                  sol.grey.boundary_energy);
  sol.temperature = t;

  double change = 0.0, scale = 0.0;
  const double volume = mesh.cell_volume();
  for (int k = 0; k < cells; ++k) {
    change += volume * ((e[k] - previous.energy[k]) + cv * (t[k] - previous_temperature[k]));
    scale += volume * (e[k] + cv * t[k]);
  }
  const double outflow = dt * boundary_outflow(mesh, sol.grey.flux_x, sol.grey.flux_y);
  sol.energy_residual = std::abs(change + outflow) / scale;
  return sol;
}

LowOrderStepResult solve_low_order_step(const Discretization& disc, const MaterialModel& material,
                                        const LowOrderState& previous,
                                        const EddingtonClosure& closure,
                                        std::span<const double> temperature_guess, double dt,
                                        const InnerCriteria& criteria) {
  std::vector<double> t(temperature_guess.begin(), temperature_guess.end());
  std::vector<double> e_last, t_last;
  // Below this the changes are roundoff; a tolerance under it is met once
  // they stop shrinking.
  constexpr double kRoundoff = 64.0 * std::numeric_limits<double>::epsilon();
  double de_last = INFINITY, dt_last = INFINITY;
  LowOrderStepResult result;
  for (int s = 1; s <= criteria.max_iterations; ++s) {
    const GroupMaterialData data = evaluate_material(material, disc.groups(), t);
    GroupMoments group = mg_loqd_step(disc, previous.group, closure, data, dt);
    const GreyCoefficients coeffs =
        grey_coefficients(disc, group, data, closure, criteria.drift, t);
    const GreyMoments guess = sum_groups(group);
    GreySolution grey = grey_meb_solve(disc, material, previous.grey, previous.temperature, coeffs,
                                       dt, guess.energy);
    t = grey.temperature;
    result.inner_iterations = s;
    result.energy_residual = grey.energy_residual;
    bool converged = false;
    if (s >= 2) {
      const double de = diff_norm2(grey.grey.energy, e_last) / norm2(grey.grey.energy);
      const double dtt = diff_norm2(t, t_last) / norm2(t);
      converged = de <= criteria.tolerance && dtt <= criteria.tolerance;
      if (!converged && de <= kRoundoff && dtt <= kRoundoff)
        converged = de >= 0.5 * de_last && dtt >= 0.5 * dt_last;
      de_last = de;
      dt_last = dtt;
    }
    e_last = grey.grey.energy;
    t_last = t;
    result.state.group = std::move(group);
    result.state.grey = std::move(grey.grey);
    result.state.temperature = t;
    if (converged) return result;
  }
  std::ostringstream msg;
  msg << "solve_low_order_step: inner cycle did not converge in " << criteria.max_iterations
      << " iterations";
  throw SolverError(msg.str());
}

}  // namespace mlqd
