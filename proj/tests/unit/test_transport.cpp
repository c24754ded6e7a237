#include "catch_amalgamated.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "mlqd/transport.hpp"

using namespace mlqd;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

// Exact solution of mu dpsi/dx + eta dpsi/dy + sigma psi = q in [0,dx]x[0,dy]
// for mu, eta > 0 with constant inflow on the left and bottom faces.
struct ExactCell {
  double in_x, in_y, sigma, q, mu, eta, dx, dy;

  double psi(double x, double y) const {
    const double sx = x / mu;
    const double sy = y / eta;
    const double s = std::min(sx, sy);
    const double in = sx <= sy ? in_x : in_y;
    const double a = std::exp(-sigma * s);
    return in * a + q / sigma * (1.0 - a);
  }

  template <class F>
  static double integrate(F f, double a, double b, double split) {
    using boost::math::quadrature::gauss_kronrod;
    if (split <= a || split >= b) return gauss_kronrod<double, 31>::integrate(f, a, b, 10, 1e-14);
    return gauss_kronrod<double, 31>::integrate(f, a, split, 10, 1e-14) +
           gauss_kronrod<double, 31>::integrate(f, split, b, 10, 1e-14);
  }

  double out_x() const {
    return integrate([&](double y) { return psi(dx, y); }, 0.0, dy, dx * eta / mu) / dy;
  }
  double out_y() const {
    return integrate([&](double x) { return psi(x, dy); }, 0.0, dx, dy * mu / eta) / dx;
  }
  double average() const {
    auto column = [&](double x) {
      return integrate([&](double y) { return psi(x, y); }, 0.0, dy, x * eta / mu);
    };
    return integrate(column, 0.0, dx, dy * mu / eta) / (dx * dy);
  }
};

Discretization make_disc(int nx, int ny, double lx, double ly, int groups, QuadratureSpec q,
                         BoundaryConditions bcs) {
  return Discretization(SpatialMesh(nx, ny, lx, ly), build_quadrature(q),
                        FrequencyGroups::log_spaced(groups, 1e-2, 1e2), bcs);
}

BoundaryConditions all(BoundaryKind kind, double t = 0.0) {
  BoundaryConditions b;
  b.fill({kind, t});
  return b;
}

GroupMaterialData constant_material(int groups, int cells, double kappa, double planck) {
  GroupMaterialData d;
  d.groups = groups;
  d.cells = cells;
  d.kappa.assign(static_cast<std::size_t>(groups) * cells, kappa);
  d.planck.assign(d.kappa.size(), planck);
  return d;
}

}  // namespace

TEST_CASE("step-characteristics cell solve matches the exact characteristic solution") {
  struct Case {
    double in_x, in_y, sigma, q, mu, eta, dx, dy;
  };
  const std::vector<Case> cases = {
      {1.0, 0.2, 1.0, 0.3, 0.8, 0.3, 1.0, 1.0},     // x-primary
      {0.1, 2.0, 4.0, 1.0, 0.2, 0.9, 1.0, 1.0},     // y-primary
      {0.0, 0.0, 50.0, 5.0, 0.5, 0.5, 0.75, 0.75},  // optically thick, equal split
      {3.0, 1.0, 1e-4, 0.0, 0.3, 0.6, 2.0, 0.5},    // nearly transparent
      {0.5, 0.5, 0.7, 0.0, 0.9, 0.1, 0.3, 1.7},
  };
  for (const auto& k : cases) {
    CAPTURE(k.sigma, k.mu, k.eta, k.dx, k.dy);
    const ExactCell exact{k.in_x, k.in_y, k.sigma, k.q, k.mu, k.eta, k.dx, k.dy};
    const auto sol = step_characteristic_cell(k.in_x, k.in_y, k.sigma, k.q, k.mu, k.eta, k.dx, k.dy);
    CHECK_THAT(sol.out_x, WithinRel(exact.out_x(), 1e-11) || WithinAbs(exact.out_x(), 1e-14));
    CHECK_THAT(sol.out_y, WithinRel(exact.out_y(), 1e-11) || WithinAbs(exact.out_y(), 1e-14));
    CHECK_THAT(sol.average, WithinRel(exact.average(), 1e-10));
  }
}

TEST_CASE("cell solve balances streaming, removal and source and stays positive") {
  for (double sigma : {1e-8, 1e-3, 0.5, 3.0, 80.0, 1e4}) {
    for (double mu : {0.05, 0.4, 0.95}) {
      const double eta = std::sqrt(1.0 - mu * mu) * 0.8;
      const double in_x = 0.7, in_y = 1.3, q = 0.4, dx = 0.6, dy = 0.9;
      const auto s = step_characteristic_cell(in_x, in_y, sigma, q, mu, eta, dx, dy);
      CAPTURE(sigma, mu);
      const double streaming = mu * (s.out_x - in_x) / dx + eta * (s.out_y - in_y) / dy;
      CHECK_THAT(streaming + sigma * s.average, WithinRel(q, 1e-9) || WithinAbs(q, 1e-12));
      CHECK(s.out_x > 0.0);
      CHECK(s.out_y > 0.0);
      CHECK(s.average > 0.0);
    }
  }
  // Inflow at the asymptote is a fixed point.
  const auto eq = step_characteristic_cell(2.0, 2.0, 3.0, 6.0, 0.3, 0.7, 1.0, 1.0);
  CHECK_THAT(eq.out_x, WithinRel(2.0, 1e-14));
  CHECK_THAT(eq.out_y, WithinRel(2.0, 1e-14));
  CHECK_THAT(eq.average, WithinRel(2.0, 1e-14));
}

TEST_CASE("reflective box reduces the sweep to the scalar backward-Euler update") {
  const auto disc = make_disc(3, 2, 1.0, 1.0, 2, {QuadratureSpec::Layout::product, 2, 2},
                              all(BoundaryKind::reflective));
  const int cells = disc.mesh().cells();
  const double dt = 0.01, kappa = 2.5, planck = 0.8, i0 = 0.1;
  AngularIntensity prev(2, disc.quadrature().size(), cells);
  std::fill(prev.values.begin(), prev.values.end(), i0);
  const auto material = constant_material(2, cells, kappa, planck);
  const auto sweep = sweep_step(disc, prev, material, dt);
  const double a = 1.0 / (kSpeedOfLight * dt);
  const double expected = (kappa * planck + a * i0) / (kappa + a);
  for (double v : sweep.intensity.values) CHECK_THAT(v, WithinRel(expected, 1e-13));
}

TEST_CASE("swept intensities satisfy the discrete group balance") {
  BoundaryConditions bcs = all(BoundaryKind::vacuum);
  bcs[0] = {BoundaryKind::blackbody, 1.0};
  const auto disc = make_disc(5, 4, 2.0, 1.5, 3, {QuadratureSpec::Layout::product, 3, 3}, bcs);
  const auto& mesh = disc.mesh();
  const int cells = mesh.cells();
  std::vector<double> t(cells);
  for (int c = 0; c < cells; ++c) t[c] = 0.05 + 0.01 * c;
  const MaterialModel mat(0.5917 * kRadiationConstant, FleckCummingsOpacity{27.0});
  const auto data = evaluate_material(mat, disc.groups(), t);
  const auto prev = isotropic_planck(disc, std::vector<double>(cells, 0.02));
  const double dt = 0.02;
  SweepOptions opts;
  opts.face_fluxes = true;
  const auto sweep = sweep_step(disc, prev, data, dt, opts);
  const auto now = moments(disc, sweep.intensity);
  const auto before = moments(disc, prev);
  for (int g = 0; g < 3; ++g)
    for (int j = 0; j < mesh.ny(); ++j)
      for (int i = 0; i < mesh.nx(); ++i) {
        const int c = mesh.cell(i, j);
        const double e = now.energy[g * cells + c];
        const double div =
            (sweep.face_flux_x[g * mesh.x_faces() + mesh.x_face(i + 1, j)] -
             sweep.face_flux_x[g * mesh.x_faces() + mesh.x_face(i, j)]) / mesh.dx() +
            (sweep.face_flux_y[g * mesh.y_faces() + mesh.y_face(i, j + 1)] -
             sweep.face_flux_y[g * mesh.y_faces() + mesh.y_face(i, j)]) / mesh.dy();
        const double lhs = (e - before.energy[g * cells + c]) / dt + div +
                           kSpeedOfLight * data.kappa_at(g, c) * e;
        const double rhs = 4.0 * kPi * data.kappa_at(g, c) * data.planck_at(g, c);
        const double scale = std::abs(rhs) + std::abs(e / dt) + kSpeedOfLight * data.kappa_at(g, c) * e;
        CAPTURE(g, i, j);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * scale);
      }
  for (double v : sweep.intensity.values) CHECK(v >= 0.0);
}

TEST_CASE("streaming output reproduces the step update") {
  const auto disc = make_disc(4, 4, 1.0, 1.0, 2, {QuadratureSpec::Layout::product, 2, 3},
                              all(BoundaryKind::blackbody, 0.3));
  const int cells = disc.mesh().cells();
  const auto data = constant_material(2, cells, 1.7, 0.02);
  const auto prev = isotropic_planck(disc, std::vector<double>(cells, 0.05));
  const double dt = 0.05;
  SweepOptions opts;
  opts.streaming = true;
  const auto sweep = sweep_step(disc, prev, data, dt, opts);
  const double tau = kSpeedOfLight * dt;
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < sweep.intensity.values.size(); ++k) {
    const double i = sweep.intensity.values[k];
    const double h = 1.7 * 0.02 - sweep.streaming[k] - 1.7 * i;
    const double r = i - prev.values[k] - tau * h;
    num += r * r;
    den += i * i;
  }
  CHECK(std::sqrt(num / den) <= 1e-12);
}

TEST_CASE("isotropic fields have the diagonal one-third Eddington tensor") {
  BoundaryConditions bcs = all(BoundaryKind::blackbody, 0.5);
  const auto disc = make_disc(3, 3, 1.0, 1.0, 2, {QuadratureSpec::Layout::product, 3, 12}, bcs);
  const int cells = disc.mesh().cells();
  // Equilibrium with the boundary: every direction carries B_g(0.5).
  const auto data = evaluate_material(MaterialModel(1.0, ConstantOpacity{1.0}), disc.groups(),
                                      std::vector<double>(cells, 0.5));
  const auto prev = isotropic_planck(disc, std::vector<double>(cells, 0.5));
  const auto sweep = sweep_step(disc, prev, data, 0.01);
  const auto closure = eddington_tensor(disc, sweep);
  const auto iso = isotropic_closure(disc);
  CHECK(closure.degenerate_cells == 0);
  for (int g = 0; g < 2; ++g) {
    for (int c = 0; c < cells; ++c) {
      const auto& f = closure.at(g, c);
      CHECK_THAT(f.xx, WithinRel(1.0 / 3.0, 1e-12));
      CHECK_THAT(f.yy, WithinRel(1.0 / 3.0, 1e-12));
      CHECK_THAT(f.zz, WithinRel(1.0 / 3.0, 1e-12));
      CHECK_THAT(f.xy, WithinAbs(0.0, 1e-13));
    }
    for (int f = 0; f < disc.mesh().boundary_faces(); ++f) {
      const auto& b = closure.boundary_at(g, f);
      const auto& bi = iso.boundary_at(g, f);
      CHECK_THAT(b.normal_eddington, WithinRel(1.0 / 3.0, 1e-12));
      CHECK_THAT(b.conductance, WithinRel(bi.conductance, 1e-12));
      CHECK_THAT(b.incoming_energy, WithinRel(bi.incoming_energy, 1e-12));
      CHECK_THAT(b.incoming_flux, WithinRel(bi.incoming_flux, 1e-12));
      // Half-range sums of an isotropic blackbody field.
      const double bg = planck_group(0.5, g, disc.groups());
      CHECK_THAT(b.incoming_energy, WithinRel(2.0 * kPi * bg / kSpeedOfLight, 1e-13));
      CHECK(b.incoming_flux < 0.0);
    }
  }
}

TEST_CASE("Eddington tensor of an arbitrary field has unit trace") {
  const auto disc = make_disc(2, 2, 1.0, 1.0, 1, {QuadratureSpec::Layout::product, 3, 3},
                              all(BoundaryKind::vacuum));
  AngularIntensity field(1, disc.quadrature().size(), 4);
  for (std::size_t k = 0; k < field.values.size(); ++k) field.values[k] = 1.0 + std::sin(0.7 * k);
  BoundaryIntensity boundary{1, disc.quadrature().size(), 8,
                             std::vector<double>(static_cast<std::size_t>(disc.quadrature().size()) * 8, 1.0)};
  const auto closure = eddington_tensor(disc, field, boundary);
  for (int c = 0; c < 4; ++c) {
    const auto& f = closure.at(0, c);
    CHECK_THAT(f.xx + f.yy + f.zz, WithinRel(1.0, 1e-14));
    CHECK(f.xy * f.xy <= f.xx * f.yy);
  }
}

TEST_CASE("vanishing intensity falls back to the isotropic tensor and is counted") {
  const auto disc = make_disc(2, 1, 1.0, 1.0, 1, {QuadratureSpec::Layout::product, 1, 1},
                              all(BoundaryKind::vacuum));
  AngularIntensity field(1, 4, 2);
  for (int m = 0; m < 4; ++m) field.at(0, m, 1) = 1.0 + m;
  BoundaryIntensity boundary{1, 4, 6, std::vector<double>(24, 0.0)};
  const auto closure = eddington_tensor(disc, field, boundary);
  CHECK(closure.degenerate_cells == 1);
  CHECK(closure.at(0, 0).xx == 1.0 / 3.0);
  CHECK(closure.at(0, 0).xy == 0.0);
  CHECK(closure.at(0, 1).xy != 0.0);
}

TEST_CASE("moments of an isotropic Planck field") {
  const auto disc = make_disc(2, 2, 1.0, 1.0, 4, {QuadratureSpec::Layout::product, 3, 12},
                              all(BoundaryKind::vacuum));
  const std::vector<double> t = {0.1, 0.2, 0.3, 0.4};
  const auto m = moments(disc, isotropic_planck(disc, t));
  for (int g = 0; g < 4; ++g)
    for (int c = 0; c < 4; ++c) {
      CHECK_THAT(m.energy[g * 4 + c],
                 WithinRel(4.0 * kPi * planck_group(t[c], g, disc.groups()) / kSpeedOfLight, 1e-14));
      CHECK_THAT(m.flux_x[g * 4 + c], WithinAbs(0.0, 1e-12 * m.energy[g * 4 + c]));
    }
}
