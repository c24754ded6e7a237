#include "catch_amalgamated.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "mlqd/loqd.hpp"
#include "properties.hpp"

using namespace mlqd;
using namespace mlqd::test;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double c = kSpeedOfLight;

// Every unknown of one group in a single dense system: E per cell, F per
// x- and y-face, E on boundary faces.
struct Monolithic {
  Eigen::VectorXd e, fx, fy, eb;
};

Monolithic monolithic_group(const Discretization& disc, const GroupMoments& prev,
                            const EddingtonClosure& cl, const GroupMaterialData& mat, double dt,
                            int g) {
  const auto& m = disc.mesh();
  const int nc = m.cells(), nxf = m.x_faces(), nyf = m.y_faces(), nb = m.boundary_faces();
  const int ox = nc, oy = nc + nxf, ob = nc + nxf + nyf, n = ob + nb;
  const double a = 1.0 / (c * dt);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  auto in = [&](int i, int j) { return i >= 0 && i < m.nx() && j >= 0 && j < m.ny(); };
  // c * (corner average of f_xy E) with the given sign into row r.
  auto corner = [&](int r, int ci, int cj, double coef) {
    std::vector<int> cells;
    for (int j = cj - 1; j <= cj; ++j)
      for (int i = ci - 1; i <= ci; ++i)
        if (in(i, j)) cells.push_back(m.cell(i, j));
    for (int k : cells) A(r, k) += coef * cl.at(g, k).xy / cells.size();
  };
  for (int j = 0; j < m.ny(); ++j)
    for (int i = 0; i < m.nx(); ++i) {
      const int k = m.cell(i, j);
      A(k, k) += 1.0 / dt + c * mat.kappa_at(g, k);
      A(k, ox + m.x_face(i + 1, j)) += 1.0 / m.dx();
      A(k, ox + m.x_face(i, j)) -= 1.0 / m.dx();
      A(k, oy + m.y_face(i, j + 1)) += 1.0 / m.dy();
      A(k, oy + m.y_face(i, j)) -= 1.0 / m.dy();
      rhs(k) = 4.0 * kPi * mat.kappa_at(g, k) * mat.planck_at(g, k) + prev.energy[g * nc + k] / dt;
    }
  auto boundary_rows = [&](int r_face, Side side, int kk, int cell, double h, double f_cell) {
    const int bf = m.boundary_face(side, kk);
    const double s = (side == Side::right || side == Side::top) ? 1.0 : -1.0;
    const int rb = ob + bf;
    if (disc.reflective(side)) {
      A(r_face, r_face) = 1.0;
      A(rb, rb) = 1.0;
      A(rb, cell) = -1.0;
      return;
    }
    const auto& b = cl.boundary_at(g, bf);
    A(r_face, r_face) += a + mat.kappa_at(g, cell);
    A(r_face, rb) += s * 2.0 * c / h * b.normal_eddington;
    A(r_face, cell) -= s * 2.0 * c / h * f_cell;
    // s F = C (c E_b - c E_in) + F_in
    A(rb, r_face) = s;
    A(rb, rb) = -b.conductance * c;
    rhs(rb) = -b.conductance * c * b.incoming_energy + b.incoming_flux;
  };
  for (int j = 0; j < m.ny(); ++j)
    for (int fi = 0; fi <= m.nx(); ++fi) {
      const int face = m.x_face(fi, j);
      const int r = ox + face;
      rhs(r) = a * prev.flux_x[g * nxf + face];
      if (!(fi == 0 || fi == m.nx()) || !disc.reflective(fi == 0 ? Side::left : Side::right)) {
        corner(r, fi, j + 1, c / m.dy());
        corner(r, fi, j, -c / m.dy());
      }
      if (fi == 0 || fi == m.nx()) {
        const Side side = fi == 0 ? Side::left : Side::right;
        const int cell = m.boundary_cell(side, j);
        if (disc.reflective(side)) rhs(r) = 0.0;
        boundary_rows(r, side, j, cell, m.dx(), cl.at(g, cell).xx);
        continue;
      }
      const int l = m.cell(fi - 1, j), rr = m.cell(fi, j);
      A(r, r) += a + 0.5 * (mat.kappa_at(g, l) + mat.kappa_at(g, rr));
      A(r, rr) += c * cl.at(g, rr).xx / m.dx();
      A(r, l) -= c * cl.at(g, l).xx / m.dx();
    }
  for (int fj = 0; fj <= m.ny(); ++fj)
    for (int i = 0; i < m.nx(); ++i) {
      const int face = m.y_face(i, fj);
      const int r = oy + face;
      rhs(r) = a * prev.flux_y[g * nyf + face];
      if (!(fj == 0 || fj == m.ny()) || !disc.reflective(fj == 0 ? Side::bottom : Side::top)) {
        corner(r, i + 1, fj, c / m.dx());
        corner(r, i, fj, -c / m.dx());
      }
      if (fj == 0 || fj == m.ny()) {
        const Side side = fj == 0 ? Side::bottom : Side::top;
        const int cell = m.boundary_cell(side, i);
        if (disc.reflective(side)) rhs(r) = 0.0;
        boundary_rows(r, side, i, cell, m.dy(), cl.at(g, cell).yy);
        continue;
      }
      const int b = m.cell(i, fj - 1), t = m.cell(i, fj);
      A(r, r) += a + 0.5 * (mat.kappa_at(g, b) + mat.kappa_at(g, t));
      A(r, t) += c * cl.at(g, t).yy / m.dy();
      A(r, b) -= c * cl.at(g, b).yy / m.dy();
    }
  const Eigen::VectorXd x = A.fullPivLu().solve(rhs);
  return {x.segment(0, nc), x.segment(ox, nxf), x.segment(oy, nyf), x.segment(ob, nb)};
}

double rel_diff(std::span<const double> a, const Eigen::VectorXd& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num += (a[k] - b(k)) * (a[k] - b(k));
    den += b(k) * b(k);
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

}  // namespace

TEST_CASE("one-cell group step equals the hand-eliminated two-unknown system") {
  BoundaryConditions bcs = all_sides(BoundaryKind::reflective);
  bcs[0] = {BoundaryKind::blackbody, 0.5};
  const auto disc = make_disc(1, 1, 0.8, 0.8, 1, {QuadratureSpec::Layout::product, 2, 2}, bcs);
  const auto closure = synthetic_closure(disc, true);
  const double kappa = 3.0, planck = 0.02, dt = 0.01, h = 0.8;
  const auto mat = constant_material(1, 1, kappa, planck);
  GroupMoments prev(disc.mesh(), 1);
  prev.energy[0] = 0.07;
  prev.flux_x[0] = -0.4;
  const auto out = mg_loqd_step(disc, prev, closure, mat, dt);

  // Unknowns E (cell) and F (left face); E_b eliminated through the boundary
  // condition -F = C (c E_b - c E_in) + F_in.
  const auto& b = closure.boundary_at(0, disc.mesh().boundary_face(Side::left, 0));
  const double fxx = closure.at(0, 0).xx;
  const double a = 1.0 / (c * dt);
  // Balance: (E - Ep)/dt - F/h + c k E = 4 pi k B
  const double a11 = 1.0 / dt + c * kappa, a12 = -1.0 / h;
  const double r1 = 4.0 * kPi * kappa * planck + prev.energy[0] / dt;
  // Half cell: (a + k) F + (2c/h)(fxx E - fnn E_b) = a Fp,
  // E_b = (-F - F_in)/(c C) + E_in
  const double a21 = 2.0 * c / h * fxx;
  const double a22 = a + kappa + 2.0 * c / h * b.normal_eddington / (c * b.conductance);
  const double r2 = a * prev.flux_x[0] + 2.0 * c / h * b.normal_eddington *
                                             (b.incoming_energy - b.incoming_flux / (c * b.conductance));
  const double det = a11 * a22 - a12 * a21;
  const double e = (r1 * a22 - a12 * r2) / det;
  const double f = (a11 * r2 - a21 * r1) / det;
  CHECK_THAT(out.energy[0], WithinRel(e, 1e-13));
  CHECK_THAT(out.flux_x[disc.mesh().x_face(0, 0)], WithinRel(f, 1e-12));
  CHECK(out.flux_x[disc.mesh().x_face(1, 0)] == 0.0);
  CHECK(out.flux_y[0] == 0.0);
  const double eb = (-f - b.incoming_flux) / (c * b.conductance) + b.incoming_energy;
  CHECK_THAT(out.boundary_energy[disc.mesh().boundary_face(Side::left, 0)], WithinRel(eb, 1e-12));
}

TEST_CASE("eliminated nine-point system matches the monolithic face-cell system") {
  SECTION("open boundaries") {
    BoundaryConditions bcs = all_sides(BoundaryKind::vacuum);
    bcs[0] = {BoundaryKind::blackbody, 1.0};
    const auto disc = make_disc(4, 4, 2.0, 1.6, 2, {QuadratureSpec::Layout::product, 2, 2}, bcs);
    const auto cl = synthetic_closure(disc, true);
    const auto mat = varied_material(2, 16);
    const auto prev = varied_previous(disc.mesh(), 2);
    const auto out = mg_loqd_step(disc, prev, cl, mat, 0.02);
    for (int g = 0; g < 2; ++g) {
      const auto ref = monolithic_group(disc, prev, cl, mat, 0.02, g);
      const auto& m = disc.mesh();
      CHECK(rel_diff({out.energy.data() + g * m.cells(), 16u}, ref.e) <= 1e-12);
      CHECK(rel_diff({out.flux_x.data() + g * m.x_faces(), static_cast<std::size_t>(m.x_faces())}, ref.fx) <= 1e-11);
      CHECK(rel_diff({out.flux_y.data() + g * m.y_faces(), static_cast<std::size_t>(m.y_faces())}, ref.fy) <= 1e-11);
      CHECK(rel_diff({out.boundary_energy.data() + g * m.boundary_faces(),
                      static_cast<std::size_t>(m.boundary_faces())},
                     ref.eb) <= 1e-11);
    }
  }
  SECTION("reflective sides") {
    BoundaryConditions bcs = all_sides(BoundaryKind::reflective);
    bcs[1] = {BoundaryKind::vacuum, 0.0};
    const auto disc = make_disc(3, 5, 1.5, 2.5, 1, {QuadratureSpec::Layout::product, 2, 2}, bcs);
    const auto cl = synthetic_closure(disc, true);
    const auto mat = varied_material(1, 15);
    const auto prev = varied_previous(disc.mesh(), 1);
    GroupMoments p = prev;
    for (int j = 0; j < 5; ++j) p.flux_x[disc.mesh().x_face(0, j)] = 0.0;
    for (int i = 0; i < 3; ++i) {
      p.flux_y[disc.mesh().y_face(i, 0)] = 0.0;
      p.flux_y[disc.mesh().y_face(i, 5)] = 0.0;
    }
    const auto out = mg_loqd_step(disc, p, cl, mat, 0.05);
    const auto ref = monolithic_group(disc, p, cl, mat, 0.05, 0);
    CHECK(rel_diff(out.energy, ref.e) <= 1e-12);
    CHECK(rel_diff(out.flux_x, ref.fx) <= 1e-11);
    CHECK(rel_diff(out.flux_y, ref.fy) <= 1e-11);
    CHECK(rel_diff(out.boundary_energy, ref.eb) <= 1e-11);
  }
}

TEST_CASE("isotropic closure in a uniform box keeps the equilibrium") {
  const auto disc = make_disc(3, 3, 1.0, 1.0, 3, {QuadratureSpec::Layout::product, 2, 2},
                              all_sides(BoundaryKind::reflective));
  const std::vector<double> t(9, 0.4);
  const auto state = equilibrium_state(disc, t);
  const MaterialModel mat(0.5917 * kRadiationConstant, FleckCummingsOpacity{});
  const auto data = evaluate_material(mat, disc.groups(), t);
  const auto out = mg_loqd_step(disc, state.group, isotropic_closure(disc), data, 0.02);
  for (std::size_t k = 0; k < out.energy.size(); ++k)
    CHECK_THAT(out.energy[k], WithinRel(state.group.energy[k], 1e-13));
  for (double f : out.flux_x) CHECK(std::abs(f) <= 1e-12);
}

TEST_CASE("grey coefficients reduce to the group values for one group") {
  BoundaryConditions bcs = all_sides(BoundaryKind::vacuum);
  bcs[0] = {BoundaryKind::blackbody, 1.0};
  const auto disc = make_disc(3, 3, 1.5, 1.5, 1, {QuadratureSpec::Layout::product, 2, 2}, bcs);
  const auto cl = synthetic_closure(disc, true);
  const auto mat = varied_material(1, 9);
  const auto out = mg_loqd_step(disc, varied_previous(disc.mesh(), 1), cl, mat, 0.02);
  const auto gc = grey_coefficients(disc, out, mat, cl);
  for (int k = 0; k < 9; ++k) {
    CHECK_THAT(gc.kappa_e[k], WithinRel(mat.kappa_at(0, k), 1e-15));
    CHECK_THAT(gc.kappa_b[k], WithinRel(mat.kappa_at(0, k), 1e-15));
    CHECK_THAT(gc.eddington[k].xx, WithinRel(cl.at(0, k).xx, 1e-15));
    CHECK_THAT(gc.eddington[k].xy, WithinRel(cl.at(0, k).xy, 1e-15));
  }
  for (double d : gc.drift_x) CHECK(std::abs(d) <= 1e-12);
  for (double d : gc.drift_y) CHECK(std::abs(d) <= 1e-12);
  for (int f = 0; f < disc.mesh().boundary_faces(); ++f) {
    CHECK_THAT(gc.boundary[f].conductance, WithinRel(cl.boundary_at(0, f).conductance, 1e-14));
    CHECK_THAT(gc.boundary[f].normal_eddington, WithinRel(cl.boundary_at(0, f).normal_eddington, 1e-14));
    CHECK_THAT(gc.boundary[f].incoming_energy, WithinRel(cl.boundary_at(0, f).incoming_energy, 1e-14));
  }
}

TEST_CASE("grey coefficients of identical groups carry no drift") {
  BoundaryConditions bcs = all_sides(BoundaryKind::vacuum);
  bcs[2] = {BoundaryKind::blackbody, 0.7};
  const auto disc = make_disc(3, 2, 1.5, 1.0, 3, {QuadratureSpec::Layout::product, 2, 2}, bcs);
  const auto base = synthetic_closure(disc, true);
  // Copy group 0 closure and opacity into every group.
  EddingtonClosure cl = base;
  GroupMaterialData mat = varied_material(3, 6);
  for (int g = 1; g < 3; ++g) {
    for (int k = 0; k < 6; ++k) {
      cl.tensor[g * 6 + k] = cl.tensor[k];
      mat.kappa[g * 6 + k] = mat.kappa[k];
      mat.planck[g * 6 + k] = mat.planck[k];
    }
    for (int f = 0; f < cl.faces; ++f) cl.boundary[g * cl.faces + f] = cl.boundary[f];
  }
  GroupMoments prev = varied_previous(disc.mesh(), 3);
  for (int g = 1; g < 3; ++g) {
    std::copy_n(prev.energy.begin(), 6, prev.energy.begin() + g * 6);
    std::copy_n(prev.flux_x.begin(), prev.x_faces, prev.flux_x.begin() + g * prev.x_faces);
    std::copy_n(prev.flux_y.begin(), prev.y_faces, prev.flux_y.begin() + g * prev.y_faces);
  }
  const auto out = mg_loqd_step(disc, prev, cl, mat, 0.02);
  const auto gc = grey_coefficients(disc, out, mat, cl);
  for (int k = 0; k < 6; ++k) {
    CHECK_THAT(gc.kappa_e[k], WithinRel(mat.kappa_at(0, k), 1e-14));
    CHECK_THAT(gc.eddington[k].yy, WithinRel(cl.at(0, k).yy, 1e-14));
  }
  for (double d : gc.drift_x) CHECK(std::abs(d) <= 1e-11);
  for (double d : gc.drift_y) CHECK(std::abs(d) <= 1e-11);
}

TEST_CASE("Rosseland drift reference keeps the grey equations consistent") {
  BoundaryConditions bcs = all_sides(BoundaryKind::vacuum);
  bcs[0] = {BoundaryKind::blackbody, 1.0};
  const auto disc = make_disc(4, 3, 2.0, 1.5, 4, {QuadratureSpec::Layout::product, 2, 2}, bcs);
  const MaterialModel mat(0.5917 * kRadiationConstant, FleckCummingsOpacity{});
  std::vector<double> t(12);
  for (int k = 0; k < 12; ++k) t[k] = 0.05 + 0.02 * k;
  const LowOrderState start = equilibrium_state(disc, t);
  const auto cl = synthetic_closure(disc, true);
  for (DriftReference ref : {DriftReference::flux_weighted, DriftReference::rosseland}) {
    InnerCriteria crit;
    crit.tolerance = 1e-13;
    crit.max_iterations = 1000;
    crit.drift = ref;
    const auto r = solve_low_order_step(disc, mat, start, cl, t, 0.02, crit);
    const auto sum = sum_groups(r.state.group);
    for (int k = 0; k < 12; ++k)
      CHECK_THAT(r.state.grey.energy[k], WithinRel(sum.energy[k], 1e-10));
    double num = 0.0, den = 0.0;
    for (std::size_t f = 0; f < sum.flux_x.size(); ++f) {
      num += std::pow(r.state.grey.flux_x[f] - sum.flux_x[f], 2);
      den += sum.flux_x[f] * sum.flux_x[f];
    }
    CHECK(std::sqrt(num / den) <= 1e-10);
    CHECK(r.energy_residual <= 1e-12);
  }
}

TEST_CASE("material temperature solves the local balance") {
  struct Case {
    double e, tp, ke, kb, cv, dt;
  };
  const std::vector<Case> cases = {
      {0.01, 1e-3, 1e5, 1e6, 0.008, 0.02},
      {1.0, 0.5, 10.0, 10.0, 0.008, 0.02},
      {1e-12, 1.0, 0.01, 0.01, 0.008, 0.02},
      {0.3, 0.1, 2.0, 0.0, 0.01, 0.1},
      {1e-20, 1e-3, 4e9, 4e9, 0.008, 0.02},
  };
  for (const auto& k : cases) {
    const double t = meb_temperature(k.e, k.tp, k.ke, k.kb, k.cv, k.dt);
    const double lhs = c * k.kb * kRadiationConstant * std::pow(t, 4) + k.cv / k.dt * t;
    const double rhs = c * k.ke * k.e + k.cv / k.dt * k.tp;
    CAPTURE(k.e, k.tp, k.ke, k.kb);
    CHECK(t > 0.0);
    CHECK_THAT(lhs, WithinRel(rhs, 1e-14));
  }
  CHECK_THROWS_AS(meb_temperature(-1.0, 1e-3, 1.0, 1.0, 0.008, 0.02), SolverError);
}

TEST_CASE("zero-dimensional relaxation matches the scalar two-unknown oracle") {
  const auto disc = make_disc(1, 1, 1.0, 1.0, 4, {QuadratureSpec::Layout::product, 1, 1},
                              all_sides(BoundaryKind::reflective));
  const double kappa = 5.0, cv = 0.5917 * kRadiationConstant, dt = 0.02;
  const MaterialModel mat(cv, ConstantOpacity{kappa});
  // Cold matter under hot radiation.
  LowOrderState state = equilibrium_state(disc, std::vector<double>{0.8});
  state.temperature = {0.01};
  double e = state.grey.energy[0], t = 0.01;
  InnerCriteria crit;
  crit.tolerance = 1e-15;
  for (int n = 0; n < 20; ++n) {
    const auto r = solve_low_order_step(disc, mat, state, isotropic_closure(disc), state.temperature, dt, crit);
    std::tie(e, t) = scalar_relaxation(e, t, kappa, cv, dt);
    CAPTURE(n);
    CHECK_THAT(r.state.grey.energy[0], WithinRel(e, 1e-10));
    CHECK_THAT(r.state.temperature[0], WithinRel(t, 1e-10));
    state = r.state;
  }
  // Approaches equilibrium aT^4 = E.
  CHECK_THAT(kRadiationConstant * std::pow(t, 4), WithinRel(e, 1e-3));
}

TEST_CASE("low-order step conserves energy with open boundaries") {
  BoundaryConditions bcs = all_sides(BoundaryKind::vacuum);
  bcs[0] = {BoundaryKind::blackbody, 1.0};
  const auto disc = make_disc(5, 5, 6.0, 6.0, 6, {QuadratureSpec::Layout::product, 2, 2}, bcs);
  const MaterialModel mat(0.5917 * kRadiationConstant, FleckCummingsOpacity{});
  const std::vector<double> t(25, 1e-3);
  LowOrderState state = equilibrium_state(disc, t);
  InnerCriteria crit;
  crit.tolerance = 1e-14;
  crit.max_iterations = 1000;
  for (int n = 0; n < 5; ++n) {
    const auto r = solve_low_order_step(disc, mat, state, isotropic_closure(disc), state.temperature, 0.02, crit);
    CHECK(r.energy_residual <= 1e-12);
    for (double e : r.state.grey.energy) CHECK(e > 0.0);
    for (double e : r.state.group.energy) CHECK(e >= 0.0);
    state = r.state;
  }
  CHECK(state.temperature[0] > state.temperature[4]);
}

TEST_CASE("boundary outflow sums the face fluxes") {
  const SpatialMesh mesh(2, 1, 2.0, 3.0);
  std::vector<double> fx = {-1.0, 5.0, 2.0};
  std::vector<double> fy = {0.5, -0.25, 1.0, 3.0};
  // dy * (F_right - F_left) + dx * (F_top - F_bottom) summed over the sides.
  CHECK_THAT(boundary_outflow(mesh, fx, fy), WithinRel(3.0 * (2.0 + 1.0) + 1.0 * (1.0 - 0.5 + 3.0 + 0.25), 1e-15));
}

TEST_CASE("non-positive group energy is reported") {
  const auto disc = make_disc(2, 1, 1.0, 1.0, 2, {QuadratureSpec::Layout::product, 1, 1},
                              all_sides(BoundaryKind::vacuum));
  GroupMoments g(disc.mesh(), 2);
  const auto mat = constant_material(2, 2, 1.0, 0.1);
  CHECK_THROWS_AS(grey_coefficients(disc, g, mat, isotropic_closure(disc)), SolverError);
}
