#include "mlqd/transport.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mlqd {

AngularIntensity::AngularIntensity(int groups, int directions, int cells)
    : groups(groups),
      directions(directions),
      cells(cells),
      values(static_cast<std::size_t>(groups) * directions * cells, 0.0) {}

AngularIntensity isotropic_planck(const Discretization& disc, std::span<const double> temperature) {
  const int groups = disc.groups().count();
  const int dirs = disc.quadrature().size();
  const int cells = disc.mesh().cells();
  if (static_cast<int>(temperature.size()) != cells)
    throw std::invalid_argument("isotropic_planck: temperature size mismatch");
  AngularIntensity out(groups, dirs, cells);
  for (int g = 0; g < groups; ++g)
    for (int c = 0; c < cells; ++c) {
      const double b = planck_group(temperature[c], g, disc.groups());
      for (int m = 0; m < dirs; ++m) out.at(g, m, c) = b;
    }
  return out;
}

namespace {

// (1 - e^{-t}) / t
double escape_fraction(double t) {
  if (t < 1e-8) return 1.0 - 0.5 * t;
  return -std::expm1(-t) / t;
}

// 1 - (1 - e^{-t}) / t
double retained_fraction(double t) {
  if (t < 1e-4) return t * (0.5 - t * (1.0 / 6.0 - t / 24.0));
  return (t + std::expm1(-t)) / t;
}

// Power series sum_{k>=1} (-1)^(k+1) t^(k-1) a_k / (k+1)! with a_k = k - shift.
double alternating_series(double t, int shift) {
  double sum = 0.0, power = 1.0, factorial = 2.0;
  for (int k = 1; k <= 14; ++k) {
    sum += ((k & 1) ? 1.0 : -1.0) * power * (k - shift) / factorial;
    power *= t;
    factorial *= k + 2;
  }
  return sum;
}

// ((1 - e^{-t})/t - e^{-t}) / t
double escape_excess(double t) {
  if (t < 0.1) return alternating_series(t, 0);
  return (escape_fraction(t) - std::exp(-t)) / t;
}

// escape_excess(t) - retained_fraction(t) / t, which is O(t).
double excess_gap(double t) {
  if (t < 0.1) return alternating_series(t, 1);
  return (2.0 * escape_fraction(t) - 1.0 - std::exp(-t)) / t;
}

}  // namespace

CellSolution step_characteristic_cell(double in_x, double in_y, double sigma, double source,
                                      double abs_mu, double abs_eta, double dx, double dy) {
  const double asymptote = source / sigma;
  // Characteristics entering through the "primary" face reach the opposite
  // face of the same orientation; the others cross from the secondary face.
  const bool x_primary = dx * abs_eta <= dy * abs_mu;
  const double primary_in = x_primary ? in_x : in_y;
  const double secondary_in = x_primary ? in_y : in_x;
  const double tau = x_primary ? sigma * dx / abs_mu : sigma * dy / abs_eta;
  const double ratio = x_primary ? dx * abs_eta / (dy * abs_mu) : dy * abs_mu / (dx * abs_eta);

  const double transmit = std::exp(-tau);
  const double escape = escape_fraction(tau);
  const double retained = retained_fraction(tau);

  // Exiting averages as convex combinations of the inflow and the asymptote.
  const double w_primary = (1.0 - ratio) * transmit;
  const double w_secondary = ratio * escape;
  const double w_asym = (1.0 - ratio) * -std::expm1(-tau) + ratio * retained;
  const double out_primary = w_primary * primary_in + w_secondary * secondary_in + w_asym * asymptote;
  const double out_secondary = escape * primary_in + retained * asymptote;

  // Cell-average weights; the asymptote weight is formed directly because it
  // is O(tau) and multiplies q / sigma.
  const double avg_primary = escape - ratio * escape_excess(tau);
  const double avg_secondary = ratio * (escape_excess(tau) - excess_gap(tau));
  const double avg_asym = std::max(0.0, retained + ratio * excess_gap(tau));
  const double average =
      avg_primary * primary_in + avg_secondary * secondary_in + avg_asym * asymptote;

  if (x_primary) return {out_primary, out_secondary, average};
  return {out_secondary, out_primary, average};
}

SweepResult sweep_step(const Discretization& disc, const AngularIntensity& previous,
                       const GroupMaterialData& material, double dt, const SweepOptions& options) {
  const auto& mesh = disc.mesh();
  const auto& quad = disc.quadrature();
  const int groups = disc.groups().count();
  const int dirs = quad.size();
  const int cells = mesh.cells();
  const int nbf = mesh.boundary_faces();
  const int nx = mesh.nx();
  const int ny = mesh.ny();
  const double dx = mesh.dx();
  const double dy = mesh.dy();
  if (previous.groups != groups || previous.directions != dirs || previous.cells != cells)
    throw std::invalid_argument("sweep_step: intensity layout mismatch");
  if (material.groups != groups || material.cells != cells)
    throw std::invalid_argument("sweep_step: material layout mismatch");
  if (!(dt > 0.0)) throw std::invalid_argument("sweep_step: dt must be > 0");

  const double time_absorption = 1.0 / (kSpeedOfLight * dt);
  const bool any_reflective =
      std::any_of(kAllSides.begin(), kAllSides.end(), [&](Side s) { return disc.reflective(s); });

  SweepResult result;
  result.intensity = AngularIntensity(groups, dirs, cells);
  result.boundary = {groups, dirs, nbf, std::vector<double>(static_cast<std::size_t>(groups) * dirs * nbf)};
  if (options.streaming) result.streaming.assign(result.intensity.values.size(), 0.0);
  if (options.face_fluxes) {
    result.face_flux_x.assign(static_cast<std::size_t>(groups) * mesh.x_faces(), 0.0);
    result.face_flux_y.assign(static_cast<std::size_t>(groups) * mesh.y_faces(), 0.0);
  }

  std::vector<double> sigma(cells), emission(cells);
  std::vector<double> inflow(static_cast<std::size_t>(dirs) * nbf, 0.0);
  std::vector<double> outflow(static_cast<std::size_t>(dirs) * nbf, 0.0);
  std::vector<double> y_in(nx);

  auto incoming_to = [&](Side side, const Direction& d) {
    const Normal n = outward_normal(side);
    return d.mu * n.x + d.eta * n.y < 0.0;
  };

  for (int g = 0; g < groups; ++g) {
    for (int c = 0; c < cells; ++c) {
      sigma[c] = material.kappa_at(g, c) + time_absorption;
      emission[c] = material.kappa_at(g, c) * material.planck_at(g, c);
    }
    for (Side side : kAllSides) {
      for (int k = 0; k < mesh.side_length(side); ++k) {
        const int f = mesh.boundary_face(side, k);
        const int c = mesh.boundary_cell(side, k);
        for (int m = 0; m < dirs; ++m) {
          if (!incoming_to(side, quad[m])) continue;
          inflow[m * nbf + f] = disc.reflective(side) ? previous.at(g, m, c)
                                                      : disc.incident_intensity(g, side);
        }
      }
    }

    for (int pass = 0;; ++pass) {
      double* fx = options.face_fluxes ? &result.face_flux_x[g * mesh.x_faces()] : nullptr;
      double* fy = options.face_fluxes ? &result.face_flux_y[g * mesh.y_faces()] : nullptr;
      if (fx) {
        std::fill(fx, fx + mesh.x_faces(), 0.0);
        std::fill(fy, fy + mesh.y_faces(), 0.0);
      }

      for (int m = 0; m < dirs; ++m) {
        const Direction& d = quad[m];
        const bool px = d.mu > 0.0;
        const bool py = d.eta > 0.0;
        const double amu = std::abs(d.mu);
        const double aeta = std::abs(d.eta);
        const double* in_b = &inflow[static_cast<std::size_t>(m) * nbf];
        double* out_b = &outflow[static_cast<std::size_t>(m) * nbf];

        for (int i = 0; i < nx; ++i) {
          const int f = mesh.boundary_face(py ? Side::bottom : Side::top, i);
          y_in[i] = in_b[f];
          if (fy) fy[mesh.y_face(i, py ? 0 : ny)] += d.weight * d.eta * y_in[i];
        }
        for (int jj = 0; jj < ny; ++jj) {
          const int j = py ? jj : ny - 1 - jj;
          double x_in = in_b[mesh.boundary_face(px ? Side::left : Side::right, j)];
          if (fx) fx[mesh.x_face(px ? 0 : nx, j)] += d.weight * d.mu * x_in;
          for (int ii = 0; ii < nx; ++ii) {
            const int i = px ? ii : nx - 1 - ii;
            const int c = mesh.cell(i, j);
            const double q = emission[c] + time_absorption * previous.at(g, m, c);
            const auto sol = step_characteristic_cell(x_in, y_in[i], sigma[c], q, amu, aeta, dx, dy);
            result.intensity.at(g, m, c) = sol.average;
            if (options.streaming)
              result.streaming[result.intensity.index(g, m, c)] =
                  amu * (sol.out_x - x_in) / dx + aeta * (sol.out_y - y_in[i]) / dy;
            if (fx) {
              fx[mesh.x_face(px ? i + 1 : i, j)] += d.weight * d.mu * sol.out_x;
              fy[mesh.y_face(i, py ? j + 1 : j)] += d.weight * d.eta * sol.out_y;
            }
            x_in = sol.out_x;
            y_in[i] = sol.out_y;
          }
          out_b[mesh.boundary_face(px ? Side::right : Side::left, j)] = x_in;
        }
        for (int i = 0; i < nx; ++i) out_b[mesh.boundary_face(py ? Side::top : Side::bottom, i)] = y_in[i];
      }

      if (!any_reflective) break;
      double change = 0.0;
      double scale = 0.0;
      for (Side side : kAllSides) {
        if (!disc.reflective(side)) continue;
        const bool x_side = side == Side::left || side == Side::right;
        for (int k = 0; k < mesh.side_length(side); ++k) {
          const int f = mesh.boundary_face(side, k);
          for (int m = 0; m < dirs; ++m) {
            if (!incoming_to(side, quad[m])) continue;
            const int mirror = x_side ? quad.reflect_x(m) : quad.reflect_y(m);
            const double updated = outflow[static_cast<std::size_t>(mirror) * nbf + f];
            double& slot = inflow[static_cast<std::size_t>(m) * nbf + f];
            change = std::max(change, std::abs(updated - slot));
            scale = std::max(scale, std::abs(updated));
            slot = updated;
          }
        }
      }
      if (change <= options.reflection_tolerance * scale) break;
      if (pass + 1 >= options.max_reflection_sweeps)
        throw std::runtime_error("sweep_step: reflective boundary iteration did not converge");
    }

    for (Side side : kAllSides) {
      for (int k = 0; k < mesh.side_length(side); ++k) {
        const int f = mesh.boundary_face(side, k);
        for (int m = 0; m < dirs; ++m) {
          const std::size_t slot = static_cast<std::size_t>(m) * nbf + f;
          result.boundary.values[result.boundary.index(g, m, f)] =
              incoming_to(side, quad[m]) ? inflow[slot] : outflow[slot];
        }
      }
    }
  }
  return result;
}

namespace {

constexpr double kDenominatorFloor = 1e-300;

BoundaryFactors isotropic_factors(const Discretization& disc, int g, Side side) {
  const Normal n = outward_normal(side);
  double out_w = 0.0, out_wn = 0.0, in_w = 0.0, in_wn = 0.0;
  for (const auto& d : disc.quadrature().directions()) {
    const double on = d.mu * n.x + d.eta * n.y;
    if (on > 0.0) {
      out_w += d.weight;
      out_wn += d.weight * on;
    } else {
      in_w += d.weight;
      in_wn += d.weight * on;
    }
  }
  BoundaryFactors f;
  f.normal_eddington = 1.0 / 3.0;
  f.conductance = out_wn / out_w;
  const double incident = disc.incident_intensity(g, side);
  f.incoming_energy = incident * in_w / kSpeedOfLight;
  f.incoming_flux = incident * in_wn;
  return f;
}

}  // namespace

EddingtonClosure isotropic_closure(const Discretization& disc) {
  const auto& mesh = disc.mesh();
  EddingtonClosure closure;
  closure.groups = disc.groups().count();
  closure.cells = mesh.cells();
  closure.faces = mesh.boundary_faces();
  closure.tensor.assign(static_cast<std::size_t>(closure.groups) * closure.cells, EddingtonTensor{});
  closure.boundary.resize(static_cast<std::size_t>(closure.groups) * closure.faces);
  for (int g = 0; g < closure.groups; ++g)
    for (Side side : kAllSides)
      for (int k = 0; k < mesh.side_length(side); ++k)
        closure.boundary[g * closure.faces + mesh.boundary_face(side, k)] =
            isotropic_factors(disc, g, side);
  return closure;
}

EddingtonClosure eddington_tensor(const Discretization& disc, const SweepResult& sweep) {
  return eddington_tensor(disc, sweep.intensity, sweep.boundary);
}

EddingtonClosure eddington_tensor(const Discretization& disc, const AngularIntensity& intensity,
                                  const BoundaryIntensity& boundary) {
  const auto& mesh = disc.mesh();
  const auto& quad = disc.quadrature();
  EddingtonClosure closure = isotropic_closure(disc);
  for (int g = 0; g < closure.groups; ++g) {
    for (int c = 0; c < closure.cells; ++c) {
      double s0 = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0, szz = 0.0;
      for (int m = 0; m < quad.size(); ++m) {
        const auto& d = quad[m];
        const double wi = d.weight * intensity.at(g, m, c);
        s0 += wi;
        sxx += wi * d.mu * d.mu;
        syy += wi * d.eta * d.eta;
        sxy += wi * d.mu * d.eta;
        szz += wi * d.xi * d.xi;
      }
      auto& t = closure.tensor[g * closure.cells + c];
      if (s0 < kDenominatorFloor) {
        ++closure.degenerate_cells;
        continue;
      }
      t = {sxx / s0, syy / s0, sxy / s0, szz / s0};
    }
    for (Side side : kAllSides) {
      const Normal n = outward_normal(side);
      for (int k = 0; k < mesh.side_length(side); ++k) {
        const int f = mesh.boundary_face(side, k);
        auto& bf = closure.boundary[g * closure.faces + f];
        double out_w = 0.0, out_wn = 0.0, all_w = 0.0, all_wnn = 0.0, in_w = 0.0, in_wn = 0.0;
        for (int m = 0; m < quad.size(); ++m) {
          const auto& d = quad[m];
          const double on = d.mu * n.x + d.eta * n.y;
          const double wi = d.weight * boundary.at(g, m, f);
          all_w += wi;
          all_wnn += wi * on * on;
          if (on > 0.0) {
            out_w += wi;
            out_wn += wi * on;
          } else {
            in_w += wi;
            in_wn += wi * on;
          }
        }
        if (all_w >= kDenominatorFloor) bf.normal_eddington = all_wnn / all_w;
        if (out_w >= kDenominatorFloor) bf.conductance = out_wn / out_w;
        bf.incoming_energy = in_w / kSpeedOfLight;
        bf.incoming_flux = in_wn;
      }
    }
  }
  return closure;
}

CellMoments moments(const Discretization& disc, const AngularIntensity& intensity) {
  const auto& quad = disc.quadrature();
  CellMoments out;
  out.groups = intensity.groups;
  out.cells = intensity.cells;
  const std::size_t n = static_cast<std::size_t>(out.groups) * out.cells;
  out.energy.assign(n, 0.0);
  out.flux_x.assign(n, 0.0);
  out.flux_y.assign(n, 0.0);
  for (int g = 0; g < out.groups; ++g)
    for (int m = 0; m < quad.size(); ++m) {
      const auto& d = quad[m];
      for (int c = 0; c < out.cells; ++c) {
        const double wi = d.weight * intensity.at(g, m, c);
        out.energy[g * out.cells + c] += wi / kSpeedOfLight;
        out.flux_x[g * out.cells + c] += wi * d.mu;
        out.flux_y[g * out.cells + c] += wi * d.eta;
      }
    }
  return out;
}

}  // namespace mlqd
