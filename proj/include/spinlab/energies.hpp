#pragma once

// Discrete and continuum exchange, Zeeman and total energies.

#include <algorithm>
#include <cmath>
#include <optional>

#include "spinlab/demag.hpp"
#include "spinlab/error.hpp"
#include "spinlab/fem_projection.hpp"
#include "spinlab/fields.hpp"
#include "spinlab/geometry.hpp"
#include "spinlab/spin_field.hpp"

namespace spinlab {

struct ExchangeParams {
  double A = 1.0;  // coupling, > 0
  double a = 1.0;  // lattice constant
};

namespace detail {

inline void check_exchange(const ExchangeParams& p, const Lattice& lat) {
  if (!(p.A > 0.0)) throw InvalidArgument("exchange coupling A must be positive");
  if (std::abs(p.a - lat.a()) > 1e-12 * lat.a())
    throw InvalidArgument("exchange parameters and lattice disagree on the lattice constant");
}

}  // namespace detail

/// E_n,ex = (a/n) sum_x sum_{y in N_x} A |mu_y - mu_x|^2 (ordered pairs).
inline double exchange_discrete(const SpinField& field, const ExchangeParams& params) {
  const Lattice& lat = *field.lattice();
  detail::check_exchange(params, lat);
  const NeighborTable& nt = lat.neighbor_table();
  double s = 0.0;
  for (std::size_t v = 0; v < lat.size(); ++v)
    for (std::uint32_t w : nt.adjacency[v])
      if (w != NeighborTable::none) s += norm2(field[w] - field[v]);
  return lat.spacing() * params.A * s;
}

/// -(a/n)^3 sum_x h_Z(x) . mu_x
inline double zeeman_discrete(const SpinField& field, const ZeemanField& h) {
  const Lattice& lat = *field.lattice();
  double s = 0.0;
  for (std::size_t v = 0; v < lat.size(); ++v) s += dot(h(lat.position(v)), field[v]);
  return -std::pow(lat.spacing(), 3) * s;
}

struct QuadratureOptions {
  int cells = 48;      // along the longest bounding-box side
  int subsample = 4;   // per-axis sub-points in cells cut by the boundary
  std::optional<double> fd_step;  // central differences when no analytic gradient
};

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;  // |Q_h - Q_2h| / 3
};

namespace detail {

inline bool cell_inside(const DomainSpec& dom, const Vec3& lo, double h) {
  for (int c = 0; c < 8; ++c)
    if (!dom.contains(lo + h * Vec3{double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)})) return false;
  return true;
}

inline bool cell_touches(const DomainSpec& dom, const Vec3& lo, double h) {
  if (dom.is_box()) {
    const Box& b = dom.as_box();
    for (int d = 0; d < 3; ++d)
      if (lo[d] > b.hi[d] || lo[d] + h < b.lo[d]) return false;
    return true;
  }
  const Ball& b = dom.as_ball();
  double d2 = 0.0;
  for (int d = 0; d < 3; ++d) {
    const double c = std::clamp(b.center[d], lo[d], lo[d] + h);
    d2 += (c - b.center[d]) * (c - b.center[d]);
  }
  return d2 <= b.radius * b.radius;
}

/// Midpoint rule on a cubic grid clipped to the domain; cells cut by the
/// boundary use an s^3 sub-grid of midpoints.
template <class F>
double integrate_once(const DomainSpec& dom, F&& f, int cells, int sub) {
  const GridSpec g = GridSpec::covering(dom, cells);
  const double h = g.h;
  const double hs = h / sub;
  double total = 0.0;
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 lo = g.origin + h * Vec3{double(i), double(j), double(k)};
        if (cell_inside(dom, lo, h)) {
          total += f(lo + 0.5 * h * Vec3{1, 1, 1}) * h * h * h;
          continue;
        }
        if (!cell_touches(dom, lo, h)) continue;
        for (int c = 0; c < sub; ++c)
          for (int b = 0; b < sub; ++b)
            for (int a = 0; a < sub; ++a) {
              const Vec3 p = lo + hs * Vec3{a + 0.5, b + 0.5, c + 0.5};
              if (dom.contains(p)) total += f(p) * hs * hs * hs;
            }
      }
  return total;
}

}  // namespace detail

template <class F>
QuadratureResult integrate(const DomainSpec& domain, F&& f, const QuadratureOptions& opt) {
  if (opt.cells < 2 || opt.subsample < 1) throw InvalidArgument("quadrature needs cells >= 2 and subsample >= 1");
  QuadratureResult r;
  r.value = detail::integrate_once(domain, f, opt.cells, opt.subsample);
  const double coarse = detail::integrate_once(domain, f, opt.cells / 2, opt.subsample);
  r.error_estimate = std::abs(r.value - coarse) / 3.0;
  return r;
}

/// Gradient of u at x: analytic when available, else central differences.
inline Mat3 field_gradient(const SmoothField& u, const Vec3& x, const std::optional<double>& fd_step) {
  if (u.has_gradient()) return u.gradient(x);
  if (!fd_step) throw InvalidArgument("field '" + u.name + "' has no analytic gradient and no finite-difference step is set");
  const double s = *fd_step;
  Mat3 g;
  for (int d = 0; d < 3; ++d) {
    Vec3 e;
    e[d] = s;
    const Vec3 diff = (u(x + e) - u(x - e)) / (2.0 * s);
    for (int c = 0; c < 3; ++c) g[c][d] = diff[c];
  }
  return g;
}

/// 2A * integral of |grad u|^2 over the domain.
inline QuadratureResult exchange_continuum(const SmoothField& u, const DomainSpec& domain, double A,
                                           const QuadratureOptions& opt = {}) {
  if (!(A > 0.0)) throw InvalidArgument("exchange coupling A must be positive");
  if (!u.has_gradient() && !opt.fd_step)
    throw InvalidArgument("field '" + u.name + "' has no analytic gradient and no finite-difference step is set");
  return integrate(domain, [&](const Vec3& x) { return 2.0 * A * frobenius2(field_gradient(u, x, opt.fd_step)); }, opt);
}

/// -integral of h_Z . u over the domain.
inline QuadratureResult zeeman_continuum(const SmoothField& u, const ZeemanField& h, const DomainSpec& domain,
                                         const QuadratureOptions& opt = {}) {
  return integrate(domain, [&](const Vec3& x) { return -dot(h(x), u(x)); }, opt);
}

struct DemagConfig {
  bool enabled = false;
  int cells = 32;  // along the longest bounding-box side
  DemagOptions options;

  GridSpec grid(const DomainSpec& domain) const { return GridSpec::covering(domain, cells); }
};

struct TotalEnergyReport {
  double exchange = 0.0;
  double demag = 0.0;
  double zeeman = 0.0;
  double total = 0.0;
  // continuum counterparts, when computed
  std::optional<double> ref_exchange;
  std::optional<double> ref_demag;
  std::optional<double> ref_zeeman;
  std::optional<double> ref_total;
};

/// Exchange + demag + Zeeman of one spin configuration. The demag term is
/// the stray-field energy of P_n(mu_n) extended by zero. Pass a solver to
/// reuse its kernel across calls on the same grid.
inline TotalEnergyReport total_discrete(const SpinField& field, const DecompositionPtr& decomposition,
                                        const ExchangeParams& params, const ZeemanField& h, const DemagConfig& demag,
                                        const DemagSolver* solver = nullptr) {
  TotalEnergyReport r;
  r.exchange = exchange_discrete(field, params);
  r.zeeman = zeeman_discrete(field, h);
  if (demag.enabled) {
    const MagGrid g = rasterize(project(field, decomposition), solver ? solver->spec() : demag.grid(field.lattice()->domain()));
    r.demag = solver ? solver->solve(g).energy : solve(g, demag.options).energy;
  }
  r.total = r.exchange + r.demag + r.zeeman;
  return r;
}

struct ContinuumEnergies {
  QuadratureResult exchange;
  QuadratureResult zeeman;
  double demag = 0.0;
  double total = 0.0;
};

/// E_infinity(u): continuum exchange and Zeeman by quadrature, demag of the
/// rasterised field on the configured grid.
inline ContinuumEnergies total_continuum(const SmoothField& u, const DomainSpec& domain, double A,
                                         const ZeemanField& h, const DemagConfig& demag,
                                         const QuadratureOptions& opt = {}, const DemagSolver* solver = nullptr) {
  ContinuumEnergies c;
  c.exchange = exchange_continuum(u, domain, A, opt);
  c.zeeman = zeeman_continuum(u, h, domain, opt);
  if (demag.enabled) {
    const MagGrid g = rasterize_continuum(u, domain, solver ? solver->spec() : demag.grid(domain));
    c.demag = solver ? solver->solve(g).energy : solve(g, demag.options).energy;
  }
  c.total = c.exchange.value + c.demag + c.zeeman.value;
  return c;
}

}  // namespace spinlab
