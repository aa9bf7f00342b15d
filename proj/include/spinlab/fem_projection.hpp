#pragma once

// Piecewise-linear projection P_n on the tetrahedral decomposition, its
// gradients and norms, and the split of the Dirichlet energy into the
// discrete exchange energy plus the correction alpha_n.

#include <array>
#include <cmath>
#include <sstream>
#include <vector>

#include "spinlab/error.hpp"
#include "spinlab/geometry.hpp"
#include "spinlab/spin_field.hpp"

namespace spinlab {

/// P_n(mu_n): linear on every tetrahedron, zero outside the union of full cells.
class PWLField {
 public:
  PWLField(DecompositionPtr decomposition, std::vector<Vec3> values)
      : decomp_(std::move(decomposition)), values_(std::move(values)) {
    if (!decomp_) throw InvalidArgument("PWLField: null decomposition");
    if (values_.size() != decomp_->lattice()->size()) throw InvalidArgument("PWLField: value count mismatch");
  }

  const TetDecomposition& decomposition() const { return *decomp_; }
  const DecompositionPtr& decomposition_ptr() const { return decomp_; }
  const std::vector<Vec3>& nodal_values() const { return values_; }
  const Lattice& lattice() const { return *decomp_->lattice(); }

  /// Throws DomainError outside the domain's bounding box.
  Vec3 operator()(const Vec3& p) const {
    const DomainSpec& dom = lattice().domain();
    if (!dom.in_bounding_box(p)) {
      std::ostringstream os;
      os << "PWLField evaluated at " << p << ", outside the domain bounding box";
      throw DomainError(os.str());
    }
    const auto loc = decomp_->locate(p);
    if (!loc) return {};
    Vec3 v;
    for (std::size_t i = 0; i < 4; ++i) v += loc->weights[i] * values_[loc->tet.nodes[i]];
    return v;
  }

 private:
  DecompositionPtr decomp_;
  std::vector<Vec3> values_;
};

inline PWLField project(const SpinField& field, const DecompositionPtr& decomposition) {
  if (!decomposition) throw InvalidArgument("project: null decomposition");
  if (decomposition->lattice() != field.lattice())
    throw InvalidArgument("project: decomposition was built for a different lattice");
  return PWLField(decomposition, field.values());
}

/// Constant gradient of the linear interpolant of `values` on the tetrahedron
/// with vertices `pts`. Row c holds grad of component c.
inline Mat3 tet_gradient(const std::array<Vec3, 4>& pts, const std::array<Vec3, 4>& values) {
  Mat3 edges;
  for (int i = 0; i < 3; ++i) edges[i] = pts[static_cast<std::size_t>(i + 1)] - pts[0];
  const double det = determinant(edges);
  double scale = 0.0;
  for (int i = 0; i < 3; ++i) scale = std::max(scale, norm2(edges[i]));
  if (std::abs(det) <= 1e-14 * std::pow(scale, 1.5)) throw InvalidArgument("tet_gradient: degenerate tetrahedron");
  const Mat3 inv = inverse(edges);
  Mat3 g;
  for (int c = 0; c < 3; ++c) {
    const Vec3 d{values[1][c] - values[0][c], values[2][c] - values[0][c], values[3][c] - values[0][c]};
    g[c] = inv * d;
  }
  return g;
}

inline double tet_volume(const std::array<Vec3, 4>& pts) {
  return std::abs(dot(pts[1] - pts[0], cross(pts[2] - pts[0], pts[3] - pts[0]))) / 6.0;
}

inline std::array<Vec3, 4> tet_points(const Lattice& lat, const Tet& t) {
  return {lat.position(t.nodes[0]), lat.position(t.nodes[1]), lat.position(t.nodes[2]), lat.position(t.nodes[3])};
}

inline Mat3 tet_gradient(const PWLField& pwl, const Tet& t) {
  const auto& v = pwl.nodal_values();
  return tet_gradient(tet_points(pwl.lattice(), t), {v[t.nodes[0]], v[t.nodes[1]], v[t.nodes[2]], v[t.nodes[3]]});
}

namespace detail {

template <class Fn>
void for_each_tet(const TetDecomposition& dec, Fn&& fn) {
  for (const Tet& t : dec.corner_tets()) fn(t);
  for (const Tet& t : dec.center_tets()) fn(t);
}

}  // namespace detail

/// Integral of |grad P_n|^2 over the union of tetrahedra, from the solved
/// per-tetrahedron gradients.
inline double dirichlet_energy(const PWLField& pwl) {
  const Lattice& lat = pwl.lattice();
  double sum = 0.0;
  detail::for_each_tet(pwl.decomposition(), [&](const Tet& t) {
    const auto pts = tet_points(lat, t);
    sum += tet_volume(pts) * frobenius2(tet_gradient(pwl, t));
  });
  return sum;
}

/// Squared L2 norm; exact for the quadratic integrand, with the P1 mass
/// matrix V/20 (1 + delta_ij).
inline double l2_norm_sq(const PWLField& pwl) {
  const Lattice& lat = pwl.lattice();
  const auto& v = pwl.nodal_values();
  double sum = 0.0;
  detail::for_each_tet(pwl.decomposition(), [&](const Tet& t) {
    Vec3 s;
    double sq = 0.0;
    for (std::uint32_t id : t.nodes) {
      s += v[id];
      sq += norm2(v[id]);
    }
    sum += tet_volume(tet_points(lat, t)) / 20.0 * (sq + norm2(s));
  });
  return sum;
}

inline double l2_norm(const PWLField& pwl) { return std::sqrt(l2_norm_sq(pwl)); }

/// H1 norm squared: L2 part plus the Dirichlet energy.
inline double h1_norm_sq(const PWLField& pwl) { return l2_norm_sq(pwl) + dirichlet_energy(pwl); }

struct EnergyBreakdown {
  double dirichlet = 0.0;
  double exchange_over_2A = 0.0;
  double alpha_n = 0.0;  // dirichlet - exchange_over_2A
  double s_cross = 0.0;
  double s_surface = 0.0;
};

/// (a/n) * sum over unordered nearest-neighbour pairs of |mu_x - mu_y|^2,
/// which is E_n,ex / 2A.
inline double exchange_edge_sum(const SpinField& field) {
  const Lattice& lat = *field.lattice();
  const NeighborTable& nt = lat.neighbor_table();
  double s = 0.0;
  for (std::size_t v = 0; v < lat.size(); ++v)
    for (std::size_t slot = 1; slot < 6; slot += 2) {
      const std::uint32_t w = nt.adjacency[v][slot];
      if (w != NeighborTable::none) s += norm2(field[v] - field[w]);
    }
  return lat.spacing() * s;
}

inline EnergyBreakdown energy_breakdown(const SpinField& field, const DecompositionPtr& decomposition, double A) {
  if (!(A > 0.0)) throw InvalidArgument("energy_breakdown: A must be positive");
  const PWLField pwl = project(field, decomposition);
  const TetDecomposition& dec = *decomposition;
  const Lattice& lat = *field.lattice();
  const double h = lat.spacing();
  const auto& mu = field.values();

  EnergyBreakdown e;
  e.dirichlet = dirichlet_energy(pwl);
  e.exchange_over_2A = exchange_edge_sum(field);
  e.alpha_n = e.dirichlet - e.exchange_over_2A;

  double cross_sum = 0.0;
  for (const SurfaceTriple& s : dec.surfaces_S()) cross_sum += dot(mu[s.i] - mu[s.k], mu[s.k] - mu[s.j]);
  e.s_cross = h / 6.0 * cross_sum;

  // Over-count deficit: every lattice edge carries weight 12 in E/2A; the
  // corner tets and S legs account for 2 m_T + m_S of it, each diagonal
  // carries 2 in S and m_* in the center tets.
  const NeighborTable& nt = lat.neighbor_table();
  double deficit = 0.0;
  for (std::size_t v = 0; v < lat.size(); ++v)
    for (int d = 0; d < 3; ++d) {
      const std::uint32_t w = nt.adjacency[v][static_cast<std::size_t>(2 * d + 1)];
      if (w == NeighborTable::none) continue;
      const auto id = static_cast<std::uint32_t>(v);
      const int weight = 12 - 2 * dec.corner_multiplicity(id, d) - dec.surface_multiplicity(id, d);
      if (weight != 0) deficit += weight * norm2(mu[v] - mu[w]);
    }
  for (const DiagonalEdge& c : dec.edges_C()) {
    const int weight = 2 - c.center_multiplicity;
    if (weight != 0) deficit += weight * norm2(mu[c.a] - mu[c.b]);
  }
  e.s_surface = h / 12.0 * deficit;
  return e;
}

/// Closed form of the Dirichlet energy on one corner tetrahedron.
inline double corner_tet_energy(double spacing, const std::array<Vec3, 4>& mu) {
  return spacing / 6.0 * (norm2(mu[1] - mu[0]) + norm2(mu[2] - mu[0]) + norm2(mu[3] - mu[0]));
}

/// Closed form on one center tetrahedron (sum over unordered vertex pairs).
inline double center_tet_energy(double spacing, const std::array<Vec3, 4>& mu) {
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) s += norm2(mu[i] - mu[j]);
  return spacing / 12.0 * s;
}

}  // namespace spinlab
