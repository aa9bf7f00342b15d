#pragma once

// Domains, shrunk cubic lattices, nearest-neighbour tables and the
// five-tetrahedra cell decomposition used by the piecewise-linear projection.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "spinlab/error.hpp"
#include "spinlab/vec3.hpp"

namespace spinlab {

using Index3 = std::array<int, 3>;

struct Box {
  Vec3 lo;
  Vec3 hi;
};

struct Ball {
  Vec3 center;
  double radius = 0.0;
};

/// Closed axis-aligned box or closed ball containing the origin in its interior.
class DomainSpec {
 public:
  static DomainSpec box(const Vec3& lo, const Vec3& hi) {
    for (int d = 0; d < 3; ++d) {
      if (!(hi[d] > lo[d])) throw InvalidArgument("box domain needs positive extent on every axis");
      if (!(lo[d] < 0.0 && hi[d] > 0.0)) throw InvalidArgument("the origin must lie in the interior of the box");
    }
    return DomainSpec(Box{lo, hi});
  }

  static DomainSpec ball(const Vec3& center, double radius) {
    if (!(radius > 0.0)) throw InvalidArgument("ball domain needs a positive radius");
    if (!(norm(center) < radius)) throw InvalidArgument("the origin must lie in the interior of the ball");
    return DomainSpec(Ball{center, radius});
  }

  /// [-1/2, 1/2]^3
  static DomainSpec unit_box() { return box({-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}); }

  bool is_box() const { return std::holds_alternative<Box>(shape_); }
  bool is_ball() const { return std::holds_alternative<Ball>(shape_); }
  const Box& as_box() const { return std::get<Box>(shape_); }
  const Ball& as_ball() const { return std::get<Ball>(shape_); }

  Box bounding_box() const {
    if (is_box()) return as_box();
    const Ball& b = as_ball();
    const Vec3 r{b.radius, b.radius, b.radius};
    return {b.center - r, b.center + r};
  }

  /// Absolute tolerance used for membership of points lying on the boundary.
  double tolerance() const {
    const Box bb = bounding_box();
    double scale = 1.0;
    for (int d = 0; d < 3; ++d) scale = std::max({scale, std::abs(bb.lo[d]), std::abs(bb.hi[d])});
    return 1e-12 * scale;
  }

  bool contains(const Vec3& p) const {
    const double tol = tolerance();
    if (is_box()) {
      const Box& b = as_box();
      for (int d = 0; d < 3; ++d)
        if (p[d] < b.lo[d] - tol || p[d] > b.hi[d] + tol) return false;
      return true;
    }
    const Ball& b = as_ball();
    return norm(p - b.center) <= b.radius + tol;
  }

  bool in_bounding_box(const Vec3& p) const {
    const Box bb = bounding_box();
    const double tol = tolerance();
    for (int d = 0; d < 3; ++d)
      if (p[d] < bb.lo[d] - tol || p[d] > bb.hi[d] + tol) return false;
    return true;
  }

  double volume() const {
    if (is_box()) {
      const Box& b = as_box();
      return (b.hi.x - b.lo.x) * (b.hi.y - b.lo.y) * (b.hi.z - b.lo.z);
    }
    const double r = as_ball().radius;
    return 4.0 / 3.0 * M_PI * r * r * r;
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    if (is_box())
      os << "box lo=" << as_box().lo << " hi=" << as_box().hi;
    else
      os << "ball center=" << as_ball().center << " radius=" << as_ball().radius;
    return os.str();
  }

 private:
  explicit DomainSpec(std::variant<Box, Ball> s) : shape_(s) {}
  std::variant<Box, Ball> shape_;
};

/// Axis-adjacent neighbours of every node. Slot order is -x, +x, -y, +y, -z, +z.
struct NeighborTable {
  static constexpr std::uint32_t none = std::numeric_limits<std::uint32_t>::max();

  std::vector<std::array<std::uint32_t, 6>> adjacency;
  /// Nodes with fewer than six neighbours, ascending.
  std::vector<std::uint32_t> boundary_set;

  int degree(std::size_t node) const {
    return static_cast<int>(std::count_if(adjacency[node].begin(), adjacency[node].end(),
                                          [](std::uint32_t v) { return v != none; }));
  }
};

/// Nodes i in Z^3 with (a/n) i inside the domain, in lexicographic order of i.
class Lattice {
 public:
  static constexpr std::uint32_t npos = std::numeric_limits<std::uint32_t>::max();

  double a() const { return a_; }
  int n() const { return n_; }
  double spacing() const { return a_ / n_; }
  const DomainSpec& domain() const { return domain_; }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Index3>& nodes() const { return nodes_; }
  const Index3& index(std::size_t node) const { return nodes_[node]; }

  Vec3 position(const Index3& i) const {
    return {a_ * i[0] / n_, a_ * i[1] / n_, a_ * i[2] / n_};
  }
  Vec3 position(std::size_t node) const { return position(nodes_[node]); }

  /// Node id of index triple i, or npos.
  std::uint32_t find(const Index3& i) const {
    for (int d = 0; d < 3; ++d)
      if (i[d] < lo_[d] || i[d] > hi_[d]) return npos;
    return lookup_[offset(i)];
  }

  const Index3& index_lo() const { return lo_; }
  const Index3& index_hi() const { return hi_; }

  const NeighborTable& neighbor_table() const { return table_; }

 private:
  friend std::shared_ptr<const Lattice> build_lattice(const DomainSpec&, double, int);

  Lattice(const DomainSpec& d, double a, int n) : domain_(d), a_(a), n_(n) {}

  std::size_t offset(const Index3& i) const {
    const auto ey = static_cast<std::size_t>(hi_[1] - lo_[1] + 1);
    return (static_cast<std::size_t>(i[0] - lo_[0]) * ey + static_cast<std::size_t>(i[1] - lo_[1])) *
               static_cast<std::size_t>(hi_[2] - lo_[2] + 1) +
           static_cast<std::size_t>(i[2] - lo_[2]);
  }

  DomainSpec domain_;
  double a_;
  int n_;
  std::vector<Index3> nodes_;
  Index3 lo_{};
  Index3 hi_{};
  std::vector<std::uint32_t> lookup_;
  NeighborTable table_;
};

using LatticePtr = std::shared_ptr<const Lattice>;

inline constexpr std::array<Index3, 6> kNeighborOffsets{
    {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};

inline Index3 operator+(const Index3& a, const Index3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }

/// Builds the neighbour table of a lattice from scratch.
inline NeighborTable neighbors(const Lattice& lattice) {
  NeighborTable t;
  t.adjacency.resize(lattice.size());
  for (std::size_t v = 0; v < lattice.size(); ++v) {
    for (std::size_t s = 0; s < 6; ++s) {
      const std::uint32_t w = lattice.find(lattice.index(v) + kNeighborOffsets[s]);
      t.adjacency[v][s] = (w == Lattice::npos) ? NeighborTable::none : w;
    }
    if (t.degree(v) < 6) t.boundary_set.push_back(static_cast<std::uint32_t>(v));
  }
  return t;
}

inline LatticePtr build_lattice(const DomainSpec& domain, double a, int n) {
  if (n < 1) throw InvalidArgument("shrink index n must be >= 1");
  if (!(a > 0.0)) throw InvalidArgument("lattice constant a must be positive");

  std::shared_ptr<Lattice> lat(new Lattice(domain, a, n));
  const double h = a / n;
  const Box bb = domain.bounding_box();
  const double tol = domain.tolerance();
  for (int d = 0; d < 3; ++d) {
    lat->lo_[d] = static_cast<int>(std::ceil((bb.lo[d] - tol) / h));
    lat->hi_[d] = static_cast<int>(std::floor((bb.hi[d] + tol) / h));
  }
  const std::size_t extent = static_cast<std::size_t>(lat->hi_[0] - lat->lo_[0] + 1) *
                             static_cast<std::size_t>(lat->hi_[1] - lat->lo_[1] + 1) *
                             static_cast<std::size_t>(lat->hi_[2] - lat->lo_[2] + 1);
  lat->lookup_.assign(extent, Lattice::npos);

  for (int i = lat->lo_[0]; i <= lat->hi_[0]; ++i)
    for (int j = lat->lo_[1]; j <= lat->hi_[1]; ++j)
      for (int k = lat->lo_[2]; k <= lat->hi_[2]; ++k) {
        const Index3 idx{i, j, k};
        if (!domain.contains(lat->position(idx))) continue;
        lat->lookup_[lat->offset(idx)] = static_cast<std::uint32_t>(lat->nodes_.size());
        lat->nodes_.push_back(idx);
      }

  if (lat->nodes_.empty()) {
    std::ostringstream os;
    os << "empty lattice: no node of spacing " << h << " lies in " << domain.describe();
    throw InvalidArgument(os.str());
  }
  lat->table_ = neighbors(*lat);
  return lat;
}

inline int parity(const Index3& i) { return ((i[0] + i[1] + i[2]) % 2 + 2) % 2; }

enum class TetKind : std::uint8_t { corner, center };

/// For corner tetrahedra nodes[0] is the right-angle vertex and nodes[1..3]
/// its x, y, z neighbours.
struct Tet {
  std::array<std::uint32_t, 4> nodes{};
  TetKind kind = TetKind::corner;
};

/// A lattice cell whose eight vertices are all lattice nodes. Local vertex
/// v = dx | dy << 1 | dz << 2 sits at lower + (dx, dy, dz).
struct Cell {
  Index3 lower{};
  std::array<std::uint32_t, 8> vertices{};
};

struct AxisEdge {
  std::uint32_t a = 0;  // lower end along `axis`
  std::uint32_t b = 0;
  std::uint8_t axis = 0;
  std::uint8_t corner_multiplicity = 0;   // number of corner tets containing it
  std::uint8_t surface_multiplicity = 0;  // number of distinct S triples using it as a leg
};

struct DiagonalEdge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::uint8_t center_multiplicity = 0;  // number of center tets containing it
};

/// Outer face (i, j, k) of a corner tetrahedron: (i, j) is a face diagonal,
/// (i, k) and (j, k) are axis edges.
struct SurfaceTriple {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  std::uint32_t k = 0;
};

struct TetLocation {
  Tet tet;
  std::array<double, 4> weights{};  // barycentric, aligned with tet.nodes
};

/// Mirrored five-tetrahedra decomposition of the full cells of a lattice.
///
/// Corner tetrahedra sit at the cell vertices of even global index parity,
/// the center tetrahedron spans the four odd ones. Because parity is a global
/// property, neighbouring cells split their shared face along the same
/// diagonal and the resulting mesh is conforming.
class TetDecomposition {
 public:
  const LatticePtr& lattice() const { return lattice_; }
  const std::vector<Cell>& cells() const { return cells_; }
  /// Four per cell, cell c owns [4c, 4c + 4).
  const std::vector<Tet>& corner_tets() const { return corner_tets_; }
  /// One per cell, aligned with cells().
  const std::vector<Tet>& center_tets() const { return center_tets_; }
  const std::vector<AxisEdge>& edges_E() const { return edges_E_; }
  const std::vector<DiagonalEdge>& edges_C() const { return edges_C_; }
  const std::vector<SurfaceTriple>& surfaces_S() const { return surfaces_S_; }

  bool empty() const { return cells_.empty(); }

  double corner_volume() const { return std::pow(lattice_->spacing(), 3) / 6.0; }
  double center_volume() const { return std::pow(lattice_->spacing(), 3) / 3.0; }
  /// Lebesgue measure of the union of all tetrahedra.
  double covered_volume() const { return static_cast<double>(cells_.size()) * std::pow(lattice_->spacing(), 3); }

  /// Corner-tet multiplicity of the axis edge leaving `node` in +axis direction.
  int corner_multiplicity(std::uint32_t node, int axis) const { return corner_mult_[3 * node + static_cast<std::size_t>(axis)]; }
  int surface_multiplicity(std::uint32_t node, int axis) const { return surface_mult_[3 * node + static_cast<std::size_t>(axis)]; }

  /// Index into cells() of the full cell with the given lower corner, or -1.
  long cell_at(const Index3& lower) const {
    const Index3& lo = lattice_->index_lo();
    const Index3& hi = lattice_->index_hi();
    for (int d = 0; d < 3; ++d)
      if (lower[d] < lo[d] || lower[d] >= hi[d]) return -1;
    return cell_lookup_[cell_offset(lower)];
  }

  /// Tetrahedron containing p with its barycentric weights; empty when p is
  /// outside the union of tetrahedra.
  std::optional<TetLocation> locate(const Vec3& p) const {
    if (cells_.empty()) return std::nullopt;
    const double h = lattice_->spacing();
    constexpr double snap = 1e-10;
    std::array<std::array<int, 2>, 3> cand{};
    std::array<int, 3> ncand{};
    for (int d = 0; d < 3; ++d) {
      const double t = p[d] / h;
      const double f = std::floor(t);
      const int base = static_cast<int>(f);
      ncand[d] = 0;
      cand[d][ncand[d]++] = base;
      if (t - f < snap) cand[d][ncand[d]++] = base - 1;
      else if (f + 1.0 - t < snap) cand[d][ncand[d]++] = base + 1;
    }
    for (int a = 0; a < ncand[0]; ++a)
      for (int b = 0; b < ncand[1]; ++b)
        for (int c = 0; c < ncand[2]; ++c) {
          const Index3 lower{cand[0][a], cand[1][b], cand[2][c]};
          const long id = cell_at(lower);
          if (id < 0) continue;
          Vec3 u;
          for (int d = 0; d < 3; ++d) u[d] = std::clamp(p[d] / h - lower[d], 0.0, 1.0);
          return locate_in_cell(static_cast<std::size_t>(id), u);
        }
    return std::nullopt;
  }

  /// Barycentric location of local coordinates u in [0,1]^3 inside cell `id`.
  TetLocation locate_in_cell(std::size_t id, const Vec3& u) const {
    const Cell& cell = cells_[id];
    const int p = parity(cell.lower);
    // corner tet at an even vertex c: L1 distance to c at most 1
    for (int v = 0; v < 8; ++v) {
      if (((p + __builtin_popcount(static_cast<unsigned>(v))) & 1) != 0) continue;
      const Vec3 c{double(v & 1), double((v >> 1) & 1), double((v >> 2) & 1)};
      const Vec3 w{std::abs(u.x - c.x), std::abs(u.y - c.y), std::abs(u.z - c.z)};
      const double l1 = w.x + w.y + w.z;
      if (l1 <= 1.0 + 1e-14) {
        TetLocation loc;
        loc.tet = corner_tets_[4 * id + static_cast<std::size_t>(corner_slot(p, v))];
        loc.weights = {1.0 - l1, w.x, w.y, w.z};
        return loc;
      }
    }
    TetLocation loc;
    loc.tet = center_tets_[id];
    int slot = 0;
    for (int v = 0; v < 8; ++v) {
      if (((p + __builtin_popcount(static_cast<unsigned>(v))) & 1) == 0) continue;
      const Vec3 c{double(v & 1), double((v >> 1) & 1), double((v >> 2) & 1)};
      const double l1 = std::abs(u.x - c.x) + std::abs(u.y - c.y) + std::abs(u.z - c.z);
      loc.weights[static_cast<std::size_t>(slot++)] = 1.0 - 0.5 * l1;
    }
    return loc;
  }

 private:
  friend TetDecomposition decompose(const LatticePtr&);

  // rank of even vertex v among the even vertices of a cell with parity p
  static int corner_slot(int p, int v) {
    int slot = 0;
    for (int w = 0; w < v; ++w)
      if (((p + __builtin_popcount(static_cast<unsigned>(w))) & 1) == 0) ++slot;
    return slot;
  }

  std::size_t cell_offset(const Index3& lower) const {
    const Index3& lo = lattice_->index_lo();
    const Index3& hi = lattice_->index_hi();
    const auto ey = static_cast<std::size_t>(hi[1] - lo[1]);
    const auto ez = static_cast<std::size_t>(hi[2] - lo[2]);
    return (static_cast<std::size_t>(lower[0] - lo[0]) * ey + static_cast<std::size_t>(lower[1] - lo[1])) * ez +
           static_cast<std::size_t>(lower[2] - lo[2]);
  }

  LatticePtr lattice_;
  std::vector<Cell> cells_;
  std::vector<Tet> corner_tets_;
  std::vector<Tet> center_tets_;
  std::vector<AxisEdge> edges_E_;
  std::vector<DiagonalEdge> edges_C_;
  std::vector<SurfaceTriple> surfaces_S_;
  std::vector<std::uint8_t> corner_mult_;
  std::vector<std::uint8_t> surface_mult_;
  std::vector<long> cell_lookup_;
};

using DecompositionPtr = std::shared_ptr<const TetDecomposition>;

inline TetDecomposition decompose(const LatticePtr& lattice) {
  if (!lattice) throw InvalidArgument("decompose: null lattice");
  const Lattice& lat = *lattice;
  TetDecomposition dec;
  dec.lattice_ = lattice;
  const std::size_t nn = lat.size();
  dec.corner_mult_.assign(3 * nn, 0);
  dec.surface_mult_.assign(3 * nn, 0);
  std::vector<std::uint8_t> face_cells(3 * nn, 0);  // keyed by (lower face vertex, normal axis)

  const Index3& lo = lat.index_lo();
  const Index3& hi = lat.index_hi();
  std::size_t cell_extent = 1;
  for (int d = 0; d < 3; ++d) cell_extent *= static_cast<std::size_t>(std::max(hi[d] - lo[d], 0));
  dec.cell_lookup_.assign(cell_extent, -1);

  auto bit = [](int v, int d) { return (v >> d) & 1; };

  for (std::size_t v0 = 0; v0 < nn; ++v0) {
    const Index3& lower = lat.index(v0);
    Cell cell;
    cell.lower = lower;
    bool full = true;
    for (int v = 0; v < 8 && full; ++v) {
      const std::uint32_t id = lat.find({lower[0] + bit(v, 0), lower[1] + bit(v, 1), lower[2] + bit(v, 2)});
      if (id == Lattice::npos) full = false;
      cell.vertices[static_cast<std::size_t>(v)] = id;
    }
    if (!full) continue;

    const auto cid = static_cast<long>(dec.cells_.size());
    dec.cell_lookup_[dec.cell_offset(lower)] = cid;
    dec.cells_.push_back(cell);

    const int p = parity(lower);
    Tet center;
    center.kind = TetKind::center;
    int cslot = 0;
    for (int v = 0; v < 8; ++v) {
      const bool even = ((p + __builtin_popcount(static_cast<unsigned>(v))) & 1) == 0;
      if (!even) {
        center.nodes[static_cast<std::size_t>(cslot++)] = cell.vertices[static_cast<std::size_t>(v)];
        continue;
      }
      Tet t;
      t.kind = TetKind::corner;
      t.nodes[0] = cell.vertices[static_cast<std::size_t>(v)];
      for (int d = 0; d < 3; ++d) {
        const int w = v ^ (1 << d);
        t.nodes[static_cast<std::size_t>(d + 1)] = cell.vertices[static_cast<std::size_t>(w)];
        const std::uint32_t low = bit(v, d) == 0 ? t.nodes[0] : t.nodes[static_cast<std::size_t>(d + 1)];
        ++dec.corner_mult_[3 * low + static_cast<std::size_t>(d)];
      }
      dec.corner_tets_.push_back(t);
    }
    dec.center_tets_.push_back(center);

    for (int d = 0; d < 3; ++d)
      for (int side = 0; side < 2; ++side) {
        const std::uint32_t f = cell.vertices[static_cast<std::size_t>(side << d)];
        ++face_cells[3 * f + static_cast<std::size_t>(d)];
      }
  }

  for (std::size_t f = 0; f < nn; ++f)
    for (int d = 0; d < 3; ++d) {
      const std::uint8_t count = face_cells[3 * f + static_cast<std::size_t>(d)];
      if (count == 0) continue;
      const int ea = (d + 1) % 3;
      const int eb = (d + 2) % 3;
      Index3 da{0, 0, 0}, db{0, 0, 0};
      da[static_cast<std::size_t>(ea)] = 1;
      db[static_cast<std::size_t>(eb)] = 1;
      const Index3& fi = lat.index(f);
      const std::uint32_t v00 = static_cast<std::uint32_t>(f);
      const std::uint32_t v10 = lat.find(fi + da);
      const std::uint32_t v01 = lat.find(fi + db);
      const std::uint32_t v11 = lat.find(fi + da + db);
      std::uint32_t o1, o2, e1, e2;
      if (parity(fi) == 1) {
        o1 = v00, o2 = v11, e1 = v10, e2 = v01;
      } else {
        o1 = v10, o2 = v01, e1 = v00, e2 = v11;
      }
      if (o1 > o2) std::swap(o1, o2);
      dec.edges_C_.push_back({o1, o2, count});
      dec.surfaces_S_.push_back({o1, o2, e1});
      dec.surfaces_S_.push_back({o1, o2, e2});
      ++dec.surface_mult_[3 * v00 + static_cast<std::size_t>(ea)];
      ++dec.surface_mult_[3 * v00 + static_cast<std::size_t>(eb)];
      ++dec.surface_mult_[3 * v10 + static_cast<std::size_t>(eb)];
      ++dec.surface_mult_[3 * v01 + static_cast<std::size_t>(ea)];
    }

  const NeighborTable& nt = lat.neighbor_table();
  for (std::size_t v = 0; v < nn; ++v)
    for (int d = 0; d < 3; ++d) {
      const std::uint8_t m = dec.corner_mult_[3 * v + static_cast<std::size_t>(d)];
      if (m == 0) continue;
      const std::uint32_t w = nt.adjacency[v][static_cast<std::size_t>(2 * d + 1)];
      dec.edges_E_.push_back({static_cast<std::uint32_t>(v), w, static_cast<std::uint8_t>(d), m,
                              dec.surface_mult_[3 * v + static_cast<std::size_t>(d)]});
    }
  return dec;
}

inline DecompositionPtr make_decomposition(const LatticePtr& lattice) {
  return std::make_shared<const TetDecomposition>(decompose(lattice));
}

}  // namespace spinlab
