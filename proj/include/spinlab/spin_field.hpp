#pragma once

// Discrete magnetisations on a lattice: point sampling, defect injection,
// the two local-alignment hypothesis checkers and plain-text serialisation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spinlab/error.hpp"
#include "spinlab/fields.hpp"
#include "spinlab/geometry.hpp"

namespace spinlab {

/// One 3-vector per lattice node, in the lattice's node order.
class SpinField {
 public:
  SpinField(LatticePtr lattice, std::vector<Vec3> values) : lattice_(std::move(lattice)), values_(std::move(values)) {
    if (!lattice_) throw InvalidArgument("SpinField: null lattice");
    if (values_.size() != lattice_->size())
      throw InvalidArgument("SpinField: expected " + std::to_string(lattice_->size()) + " values, got " +
                            std::to_string(values_.size()));
  }

  const LatticePtr& lattice() const { return lattice_; }
  const std::vector<Vec3>& values() const { return values_; }
  const Vec3& operator[](std::size_t node) const { return values_[node]; }
  std::size_t size() const { return values_.size(); }

  bool is_unit(double tol = 1e-12) const {
    return std::all_of(values_.begin(), values_.end(), [tol](const Vec3& v) { return std::abs(norm(v) - 1.0) <= tol; });
  }

 private:
  LatticePtr lattice_;
  std::vector<Vec3> values_;
};

/// Point samples of a smooth field at the lattice nodes.
inline SpinField sample(const SmoothField& field, const LatticePtr& lattice) {
  std::vector<Vec3> v(lattice->size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = field(lattice->position(i));
    if (!is_finite(v[i])) {
      const Index3& id = lattice->index(i);
      std::ostringstream os;
      os << "non-finite sample of field '" << field.name << "' at node (" << id[0] << ", " << id[1] << ", " << id[2]
         << ")";
      throw DomainError(os.str());
    }
  }
  return SpinField(lattice, std::move(v));
}

/// The per-n bound c_n on squared neighbour differences at defect nodes.
struct DefectAmplitude {
  enum class Kind { inverse_log, constant };

  Kind kind = Kind::inverse_log;
  double value = 0.0;  // used by Kind::constant

  static DefectAmplitude inverse_log() { return {Kind::inverse_log, 0.0}; }
  static DefectAmplitude constant(double c) { return {Kind::constant, c}; }

  /// c_n = 1 / log(n + 1), or the frozen constant.
  double at(int n) const { return kind == Kind::inverse_log ? 1.0 / std::log(n + 1.0) : value; }
  bool decays() const { return kind == Kind::inverse_log || value == 0.0; }
};

struct DefectSpec {
  double beta = 0.0;  // #defects = ceil(beta * n)
  DefectAmplitude amplitude;
  std::uint64_t rng_seed = 0;

  std::size_t count(int n) const { return static_cast<std::size_t>(std::ceil(beta * n)); }
};

namespace detail {

/// Great-circle interpolation between unit vectors p (t = 0) and q (t = 1).
inline Vec3 slerp(const Vec3& p, const Vec3& q, double t) {
  const double c = std::clamp(dot(p, q), -1.0, 1.0);
  const double omega = std::acos(c);
  if (omega < 1e-12) return p;
  Vec3 perp = q - c * p;
  double pn = norm(perp);
  if (pn < 1e-12) {
    // antipodal: any great circle through p will do
    perp = std::abs(p.x) < 0.9 ? cross(p, Vec3{1, 0, 0}) : cross(p, Vec3{0, 1, 0});
    pn = norm(perp);
  }
  perp = perp / pn;
  return std::cos(t * omega) * p + std::sin(t * omega) * perp;
}

inline double max_neighbor_sq_diff(const Vec3& value, std::uint32_t node, const NeighborTable& nt,
                                   const std::vector<Vec3>& values) {
  double m = 0.0;
  for (std::uint32_t w : nt.adjacency[node])
    if (w != NeighborTable::none) m = std::max(m, norm2(value - values[w]));
  return m;
}

}  // namespace detail

/// Re-randomises ceil(beta n) pairwise non-adjacent nodes on the unit sphere,
/// then pulls each one back along the great circle towards the value of its
/// first neighbour until every squared neighbour difference is at most c_n.
/// When even the neighbour's value exceeds c_n somewhere (coarse lattices),
/// that value's own maximum is used as the bound. With c_n = 0 the defect
/// takes the neighbour's value exactly. All other nodes are left untouched.
inline SpinField inject_defects(const SpinField& field, const DefectSpec& spec,
                                std::vector<std::uint32_t>* chosen = nullptr) {
  const Lattice& lat = *field.lattice();
  const double cn = spec.amplitude.at(lat.n());
  if (cn > 4.0) throw InvalidArgument("defect amplitude c_n = " + std::to_string(cn) + " exceeds 4, the diameter bound on the unit sphere");
  if (cn < 0.0 || spec.beta < 0.0) throw InvalidArgument("defect amplitude and beta must be non-negative");
  const std::size_t want = spec.count(lat.n());
  if (want > lat.size())
    throw InvalidArgument("requested " + std::to_string(want) + " defects on a lattice of " + std::to_string(lat.size()) +
                          " nodes");
  if (chosen) chosen->clear();
  if (want == 0) return field;

  const NeighborTable& nt = lat.neighbor_table();
  std::mt19937_64 rng(spec.rng_seed);
  std::vector<std::uint32_t> order(lat.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<char> blocked(lat.size(), 0);
  std::vector<std::uint32_t> picks;
  for (std::uint32_t v : order) {
    if (picks.size() == want) break;
    if (blocked[v] || nt.degree(v) == 0) continue;
    picks.push_back(v);
    blocked[v] = 1;
    for (std::uint32_t w : nt.adjacency[v])
      if (w != NeighborTable::none) blocked[w] = 1;
  }
  if (picks.size() < want)
    throw InvalidArgument("cannot place " + std::to_string(want) + " non-adjacent defects on this lattice");
  std::sort(picks.begin(), picks.end());

  std::vector<Vec3> values = field.values();
  std::normal_distribution<double> gauss;
  for (std::uint32_t v : picks) {
    Vec3 dir;
    do {
      dir = {gauss(rng), gauss(rng), gauss(rng)};
    } while (norm(dir) < 1e-8);
    dir = dir / norm(dir);

    std::uint32_t ref = NeighborTable::none;
    for (std::uint32_t w : nt.adjacency[v])
      if (w != NeighborTable::none) {
        ref = w;
        break;
      }
    const Vec3 anchor = values[ref] / norm(values[ref]);
    if (cn == 0.0) {
      values[v] = values[ref];
      continue;
    }
    auto excess = [&](double t) { return detail::max_neighbor_sq_diff(detail::slerp(anchor, dir, t), v, nt, values); };
    const double target = std::max(cn, excess(0.0));
    double lo = 0.0;
    if (excess(1.0) <= target) {
      lo = 1.0;
    } else {
      double hi = 1.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) <= target ? lo : hi) = mid;
      }
    }
    values[v] = detail::slerp(anchor, dir, lo);
  }
  if (chosen) *chosen = picks;
  return SpinField(field.lattice(), std::move(values));
}

struct Hypothesis1Result {
  int k = 1;
  double zeta = 0.0;       // max of 1 - mu_y . mu_z over node pairs at distance <= k a / n
  double threshold = 0.0;  // c_hyp / n^2
  bool pass = false;
};

struct Hypothesis3Result {
  double c = 0.0;                      // regular nodes satisfy |dmu|^2 <= c / n^2
  std::vector<std::uint32_t> defects;  // the classified set l_{n,Omega}
  double max_regular_sq_diff = 0.0;
  double max_defect_sq_diff = 0.0;
  double beta_max = 0.0;
  double c_n = 0.0;
  bool pass = false;
};

struct HypothesisReport {
  std::optional<Hypothesis1Result> hyp1;
  std::optional<Hypothesis3Result> hyp3;
};

/// Integer offsets d != 0 with |d| <= k, one per +/- pair.
inline std::vector<Index3> half_ball_offsets(int k) {
  std::vector<Index3> out;
  for (int i = -k; i <= k; ++i)
    for (int j = -k; j <= k; ++j)
      for (int l = -k; l <= k; ++l) {
        if (i * i + j * j + l * l > k * k) continue;
        const Index3 d{i, j, l};
        if (d > Index3{0, 0, 0}) out.push_back(d);
      }
  return out;
}

/// Threshold constant for the alignment check derived from a gradient bound C:
/// |mu_y - mu_z| <= C |y - z| gives 1 - mu_y . mu_z <= C^2 k^2 a^2 / (2 n^2).
inline double calibrated_c_hyp(double gradient_bound, double a, int k) {
  return 0.5 * gradient_bound * gradient_bound * k * k * a * a;
}

/// Local alignment over pairs of nodes at most k a / n apart.
inline HypothesisReport check_hypothesis1(const SpinField& field, int k, double c_hyp) {
  if (k < 1) throw InvalidArgument("check_hypothesis1: k must be >= 1");
  const Lattice& lat = *field.lattice();
  const auto offsets = half_ball_offsets(k);
  double zeta = 0.0;
  for (std::size_t v = 0; v < lat.size(); ++v) {
    const Index3& i = lat.index(v);
    for (const Index3& d : offsets) {
      const std::uint32_t w = lat.find(i + d);
      if (w == Lattice::npos) continue;
      zeta = std::max(zeta, 1.0 - dot(field[v], field[w]));
    }
  }
  Hypothesis1Result r;
  r.k = k;
  r.zeta = std::clamp(zeta, 0.0, 2.0);
  r.threshold = c_hyp / (double(lat.n()) * lat.n());
  r.pass = r.zeta <= r.threshold;
  return {r, std::nullopt};
}

struct Hypothesis3Limits {
  double beta_max = std::numeric_limits<double>::infinity();  // #defects <= beta_max * n
  double c_n = 4.0;                                           // bound at defects
};

/// Node x is a defect iff some neighbour y has |mu_x - mu_y|^2 > c / n^2.
inline HypothesisReport check_hypothesis3(const SpinField& field, double c, const Hypothesis3Limits& limits = {}) {
  if (!(c > 0.0)) throw InvalidArgument("check_hypothesis3: c must be positive");
  const Lattice& lat = *field.lattice();
  const NeighborTable& nt = lat.neighbor_table();
  const double bound = c / (double(lat.n()) * lat.n());
  Hypothesis3Result r;
  r.c = c;
  r.beta_max = limits.beta_max;
  r.c_n = limits.c_n;
  for (std::size_t v = 0; v < lat.size(); ++v) {
    const double m = detail::max_neighbor_sq_diff(field[v], static_cast<std::uint32_t>(v), nt, field.values());
    if (m > bound) {
      r.defects.push_back(static_cast<std::uint32_t>(v));
      r.max_defect_sq_diff = std::max(r.max_defect_sq_diff, m);
    } else {
      r.max_regular_sq_diff = std::max(r.max_regular_sq_diff, m);
    }
  }
  r.pass = static_cast<double>(r.defects.size()) <= limits.beta_max * lat.n() && r.max_defect_sq_diff <= limits.c_n;
  return {std::nullopt, r};
}

/// "i j k mx my mz" per node, lexicographic node order, six significant digits.
inline void write_spin_field(std::ostream& os, const SpinField& field) {
  const Lattice& lat = *field.lattice();
  os << std::setprecision(6);
  for (std::size_t v = 0; v < lat.size(); ++v) {
    const Index3& i = lat.index(v);
    const Vec3& m = field[v];
    os << i[0] << ' ' << i[1] << ' ' << i[2] << ' ' << m.x << ' ' << m.y << ' ' << m.z << '\n';
  }
}

/// Reads the format written by write_spin_field; every lattice node must
/// appear exactly once, in order.
inline SpinField read_spin_field(std::istream& is, const LatticePtr& lattice) {
  std::vector<Vec3> values;
  values.reserve(lattice->size());
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Index3 i{};
    Vec3 m;
    if (!(ls >> i[0] >> i[1] >> i[2] >> m.x >> m.y >> m.z))
      throw InvalidArgument("spin field line " + std::to_string(lineno) + ": expected 'i j k mx my mz'");
    const std::size_t expect = values.size();
    if (expect >= lattice->size() || lattice->index(expect) != i)
      throw InvalidArgument("spin field line " + std::to_string(lineno) + ": node out of lattice order");
    values.push_back(m);
  }
  return SpinField(lattice, std::move(values));
}

}  // namespace spinlab
