#pragma once

// Partition-of-unity kernel, truncated sum Phi_n and the averaged field
// m_n = (mu_n * rho_n) / Phi_n.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "spinlab/error.hpp"
#include "spinlab/geometry.hpp"
#include "spinlab/spin_field.hpp"

namespace spinlab {

namespace detail {

inline double exp_ramp(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

}  // namespace detail

/// C-infinity step from 0 (t <= 0) to 1 (t >= 1) with f(t) + f(1 - t) = 1.
inline double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double e0 = detail::exp_ramp(t);
  const double e1 = detail::exp_ramp(1.0 - t);
  return e0 / (e0 + e1);
}

/// Tensorised plateau bump on the unreduced lattice aZ^3.
///
/// Per axis the profile is 1 on [-w/2, w/2], ramps down smoothly and
/// vanishes for |t| >= w, with w = k a / sqrt(3) so that the support cube
/// sits inside the closed ball B(0, k a). Dividing by the sum of all lattice
/// translates (which factorises per axis) turns rho* into an exact partition
/// of unity rho.
class Kernel {
 public:
  Kernel(double a, int k) : a_(a), k_(k), w_(k * a / std::sqrt(3.0)) {
    if (!(a > 0.0)) throw InvalidArgument("kernel: a must be positive");
    if (k < 1) throw InvalidArgument("kernel: k must be >= 1");
    for (int i = -k; i <= k; ++i)
      for (int j = -k; j <= k; ++j)
        for (int l = -k; l <= k; ++l)
          if (i * i + j * j + l * l <= k * k) ++n_k_;
  }

  double a() const { return a_; }
  int k() const { return k_; }
  /// Number of lattice nodes in the closed ball B(0, k a).
  int n_k() const { return n_k_; }
  /// Per-axis half width of the support cube.
  double half_width() const { return w_; }
  double support_radius() const { return k_ * a_; }

  double profile(double t) const {
    const double s = std::abs(t);
    if (s >= w_) return 0.0;
    return smoothstep((w_ - s) / (0.5 * w_));
  }

  /// Sum over j in Z of profile(t - j a); a-periodic and positive.
  double translate_sum(double t) const {
    const double r = t - a_ * std::floor(t / a_);  // in [0, a)
    const int reach = static_cast<int>(std::ceil(w_ / a_)) + 1;
    double s = 0.0;
    for (int j = -reach; j <= reach; ++j) s += profile(r - j * a_);
    return s;
  }

  double rho_star(const Vec3& y) const { return profile(y.x) * profile(y.y) * profile(y.z); }

  double rho(const Vec3& y) const {
    double v = 1.0;
    for (int d = 0; d < 3; ++d) {
      const double p = profile(y[d]);
      if (p == 0.0) return 0.0;
      v *= p / translate_sum(y[d]);
    }
    return v;
  }

  /// rho_n(x) = rho(n x).
  double rho_n(int n, const Vec3& x) const { return rho(static_cast<double>(n) * x); }

 private:
  double a_;
  int k_;
  double w_;
  int n_k_ = 0;
};

inline Kernel build_kernel(double a, int k) { return Kernel(a, k); }

namespace detail {

/// Calls fn(node, weight) for every lattice node with rho_n(y - x) > 0.
template <class Fn>
void for_each_weight(const Kernel& kernel, const Lattice& lat, const Vec3& y, Fn&& fn) {
  const int n = lat.n();
  const double a = lat.a();
  std::array<int, 3> lo{}, hi{};
  for (int d = 0; d < 3; ++d) {
    const double c = n * y[d] / a;
    const double r = kernel.half_width() / a;
    lo[static_cast<std::size_t>(d)] = static_cast<int>(std::floor(c - r));
    hi[static_cast<std::size_t>(d)] = static_cast<int>(std::ceil(c + r));
  }
  for (int i = lo[0]; i <= hi[0]; ++i)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int l = lo[2]; l <= hi[2]; ++l) {
        const Index3 idx{i, j, l};
        const std::uint32_t v = lat.find(idx);
        if (v == Lattice::npos) continue;
        const double w = kernel.rho_n(n, y - lat.position(idx));
        if (w > 0.0) fn(v, w);
      }
}

inline void check_kernel_lattice(const Kernel& kernel, const Lattice& lat) {
  if (std::abs(kernel.a() - lat.a()) > 1e-12 * lat.a())
    throw InvalidArgument("kernel and lattice use different lattice constants");
}

}  // namespace detail

/// Phi_n(y) = sum over the truncated lattice of rho_n(y - x), in [0, 1].
inline double phi_n(const Kernel& kernel, const Lattice& lattice, const Vec3& y) {
  detail::check_kernel_lattice(kernel, lattice);
  double s = 0.0;
  detail::for_each_weight(kernel, lattice, y, [&](std::uint32_t, double w) { s += w; });
  return std::min(s, 1.0);
}

/// m_n(y) = (1 / Phi_n(y)) sum_x mu_x rho_n(y - x).
inline Vec3 average(const Kernel& kernel, const SpinField& field, const Vec3& y) {
  const Lattice& lat = *field.lattice();
  detail::check_kernel_lattice(kernel, lat);
  double s = 0.0;
  Vec3 acc;
  detail::for_each_weight(kernel, lat, y, [&](std::uint32_t v, double w) {
    s += w;
    acc += w * field[v];
  });
  if (!(s > 0.0)) {
    std::ostringstream os;
    os << "average: Phi_n vanishes at " << y << " (point outside the reach of the lattice)";
    throw DomainError(os.str());
  }
  return acc / s;
}

/// The averaged field of one spin configuration.
class AveragedField {
 public:
  AveragedField(Kernel kernel, SpinField field) : kernel_(kernel), field_(std::move(field)) {
    detail::check_kernel_lattice(kernel_, *field_.lattice());
  }

  Vec3 operator()(const Vec3& y) const { return average(kernel_, field_, y); }
  double phi(const Vec3& y) const { return phi_n(kernel_, *field_.lattice(), y); }

  const Kernel& kernel() const { return kernel_; }
  const SpinField& field() const { return field_; }

  /// Smallest Phi_n over the given points; the measured lower bound b.
  double lower_bound(const std::vector<Vec3>& points) const {
    double b = std::numeric_limits<double>::infinity();
    for (const Vec3& y : points) b = std::min(b, phi(y));
    return b;
  }

 private:
  Kernel kernel_;
  SpinField field_;
};

/// Cell-centred r^3 grid over the domain's bounding box, restricted to the
/// domain. Fixed across a sweep so rows stay comparable.
inline std::vector<Vec3> evaluation_grid(const DomainSpec& domain, int r) {
  if (r < 1) throw InvalidArgument("evaluation grid resolution must be >= 1");
  const Box bb = domain.bounding_box();
  std::vector<Vec3> pts;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      for (int l = 0; l < r; ++l) {
        const Vec3 p{bb.lo.x + (i + 0.5) * (bb.hi.x - bb.lo.x) / r, bb.lo.y + (j + 0.5) * (bb.hi.y - bb.lo.y) / r,
                     bb.lo.z + (l + 0.5) * (bb.hi.z - bb.lo.z) / r};
        if (domain.contains(p)) pts.push_back(p);
      }
  return pts;
}

}  // namespace spinlab
