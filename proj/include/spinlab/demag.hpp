#pragma once

// Stray field of a compactly supported magnetisation on a uniform cubic grid.
//
// The magnetic charge rho = -div m (central differences) is convolved with
// the Newtonian kernel integrated over one cell, giving the scalar potential
// phi with -Lap phi = rho. The field is h = -grad phi (central differences),
// so its central-difference curl vanishes identically and the discrete
// operator m -> h is symmetric negative semi-definite. The convolution is
// evaluated either through zero-padded FFTs (FFTW) or by direct summation of
// the same kernel table.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include "spinlab/error.hpp"
#include "spinlab/fem_projection.hpp"
#include "spinlab/fields.hpp"
#include "spinlab/geometry.hpp"

namespace spinlab {

/// Uniform grid of cubic cells; cell (i, j, k) has centre
/// origin + (i + 1/2, j + 1/2, k + 1/2) h. Storage is x-fastest.
struct GridSpec {
  Vec3 origin;
  double h = 0.0;
  std::array<int, 3> dims{0, 0, 0};

  std::size_t cells() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
  }
  Vec3 center(int i, int j, int k) const { return origin + h * Vec3{i + 0.5, j + 0.5, k + 0.5}; }
  double cell_volume() const { return h * h * h; }

  /// Grid centred on the domain's bounding box with `cells` cells along its
  /// longest side.
  static GridSpec covering(const DomainSpec& domain, int cells) {
    if (cells < 1) throw InvalidArgument("grid needs at least one cell per axis");
    const Box bb = domain.bounding_box();
    const Vec3 ext = bb.hi - bb.lo;
    const double longest = std::max({ext.x, ext.y, ext.z});
    GridSpec g;
    g.h = longest / cells;
    for (int d = 0; d < 3; ++d) {
      g.dims[static_cast<std::size_t>(d)] = std::max(1, static_cast<int>(std::ceil(ext[d] / g.h - 1e-9)));
      g.origin[d] = 0.5 * (bb.lo[d] + bb.hi[d]) - 0.5 * g.dims[static_cast<std::size_t>(d)] * g.h;
    }
    return g;
  }
};

inline bool same_grid(const GridSpec& a, const GridSpec& b) {
  return a.dims == b.dims && a.h == b.h && a.origin == b.origin;
}

/// Cell magnetisation, zero outside the magnetic body.
struct MagGrid {
  GridSpec spec;
  std::vector<Vec3> m;

  explicit MagGrid(const GridSpec& s) : spec(s), m(s.cells()) {}
};

/// Cell value = P_n(mu_n) at the cell centre (zero outside Omega_n).
inline MagGrid rasterize(const PWLField& pwl, const GridSpec& spec) {
  if (spec.h > pwl.lattice().spacing() * (1.0 + 1e-12))
    throw InvalidArgument("rasterize: grid cell " + std::to_string(spec.h) + " is coarser than the lattice spacing " +
                          std::to_string(pwl.lattice().spacing()));
  const DomainSpec& dom = pwl.lattice().domain();
  MagGrid g(spec);
  for (int k = 0; k < spec.dims[2]; ++k)
    for (int j = 0; j < spec.dims[1]; ++j)
      for (int i = 0; i < spec.dims[0]; ++i) {
        const Vec3 c = spec.center(i, j, k);
        if (dom.in_bounding_box(c)) g.m[spec.index(i, j, k)] = pwl(c);
      }
  return g;
}

/// Cell value = u at the cell centre when the centre lies in the domain.
inline MagGrid rasterize_continuum(const SmoothField& u, const DomainSpec& domain, const GridSpec& spec) {
  MagGrid g(spec);
  for (int k = 0; k < spec.dims[2]; ++k)
    for (int j = 0; j < spec.dims[1]; ++j)
      for (int i = 0; i < spec.dims[0]; ++i) {
        const Vec3 c = spec.center(i, j, k);
        if (domain.contains(c)) g.m[spec.index(i, j, k)] = u(c);
      }
  return g;
}

enum class DemagMethod { spectral, direct };

inline const char* to_string(DemagMethod m) { return m == DemagMethod::spectral ? "spectral" : "direct"; }

struct DemagOptions {
  DemagMethod method = DemagMethod::spectral;
  double mu0 = 1.0;
  /// FFT box size relative to the (charge-carrying) grid, per axis.
  double padding = 2.0;
  /// The direct method refuses grids with more charge cells than this.
  std::size_t direct_cell_budget = 8192;
};

struct DemagResult {
  GridSpec spec;
  std::vector<Vec3> h;  // per cell of spec
  /// (mu0/2) ||h_d||^2 over all space, evaluated as -(mu0/2) sum h.m dV.
  double energy = 0.0;
  double mu0 = 1.0;
  DemagMethod method = DemagMethod::spectral;
};

namespace detail {

/// Antiderivative G with d^3 G / dx dy dz = 1 / |r|, valid for nonzero
/// arguments of either sign.
inline long double newton_antiderivative(long double x, long double y, long double z) {
  const long double r = std::sqrt(x * x + y * y + z * z);
  auto log_plus = [r](long double s, long double p, long double q) {
    // log(s + r), stable for s < 0
    return s >= 0 ? std::log(s + r) : std::log((p * p + q * q) / (r - s));
  };
  long double g = 0;
  g += y * z * log_plus(x, y, z);
  g += x * z * log_plus(y, x, z);
  g += x * y * log_plus(z, x, y);
  g -= 0.5L * x * x * std::atan(y * z / (x * r));
  g -= 0.5L * y * y * std::atan(x * z / (y * r));
  g -= 0.5L * z * z * std::atan(x * y / (z * r));
  return g;
}

/// F(d) = integral of 1/|r| over the unit cube centred at integer offset d,
/// for 0 <= d < extent per axis. Layout x-fastest.
inline std::vector<double> newton_cell_table(const std::array<int, 3>& extent) {
  const std::array<int, 3> ce{extent[0] + 1, extent[1] + 1, extent[2] + 1};
  std::vector<long double> corner(static_cast<std::size_t>(ce[0]) * ce[1] * ce[2]);
  auto cidx = [&](int i, int j, int k) {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(ce[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(ce[1]) * static_cast<std::size_t>(k));
  };
  for (int k = 0; k < ce[2]; ++k)
    for (int j = 0; j < ce[1]; ++j)
      for (int i = 0; i < ce[0]; ++i)
        corner[cidx(i, j, k)] = newton_antiderivative(i - 0.5L, j - 0.5L, k - 0.5L);

  std::vector<double> table(static_cast<std::size_t>(extent[0]) * extent[1] * extent[2]);
  for (int k = 0; k < extent[2]; ++k)
    for (int j = 0; j < extent[1]; ++j)
      for (int i = 0; i < extent[0]; ++i) {
        long double s = 0;
        for (int c = 0; c < 8; ++c) {
          const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
          const long double sign = ((di + dj + dk) & 1) ? -1.0L : 1.0L;
          s += sign * corner[cidx(i + di, j + dj, k + dk)];
        }
        // the alternating sum starts at the upper corner
        table[static_cast<std::size_t>(i) + static_cast<std::size_t>(extent[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(extent[1]) * static_cast<std::size_t>(k))] =
            static_cast<double>(-s);
      }
  return table;
}

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t count) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(count, 1)));
  if (!p) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

class FftwPlan {
 public:
  FftwPlan() = default;
  explicit FftwPlan(fftw_plan p) : plan_(p) {
    if (!p) throw Error("FFTW failed to create a plan");
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
  ~FftwPlan() {
    if (plan_) {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
  }
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_ = nullptr;
};

}  // namespace detail

/// Demag solver bound to one grid geometry. The kernel table (and, for the
/// spectral method, its transform) is built once and reused by solve().
class DemagSolver {
 public:
  DemagSolver(const GridSpec& spec, const DemagOptions& options) : spec_(spec), opt_(options) {
    if (!(spec.h > 0.0) || spec.cells() == 0) throw InvalidArgument("demag: empty grid");
    if (!(options.padding >= 2.0)) throw InvalidArgument("demag: padding factor must be >= 2");
    if (!(options.mu0 > 0.0)) throw InvalidArgument("demag: mu0 must be positive");
    for (int d = 0; d < 3; ++d) ext_[static_cast<std::size_t>(d)] = spec.dims[static_cast<std::size_t>(d)] + 2;
    const std::size_t ext_cells = static_cast<std::size_t>(ext_[0]) * ext_[1] * ext_[2];
    if (opt_.method == DemagMethod::direct && ext_cells > opt_.direct_cell_budget)
      throw InvalidArgument("direct demag solver refuses " + std::to_string(ext_cells) + " cells (budget " +
                            std::to_string(opt_.direct_cell_budget) + ")");
    table_ = detail::newton_cell_table(ext_);
    if (opt_.method == DemagMethod::spectral) build_spectrum();
  }

  const GridSpec& spec() const { return spec_; }
  const DemagOptions& options() const { return opt_; }
  /// FFT box per axis (spectral method).
  const std::array<int, 3>& fft_dims() const { return fft_; }

  DemagResult solve(const MagGrid& grid) const {
    if (!same_grid(grid.spec, spec_)) throw InvalidArgument("demag: magnetisation grid does not match the solver grid");
    const std::vector<double> rho = charges(grid);
    std::vector<double> phi =
        opt_.method == DemagMethod::spectral ? potential_spectral(rho) : potential_direct(rho);

    DemagResult r;
    r.spec = spec_;
    r.mu0 = opt_.mu0;
    r.method = opt_.method;
    r.h.resize(spec_.cells());
    const double inv2h = 1.0 / (2.0 * spec_.h);
    double hm = 0.0;
    for (int k = 0; k < spec_.dims[2]; ++k)
      for (int j = 0; j < spec_.dims[1]; ++j)
        for (int i = 0; i < spec_.dims[0]; ++i) {
          const int ei = i + 1, ej = j + 1, ek = k + 1;
          const Vec3 hv{-(phi[eidx(ei + 1, ej, ek)] - phi[eidx(ei - 1, ej, ek)]) * inv2h,
                        -(phi[eidx(ei, ej + 1, ek)] - phi[eidx(ei, ej - 1, ek)]) * inv2h,
                        -(phi[eidx(ei, ej, ek + 1)] - phi[eidx(ei, ej, ek - 1)]) * inv2h};
          const std::size_t c = spec_.index(i, j, k);
          r.h[c] = hv;
          hm += dot(hv, grid.m[c]);
        }
    r.energy = -0.5 * opt_.mu0 * spec_.cell_volume() * hm;
    return r;
  }

 private:
  std::size_t eidx(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(ext_[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(ext_[1]) * static_cast<std::size_t>(k));
  }

  double kernel(int di, int dj, int dk) const {
    const std::size_t id = static_cast<std::size_t>(std::abs(di)) +
                           static_cast<std::size_t>(ext_[0]) * (static_cast<std::size_t>(std::abs(dj)) + static_cast<std::size_t>(ext_[1]) * static_cast<std::size_t>(std::abs(dk)));
    return table_[id];
  }

  double kernel_scale() const { return spec_.h * spec_.h / (4.0 * M_PI); }

  // rho = -div m on the extended grid (one cell of margin on every side)
  std::vector<double> charges(const MagGrid& grid) const {
    std::vector<double> rho(static_cast<std::size_t>(ext_[0]) * ext_[1] * ext_[2], 0.0);
    auto mval = [&](int ei, int ej, int ek, int comp) -> double {
      const int i = ei - 1, j = ej - 1, k = ek - 1;
      if (i < 0 || j < 0 || k < 0 || i >= spec_.dims[0] || j >= spec_.dims[1] || k >= spec_.dims[2]) return 0.0;
      return grid.m[spec_.index(i, j, k)][comp];
    };
    const double inv2h = 1.0 / (2.0 * spec_.h);
    for (int k = 0; k < ext_[2]; ++k)
      for (int j = 0; j < ext_[1]; ++j)
        for (int i = 0; i < ext_[0]; ++i) {
          const double div = (mval(i + 1, j, k, 0) - mval(i - 1, j, k, 0)) + (mval(i, j + 1, k, 1) - mval(i, j - 1, k, 1)) +
                             (mval(i, j, k + 1, 2) - mval(i, j, k - 1, 2));
          rho[eidx(i, j, k)] = -div * inv2h;
        }
    return rho;
  }

  std::vector<double> potential_direct(const std::vector<double>& rho) const {
    std::vector<std::array<int, 3>> src;
    std::vector<double> q;
    for (int k = 0; k < ext_[2]; ++k)
      for (int j = 0; j < ext_[1]; ++j)
        for (int i = 0; i < ext_[0]; ++i)
          if (rho[eidx(i, j, k)] != 0.0) {
            src.push_back({i, j, k});
            q.push_back(rho[eidx(i, j, k)]);
          }
    const double s = kernel_scale();
    std::vector<double> phi(rho.size(), 0.0);
    for (int k = 0; k < ext_[2]; ++k)
      for (int j = 0; j < ext_[1]; ++j)
        for (int i = 0; i < ext_[0]; ++i) {
          double acc = 0.0;
          for (std::size_t t = 0; t < src.size(); ++t)
            acc += kernel(i - src[t][0], j - src[t][1], k - src[t][2]) * q[t];
          phi[eidx(i, j, k)] = s * acc;
        }
    return phi;
  }

  std::size_t fft_real_size() const { return static_cast<std::size_t>(fft_[0]) * fft_[1] * fft_[2]; }
  std::size_t fft_complex_size() const {
    return static_cast<std::size_t>(fft_[0] / 2 + 1) * static_cast<std::size_t>(fft_[1]) * static_cast<std::size_t>(fft_[2]);
  }
  std::size_t fidx(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(fft_[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(fft_[1]) * static_cast<std::size_t>(k));
  }

  void build_spectrum() {
    for (int d = 0; d < 3; ++d) {
      const auto du = static_cast<std::size_t>(d);
      int p = std::max(2 * ext_[du], static_cast<int>(std::ceil(opt_.padding * ext_[du])));
      fft_[du] = p + (p & 1);
    }
    auto in = detail::fftw_buffer<double>(fft_real_size());
    auto out = detail::fftw_buffer<fftw_complex>(fft_complex_size());
    std::fill(in.get(), in.get() + fft_real_size(), 0.0);
    for (int k = -(ext_[2] - 1); k <= ext_[2] - 1; ++k)
      for (int j = -(ext_[1] - 1); j <= ext_[1] - 1; ++j)
        for (int i = -(ext_[0] - 1); i <= ext_[0] - 1; ++i)
          in[fidx((i + fft_[0]) % fft_[0], (j + fft_[1]) % fft_[1], (k + fft_[2]) % fft_[2])] = kernel(i, j, k);
    {
      detail::FftwPlan plan(make_r2c(in.get(), out.get()));
      plan.execute();
    }
    spectrum_.resize(fft_complex_size());
    for (std::size_t t = 0; t < spectrum_.size(); ++t) spectrum_[t] = {out[t][0], out[t][1]};
  }

  fftw_plan make_r2c(double* in, fftw_complex* out) const {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    return fftw_plan_dft_r2c_3d(fft_[2], fft_[1], fft_[0], in, out, FFTW_ESTIMATE);
  }
  fftw_plan make_c2r(fftw_complex* in, double* out) const {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    return fftw_plan_dft_c2r_3d(fft_[2], fft_[1], fft_[0], in, out, FFTW_ESTIMATE);
  }

  std::vector<double> potential_spectral(const std::vector<double>& rho) const {
    const std::size_t nr = fft_real_size();
    const std::size_t nc = fft_complex_size();
    auto buf = detail::fftw_buffer<double>(nr);
    auto spec = detail::fftw_buffer<fftw_complex>(nc);
    std::fill(buf.get(), buf.get() + nr, 0.0);
    for (int k = 0; k < ext_[2]; ++k)
      for (int j = 0; j < ext_[1]; ++j)
        for (int i = 0; i < ext_[0]; ++i) buf[fidx(i, j, k)] = rho[eidx(i, j, k)];
    {
      detail::FftwPlan fwd(make_r2c(buf.get(), spec.get()));
      fwd.execute();
    }
    for (std::size_t t = 0; t < nc; ++t) {
      const std::complex<double> v = std::complex<double>(spec[t][0], spec[t][1]) * spectrum_[t];
      spec[t][0] = v.real();
      spec[t][1] = v.imag();
    }
    {
      detail::FftwPlan inv(make_c2r(spec.get(), buf.get()));
      inv.execute();
    }
    const double s = kernel_scale() / static_cast<double>(nr);
    std::vector<double> phi(rho.size());
    for (int k = 0; k < ext_[2]; ++k)
      for (int j = 0; j < ext_[1]; ++j)
        for (int i = 0; i < ext_[0]; ++i) phi[eidx(i, j, k)] = s * buf[fidx(i, j, k)];
    return phi;
  }

  GridSpec spec_;
  DemagOptions opt_;
  std::array<int, 3> ext_{};
  std::array<int, 3> fft_{};
  std::vector<double> table_;
  std::vector<std::complex<double>> spectrum_;
};

inline DemagResult solve(const MagGrid& grid, const DemagOptions& options = {}) {
  return DemagSolver(grid.spec, options).solve(grid);
}

/// Sum over cells of h(m1) . m2 times the cell volume.
inline double field_dot(const DemagResult& r, const MagGrid& m) {
  if (!same_grid(r.spec, m.spec)) throw InvalidArgument("field_dot: grid mismatch");
  double s = 0.0;
  for (std::size_t c = 0; c < m.m.size(); ++c) s += dot(r.h[c], m.m[c]);
  return s * r.spec.cell_volume();
}

/// Largest central-difference curl over cells at least one cell away from
/// the grid boundary, relative to max |h| / h.
inline double relative_curl(const DemagResult& r) {
  const GridSpec& g = r.spec;
  double hmax = 0.0;
  for (const Vec3& v : r.h) hmax = std::max(hmax, norm(v));
  if (hmax == 0.0) return 0.0;
  double cmax = 0.0;
  auto at = [&](int i, int j, int k) -> const Vec3& { return r.h[g.index(i, j, k)]; };
  for (int k = 1; k + 1 < g.dims[2]; ++k)
    for (int j = 1; j + 1 < g.dims[1]; ++j)
      for (int i = 1; i + 1 < g.dims[0]; ++i) {
        const Vec3 dx = at(i + 1, j, k) - at(i - 1, j, k);
        const Vec3 dy = at(i, j + 1, k) - at(i, j - 1, k);
        const Vec3 dz = at(i, j, k + 1) - at(i, j, k - 1);
        const Vec3 curl{dy.z - dz.y, dz.x - dx.z, dx.y - dy.x};
        cmax = std::max(cmax, norm(curl));
      }
  return 0.5 * cmax / hmax;
}

/// project -> rasterize -> solve.
inline DemagResult demag_discrete(const SpinField& field, const DecompositionPtr& decomposition, const GridSpec& spec,
                                  const DemagOptions& options = {}) {
  return solve(rasterize(project(field, decomposition), spec), options);
}

/// Text dump: header "nx ny nz hx hy hz", then one "vx vy vz" line per cell,
/// x fastest.
inline void write_grid(std::ostream& os, const GridSpec& spec, const std::vector<Vec3>& values) {
  if (values.size() != spec.cells()) throw InvalidArgument("write_grid: value count mismatch");
  const auto old = os.precision(17);
  os << spec.dims[0] << ' ' << spec.dims[1] << ' ' << spec.dims[2] << ' ' << spec.h << ' ' << spec.h << ' ' << spec.h
     << '\n';
  for (const Vec3& v : values) os << v.x << ' ' << v.y << ' ' << v.z << '\n';
  os.precision(old);
}

}  // namespace spinlab
