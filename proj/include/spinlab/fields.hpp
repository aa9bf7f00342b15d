#pragma once

// Analytic magnetisation fields and applied fields used to drive studies.

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "spinlab/vec3.hpp"

namespace spinlab {

/// Position -> 3-vector field with an optional analytic gradient.
struct SmoothField {
  std::string name;
  std::function<Vec3(const Vec3&)> value;
  std::function<Mat3(const Vec3&)> gradient;  // empty when unavailable
  bool unit_norm = false;
  /// Upper bound of the gradient's Frobenius norm on the domain, when known.
  std::optional<double> gradient_bound;

  Vec3 operator()(const Vec3& x) const { return value(x); }
  bool has_gradient() const { return static_cast<bool>(gradient); }
};

namespace fields {

inline SmoothField constant(const Vec3& u0) {
  SmoothField f;
  f.name = "constant";
  f.value = [u0](const Vec3&) { return u0; };
  f.gradient = [](const Vec3&) { return Mat3::zero(); };
  f.unit_norm = std::abs(norm(u0) - 1.0) < 1e-12;
  f.gradient_bound = 0.0;
  return f;
}

/// In-plane helix m(x) = (cos q.x, sin q.x, 0). |grad m|^2 = |q|^2 everywhere.
inline SmoothField helix(const Vec3& q) {
  SmoothField f;
  f.name = "helix";
  f.value = [q](const Vec3& x) {
    const double t = dot(q, x);
    return Vec3{std::cos(t), std::sin(t), 0.0};
  };
  f.gradient = [q](const Vec3& x) {
    const double t = dot(q, x);
    Mat3 g;
    g[0] = -std::sin(t) * q;
    g[1] = std::cos(t) * q;
    return g;
  };
  f.unit_norm = true;
  f.gradient_bound = norm(q);
  return f;
}

/// Affine field u(x) = u0 + J x; generally not unit norm.
inline SmoothField affine(const Vec3& u0, const Mat3& jacobian) {
  SmoothField f;
  f.name = "affine";
  f.value = [u0, jacobian](const Vec3& x) { return u0 + jacobian * x; };
  f.gradient = [jacobian](const Vec3&) { return jacobian; };
  f.unit_norm = false;
  f.gradient_bound = std::sqrt(frobenius2(jacobian));
  return f;
}

/// Unit field tilting out of plane: polar angle theta0 + k.x, azimuth q.x.
/// Used where a field varying in all three components is needed.
inline SmoothField conical(const Vec3& q, const Vec3& k, double theta0) {
  SmoothField f;
  f.name = "conical";
  f.value = [=](const Vec3& x) {
    const double th = theta0 + dot(k, x);
    const double ph = dot(q, x);
    return Vec3{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
  };
  f.gradient = [=](const Vec3& x) {
    const double th = theta0 + dot(k, x);
    const double ph = dot(q, x);
    Mat3 g;
    g[0] = std::cos(th) * std::cos(ph) * k - std::sin(th) * std::sin(ph) * q;
    g[1] = std::cos(th) * std::sin(ph) * k + std::sin(th) * std::cos(ph) * q;
    g[2] = -std::sin(th) * k;
    return g;
  };
  f.unit_norm = true;
  // |grad m|_F^2 = |k|^2 + sin^2(theta) |q|^2
  f.gradient_bound = std::sqrt(norm2(k) + norm2(q));
  return f;
}

}  // namespace fields

/// Applied (Zeeman) field h_Z.
struct ZeemanField {
  std::string name;
  std::function<Vec3(const Vec3&)> value;
  /// sup |h_Z| over the domain's bounding box.
  double sup_norm = 0.0;

  Vec3 operator()(const Vec3& x) const { return value(x); }

  static ZeemanField zero() { return {"zero", [](const Vec3&) { return Vec3{}; }, 0.0}; }
  static ZeemanField uniform(const Vec3& h) {
    return {"uniform", [h](const Vec3&) { return h; }, norm(h)};
  }
};

}  // namespace spinlab
