#pragma once

#include <array>
#include <cmath>
#include <ostream>

namespace spinlab {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr Vec3 operator/(Vec3 a, double s) { return a *= (1.0 / s); }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;

  friend std::ostream& operator<<(std::ostream& os, const Vec3& v) {
    return os << '(' << v.x << ", " << v.y << ", " << v.z << ')';
  }
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline bool is_finite(const Vec3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// Row-major 3x3 matrix. For field gradients, row c holds the spatial
/// derivatives of component c.
struct Mat3 {
  std::array<Vec3, 3> rows{};

  constexpr Vec3& operator[](int r) { return rows[static_cast<std::size_t>(r)]; }
  constexpr const Vec3& operator[](int r) const { return rows[static_cast<std::size_t>(r)]; }

  constexpr Vec3 operator*(const Vec3& v) const { return {dot(rows[0], v), dot(rows[1], v), dot(rows[2], v)}; }

  static constexpr Mat3 zero() { return {}; }
};

constexpr double frobenius2(const Mat3& m) { return norm2(m[0]) + norm2(m[1]) + norm2(m[2]); }

constexpr Mat3 transpose(const Mat3& m) {
  Mat3 t;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t[c][r] = m[r][c];
  return t;
}

constexpr double determinant(const Mat3& m) { return dot(m[0], cross(m[1], m[2])); }

/// Inverse via cofactors; caller checks the determinant.
constexpr Mat3 inverse(const Mat3& m) {
  const double det = determinant(m);
  Mat3 cof;
  cof[0] = cross(m[1], m[2]);
  cof[1] = cross(m[2], m[0]);
  cof[2] = cross(m[0], m[1]);
  // columns of the inverse are the cofactor rows scaled by 1/det
  Mat3 inv = transpose(cof);
  for (int r = 0; r < 3; ++r) inv[r] *= 1.0 / det;
  return inv;
}

}  // namespace spinlab
