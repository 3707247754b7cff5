#pragma once

#include <array>
#include <cmath>
#include <limits>

#include "haptic/error.hpp"

namespace haptic {

struct Vec3 {
  double x{0.0};
  double y{0.0};
  double z{0.0};

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

  constexpr double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }

  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

/// Positions and displacements share one representation; the alias keeps
/// signatures readable.
using Point3 = Vec3;

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

constexpr double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }

inline bool is_finite(const Vec3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// Row-major 3x3 matrix.
struct Mat3 {
  std::array<std::array<double, 3>, 3> m{};

  static constexpr Mat3 identity() { return diagonal(1.0, 1.0, 1.0); }

  static constexpr Mat3 diagonal(double a, double b, double c) {
    Mat3 r;
    r.m[0][0] = a;
    r.m[1][1] = b;
    r.m[2][2] = c;
    return r;
  }

  constexpr double operator()(int r, int c) const { return m[r][c]; }
  constexpr double& operator()(int r, int c) { return m[r][c]; }

  constexpr Mat3 transposed() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t.m[r][c] = m[c][r];
    return t;
  }

  constexpr double determinant() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  }

  bool is_finite() const {
    for (const auto& row : m)
      for (double v : row)
        if (!std::isfinite(v)) return false;
    return true;
  }

  friend constexpr bool operator==(const Mat3&, const Mat3&) = default;
};

constexpr Vec3 operator*(const Mat3& a, const Vec3& v) {
  return {a.m[0][0] * v.x + a.m[0][1] * v.y + a.m[0][2] * v.z,
          a.m[1][0] * v.x + a.m[1][1] * v.y + a.m[1][2] * v.z,
          a.m[2][0] * v.x + a.m[2][1] * v.y + a.m[2][2] * v.z};
}

constexpr Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r.m[i][j] = a.m[i][0] * b.m[0][j] + a.m[i][1] * b.m[1][j] + a.m[i][2] * b.m[2][j];
  return r;
}

/// Throws GeometryError when the matrix is singular.
inline Mat3 inverse(const Mat3& a) {
  const double det = a.determinant();
  if (!(std::abs(det) > std::numeric_limits<double>::min()) || !std::isfinite(det))
    throw GeometryError("matrix is singular");
  Mat3 r;
  r.m[0][0] = (a.m[1][1] * a.m[2][2] - a.m[1][2] * a.m[2][1]) / det;
  r.m[0][1] = (a.m[0][2] * a.m[2][1] - a.m[0][1] * a.m[2][2]) / det;
  r.m[0][2] = (a.m[0][1] * a.m[1][2] - a.m[0][2] * a.m[1][1]) / det;
  r.m[1][0] = (a.m[1][2] * a.m[2][0] - a.m[1][0] * a.m[2][2]) / det;
  r.m[1][1] = (a.m[0][0] * a.m[2][2] - a.m[0][2] * a.m[2][0]) / det;
  r.m[1][2] = (a.m[0][2] * a.m[1][0] - a.m[0][0] * a.m[1][2]) / det;
  r.m[2][0] = (a.m[1][0] * a.m[2][1] - a.m[1][1] * a.m[2][0]) / det;
  r.m[2][1] = (a.m[0][1] * a.m[2][0] - a.m[0][0] * a.m[2][1]) / det;
  r.m[2][2] = (a.m[0][0] * a.m[1][1] - a.m[0][1] * a.m[1][0]) / det;
  return r;
}

/// Frobenius norm of (MᵀM − I).
inline double orthonormality_defect(const Mat3& a) {
  const Mat3 g = a.transposed() * a;
  double sum = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double d = g.m[i][j] - (i == j ? 1.0 : 0.0);
      sum += d * d;
    }
  return std::sqrt(sum);
}

inline constexpr double kOrthonormalTolerance = 1e-9;

/// x' = linear·x + translation.
///
/// The factories validate their own invariants: `rotation` yields an
/// orthonormal linear part, `scaling` a positive diagonal one. Composites
/// built with `then` inherit validity from their factors.
struct AffineTransform {
  Mat3 linear = Mat3::identity();
  Vec3 translation{};

  static AffineTransform identity() { return {}; }

  static AffineTransform scaling(double s) { return scaling(s, s, s); }

  static AffineTransform scaling(double sx, double sy, double sz) {
    for (double s : {sx, sy, sz})
      if (!(s > 0.0) || !std::isfinite(s))
        throw GeometryError("scale factors must be finite and positive");
    return {Mat3::diagonal(sx, sy, sz), {}};
  }

  /// Right-handed rotation by `angle_rad` about `axis` (any non-zero length).
  static AffineTransform rotation(const Vec3& axis, double angle_rad) {
    const double len = norm(axis);
    if (!(len > 0.0) || !std::isfinite(len) || !std::isfinite(angle_rad))
      throw GeometryError("rotation axis must be finite and non-zero");
    const Vec3 u = axis / len;
    const double c = std::cos(angle_rad);
    const double s = std::sin(angle_rad);
    const double t = 1.0 - c;
    Mat3 r;
    r.m[0] = {t * u.x * u.x + c, t * u.x * u.y - s * u.z, t * u.x * u.z + s * u.y};
    r.m[1] = {t * u.x * u.y + s * u.z, t * u.y * u.y + c, t * u.y * u.z - s * u.x};
    r.m[2] = {t * u.x * u.z - s * u.y, t * u.y * u.z + s * u.x, t * u.z * u.z + c};
    return {r, {}};
  }

  static AffineTransform translate(const Vec3& t) {
    if (!haptic::is_finite(t)) throw GeometryError("translation must be finite");
    return {Mat3::identity(), t};
  }

  Point3 apply(const Point3& p) const { return linear * p + translation; }

  /// Transform that applies *this first, then `next`.
  AffineTransform then(const AffineTransform& next) const {
    return {next.linear * linear, next.linear * translation + next.translation};
  }

  AffineTransform inverse() const {
    const Mat3 inv = haptic::inverse(linear);
    return {inv, -(inv * translation)};
  }

  bool is_rotation(double tol = kOrthonormalTolerance) const {
    return linear.is_finite() && orthonormality_defect(linear) <= tol;
  }

  bool is_positive_scaling() const {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double v = linear.m[i][j];
        if (i == j ? !(v > 0.0) : v != 0.0) return false;
      }
    return linear.is_finite();
  }

  bool is_finite() const { return linear.is_finite() && haptic::is_finite(translation); }
};

}  // namespace haptic
