#pragma once

#include <array>
#include <cmath>

namespace hsplat {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

struct Vec2 {
  double x = 0, y = 0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
};

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x; y += o.y; z += o.z;
    return *this;
  }
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline double norm(const Vec2& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
  double n = norm(v);
  return {v.x / n, v.y / n, v.z / n};
}

/// Quaternion as (w, x, y, z).
struct Vec4 {
  double w = 1, x = 0, y = 0, z = 0;

  double& operator[](int i) { return i == 0 ? w : (i == 1 ? x : (i == 2 ? y : z)); }
  double operator[](int i) const { return i == 0 ? w : (i == 1 ? x : (i == 2 ? y : z)); }

  Vec4 operator+(const Vec4& o) const { return {w + o.w, x + o.x, y + o.y, z + o.z}; }
  Vec4 operator-(const Vec4& o) const { return {w - o.w, x - o.x, y - o.y, z - o.z}; }
  Vec4 operator*(double s) const { return {w * s, x * s, y * s, z * s}; }
  Vec4 operator/(double s) const { return {w / s, x / s, y / s, z / s}; }
};

inline double dot(const Vec4& a, const Vec4& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

inline double norm(const Vec4& q) { return std::sqrt(dot(q, q)); }

inline Vec4 normalized(const Vec4& q) {
  double n = norm(q);
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

/// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double& operator()(int r, int c) { return m[r * 3 + c]; }
  double operator()(int r, int c) const { return m[r * 3 + c]; }

  Vec3 row(int r) const { return {m[r * 3], m[r * 3 + 1], m[r * 3 + 2]}; }
  Vec3 col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }

  Vec3 operator*(const Vec3& v) const {
    return {dot(row(0), v), dot(row(1), v), dot(row(2), v)};
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }
  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }

  static Mat3 from_rows(const Vec3& a, const Vec3& b, const Vec3& c) {
    Mat3 r;
    r.m = {a.x, a.y, a.z, b.x, b.y, b.z, c.x, c.y, c.z};
    return r;
  }
};

/// Rotation matrix of a unit quaternion (w, x, y, z).
inline Mat3 quat_to_mat(const Vec4& q) {
  double w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 r;
  r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
         2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
  return r;
}

/// Partial derivative of quat_to_mat with respect to quaternion component k
/// (0=w, 1=x, 2=y, 3=z), evaluated at a unit quaternion.
inline Mat3 quat_to_mat_deriv(const Vec4& q, int k) {
  double w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 r;
  switch (k) {
    case 0: r.m = {0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0}; break;
    case 1: r.m = {0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x}; break;
    case 2: r.m = {-4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y}; break;
    default: r.m = {-4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0}; break;
  }
  return r;
}

/// Quaternion rotating unit vector `from` onto unit vector `to`.
inline Vec4 quat_between(const Vec3& from, const Vec3& to) {
  double c = dot(from, to);
  if (c < -1.0 + 1e-12) {
    // Antipodal: rotate pi about any axis orthogonal to `from`.
    Vec3 axis = std::abs(from.x) < 0.9 ? cross(from, Vec3{1, 0, 0}) : cross(from, Vec3{0, 1, 0});
    axis = normalized(axis);
    return {0, axis.x, axis.y, axis.z};
  }
  Vec3 axis = cross(from, to);
  Vec4 q{1.0 + c, axis.x, axis.y, axis.z};
  return normalized(q);
}

/// Symmetric 2x2 matrix stored as (a, b, c) for [[a, b], [b, c]].
struct Sym2 {
  double a = 0, b = 0, c = 0;

  double det() const { return a * c - b * b; }
  Sym2 inverse() const {
    double d = det();
    return {c / d, -b / d, a / d};
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

} // namespace hsplat
