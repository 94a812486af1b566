#pragma once
// Small fixed-size linear algebra for 3-dimensional flow charts.
// Scalar type is templated so the same expressions run on doubles and on
// truncated Taylor jets (see jet.hpp).

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <type_traits>

namespace anosov {

template <class S>
struct V3 {
  S x{}, y{}, z{};

  S& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  const S& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  V3 operator+(const V3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  V3 operator-(const V3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  V3 operator*(const S& c) const { return {x * c, y * c, z * c}; }
  V3 operator/(const S& c) const { return {x / c, y / c, z / c}; }
  V3& operator+=(const V3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  V3& operator-=(const V3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  V3 operator-() const { return {-x, -y, -z}; }
};

template <class S>
inline V3<S> operator*(const S& c, const V3<S>& v) { return v * c; }
template <class S>
inline V3<S> operator*(double c, const V3<S>& v) { return {v.x * c, v.y * c, v.z * c}; }
template <class S>
  requires(!std::is_same_v<S, double>)
inline V3<S> operator*(const V3<S>& v, double c) { return {v.x * c, v.y * c, v.z * c}; }

template <class S>
inline S dot(const V3<S>& a, const V3<S>& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline double norm(const V3<double>& v) { return std::sqrt(dot(v, v)); }

template <class S>
inline V3<S> cross(const V3<S>& a, const V3<S>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

using Vec3 = V3<double>;

// 3x3 matrix, row major.
template <class S>
struct M3 {
  std::array<S, 9> a{};

  static M3 identity() {
    M3 m;
    m.a = {S(1), S(0), S(0), S(0), S(1), S(0), S(0), S(0), S(1)};
    return m;
  }
  static M3 zero() { return M3{}; }

  S& operator()(int i, int j) { return a[3 * i + j]; }
  const S& operator()(int i, int j) const { return a[3 * i + j]; }

  M3 operator+(const M3& o) const {
    M3 r;
    for (int i = 0; i < 9; ++i) r.a[i] = a[i] + o.a[i];
    return r;
  }
  M3 operator-(const M3& o) const {
    M3 r;
    for (int i = 0; i < 9; ++i) r.a[i] = a[i] - o.a[i];
    return r;
  }
  M3 operator*(const S& c) const {
    M3 r;
    for (int i = 0; i < 9; ++i) r.a[i] = a[i] * c;
    return r;
  }
  M3 operator*(const M3& o) const {
    M3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        S s = a[3 * i] * o.a[j];
        s = s + a[3 * i + 1] * o.a[3 + j];
        s = s + a[3 * i + 2] * o.a[6 + j];
        r.a[3 * i + j] = s;
      }
    return r;
  }
  V3<S> operator*(const V3<S>& v) const {
    return {a[0] * v.x + a[1] * v.y + a[2] * v.z,
            a[3] * v.x + a[4] * v.y + a[5] * v.z,
            a[6] * v.x + a[7] * v.y + a[8] * v.z};
  }
  M3 transposed() const {
    M3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.a[3 * i + j] = a[3 * j + i];
    return r;
  }
  V3<S> col(int j) const { return {a[j], a[3 + j], a[6 + j]}; }
  void set_col(int j, const V3<S>& v) { a[j] = v.x; a[3 + j] = v.y; a[6 + j] = v.z; }
};

template <class S>
  requires(!std::is_same_v<S, double>)
inline M3<S> operator*(const M3<S>& m, double c) {
  M3<S> r;
  for (int i = 0; i < 9; ++i) r.a[i] = m.a[i] * c;
  return r;
}

using Mat3 = M3<double>;

template <class S>
inline S det(const M3<S>& m) {
  return m.a[0] * (m.a[4] * m.a[8] - m.a[5] * m.a[7]) -
         m.a[1] * (m.a[3] * m.a[8] - m.a[5] * m.a[6]) +
         m.a[2] * (m.a[3] * m.a[7] - m.a[4] * m.a[6]);
}

template <class S>
inline M3<S> adjugate(const M3<S>& m) {
  M3<S> r;
  r.a[0] = m.a[4] * m.a[8] - m.a[5] * m.a[7];
  r.a[1] = m.a[2] * m.a[7] - m.a[1] * m.a[8];
  r.a[2] = m.a[1] * m.a[5] - m.a[2] * m.a[4];
  r.a[3] = m.a[5] * m.a[6] - m.a[3] * m.a[8];
  r.a[4] = m.a[0] * m.a[8] - m.a[2] * m.a[6];
  r.a[5] = m.a[2] * m.a[3] - m.a[0] * m.a[5];
  r.a[6] = m.a[3] * m.a[7] - m.a[4] * m.a[6];
  r.a[7] = m.a[1] * m.a[6] - m.a[0] * m.a[7];
  r.a[8] = m.a[0] * m.a[4] - m.a[1] * m.a[3];
  return r;
}

template <class S>
inline M3<S> inverse(const M3<S>& m) {
  S d = det(m);
  return adjugate(m) * (S(1) / d);
}

// Solve m x = b by Cramer-free adjugate (3x3, well conditioned uses only).
template <class S>
inline V3<S> solve(const M3<S>& m, const V3<S>& b) {
  return inverse(m) * b;
}

inline double frobenius(const Mat3& m) {
  double s = 0;
  for (double v : m.a) s += v * v;
  return std::sqrt(s);
}

// Operator 2-norm of a 3x3 via cyclic Jacobi on m^T m (exact enough at 1e-14).
double opnorm(const Mat3& m);

// Symmetric 3x3 eigen-decomposition (Jacobi).  Eigenvalues ascending.
void sym_eigen(const Mat3& m, Vec3& evals, Mat3& evecs);

// Symmetric positive-definite square root / inverse square root.
Mat3 spd_sqrt(const Mat3& g);
Mat3 spd_inv_sqrt(const Mat3& g);

inline Mat3 outer(const Vec3& a, const Vec3& b) {
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = a[i] * b[j];
  return m;
}

}  // namespace anosov
