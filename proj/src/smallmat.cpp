#include "anosov/smallmat.hpp"

#include <algorithm>

namespace anosov {

// Cyclic Jacobi diagonalization of a symmetric 3x3.
void sym_eigen(const Mat3& m, Vec3& evals, Mat3& evecs) {
  Mat3 a = m;
  Mat3 v = Mat3::identity();
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = std::abs(a(0, 1)) + std::abs(a(0, 2)) + std::abs(a(1, 2));
    double diag = std::abs(a(0, 0)) + std::abs(a(1, 1)) + std::abs(a(2, 2));
    if (off <= 1e-16 * (diag + 1e-300)) break;
    for (int p = 0; p < 2; ++p)
      for (int q = p + 1; q < 3; ++q) {
        if (a(p, q) == 0.0) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        Mat3 r = Mat3::identity();
        r(p, p) = c; r(q, q) = c; r(p, q) = s; r(q, p) = -s;
        a = r.transposed() * a * r;
        v = v * r;
      }
  }
  // sort ascending
  int idx[3] = {0, 1, 2};
  double d[3] = {a(0, 0), a(1, 1), a(2, 2)};
  std::sort(idx, idx + 3, [&](int i, int j) { return d[i] < d[j]; });
  Mat3 vs;
  for (int j = 0; j < 3; ++j) {
    evals[j] = d[idx[j]];
    vs.set_col(j, v.col(idx[j]));
  }
  evecs = vs;
}

double opnorm(const Mat3& m) {
  Vec3 ev;
  Mat3 evec;
  sym_eigen(m.transposed() * m, ev, evec);
  return std::sqrt(std::max(0.0, ev[2]));
}

Mat3 spd_sqrt(const Mat3& g) {
  Vec3 ev;
  Mat3 v;
  sym_eigen(g, ev, v);
  Mat3 d = Mat3::zero();
  for (int i = 0; i < 3; ++i) {
    if (ev[i] <= 0) throw std::domain_error("spd_sqrt: matrix not positive");
    d(i, i) = std::sqrt(ev[i]);
  }
  return v * d * v.transposed();
}

Mat3 spd_inv_sqrt(const Mat3& g) {
  Vec3 ev;
  Mat3 v;
  sym_eigen(g, ev, v);
  Mat3 d = Mat3::zero();
  for (int i = 0; i < 3; ++i) {
    if (ev[i] <= 0) throw std::domain_error("spd_inv_sqrt: matrix not positive");
    d(i, i) = 1.0 / std::sqrt(ev[i]);
  }
  return v * d * v.transposed();
}

}  // namespace anosov
