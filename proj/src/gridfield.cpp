#include "anosov/gridfield.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "anosov/metric_one.hpp"

namespace anosov {

Mat3 spd_project(const Mat3& g) {
  Mat3 s;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s(i, j) = 0.5 * (g(i, j) + g(j, i));
  // Sylvester minors; eigen-floor only when positivity is actually broken
  double m1 = s(0, 0);
  double m2 = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
  double m3 = det(s);
  if (m1 > 0 && m2 > 0 && m3 > 0) return s;
  Vec3 ev;
  Mat3 q;
  sym_eigen(s, ev, q);
  for (int i = 0; i < 3; ++i) ev[i] = std::max(ev[i], 1e-12);
  Mat3 d = Mat3::zero();
  d(0, 0) = ev.x;
  d(1, 1) = ev.y;
  d(2, 2) = ev.z;
  return q * (d * q.transposed());
}

namespace {

inline int wrap(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

// Catmull-Rom weights for fractional position u in [0,1).
inline void cr_weights(double u, double w[4]) {
  double u2 = u * u, u3 = u2 * u;
  w[0] = 0.5 * (-u3 + 2 * u2 - u);
  w[1] = 0.5 * (3 * u3 - 5 * u2 + 2);
  w[2] = 0.5 * (-3 * u3 + 4 * u2 + u);
  w[3] = 0.5 * (u3 - u2);
}

}  // namespace

Mat3 MetricField::fetch(int i, int j, int k) const {
  int ii = wrap(i, grid_n), jj = wrap(j, grid_n);
  if (k >= 0 && k < grid_ns) return at(ii, jj, k);
  // climb through the deck: G(x, s+roof) = D^T G(Ax, s) D
  Mat3 pre = Mat3::identity(), post = Mat3::identity();
  while (k >= grid_ns) {
    k -= grid_ns;
    int ni = wrap(2 * ii + jj, grid_n), nj = wrap(ii + jj, grid_n);
    ii = ni;
    jj = nj;
    pre = FlowModel::deck().transposed() * pre;
    post = post * FlowModel::deck();
  }
  while (k < 0) {
    k += grid_ns;
    int ni = wrap(ii - jj, grid_n), nj = wrap(-ii + 2 * jj, grid_n);
    ii = ni;
    jj = nj;
    pre = FlowModel::deck_inv().transposed() * pre;
    post = post * FlowModel::deck_inv();
  }
  return pre * (at(ii, jj, k) * post);
}

Mat3 MetricField::gram_interp(const Vec3& p) const {
  double fx = p.x - std::floor(p.x);
  double fy = p.y - std::floor(p.y);
  double fs = p.z / roof;
  fs -= std::floor(fs);

  double gx = fx * grid_n, gy = fy * grid_n, gs = fs * grid_ns;
  int i0 = (int)std::floor(gx), j0 = (int)std::floor(gy),
      k0 = (int)std::floor(gs);
  double wx[4], wy[4], ws[4];
  cr_weights(gx - i0, wx);
  cr_weights(gy - j0, wy);
  cr_weights(gs - k0, ws);

  Mat3 acc = Mat3::zero();
  for (int dk = -1; dk <= 2; ++dk) {
    Mat3 layer = Mat3::zero();
    for (int di = -1; di <= 2; ++di)
      for (int dj = -1; dj <= 2; ++dj) {
        double w = wx[di + 1] * wy[dj + 1];
        if (w == 0.0) continue;
        layer = layer + fetch(i0 + di, j0 + dj, k0 + dk) * w;
      }
    acc = acc + layer * ws[dk + 1];
  }
  return spd_project(acc);
}

double MetricField::inner(const Vec3& p, const Vec3& v, const Vec3& w) const {
  return dot(v, gram_interp(p) * w);
}

double MetricField::norm(const Vec3& p, const Vec3& v) const {
  return std::sqrt(inner(p, v, v));
}

MetricField build_metric_field(const FlowModel& m, const AveragingParams& p,
                               int grid_n) {
  if (grid_n < 8)
    throw std::invalid_argument("build_metric_field: need >= 8 nodes/period");
  MetricField f;
  f.which = 1;
  f.grid_n = grid_n;
  f.grid_ns = std::max(8, (int)std::llround(grid_n * m.roof));
  f.roof = m.roof;
  f.model_id = m.id();
  f.params = p;
  f.interp_budget = m.metric == BaseMetric::wobbled ? 0.35 : 2e-4;
  f.gram.resize(size_t(grid_n) * grid_n * f.grid_ns);

  int nthreads = (int)std::min(8u, std::thread::hardware_concurrency());
  nthreads = std::max(1, nthreads);
  auto work = [&](int k_begin, int k_end) {
    for (int k = k_begin; k < k_end; ++k)
      for (int i = 0; i < grid_n; ++i)
        for (int j = 0; j < grid_n; ++j) {
          Vec3 x{double(i) / grid_n, double(j) / grid_n,
                 m.roof * double(k) / f.grid_ns};
          f.at(i, j, k) = metric_one_gram(m, p, x);
        }
  };
  if (nthreads == 1 || f.grid_ns < 2 * nthreads) {
    work(0, f.grid_ns);
  } else {
    std::vector<std::thread> pool;
    int per = (f.grid_ns + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      int a = t * per, b = std::min(f.grid_ns, a + per);
      if (a < b) pool.emplace_back(work, a, b);
    }
    for (auto& th : pool) th.join();
  }

  // SPD check and uniform-equivalence constants at the grid points
  f.equiv_lower_sq = 1e300;
  f.equiv_upper_sq = 0.0;
  for (int k = 0; k < f.grid_ns; ++k)
    for (int i = 0; i < grid_n; ++i)
      for (int j = 0; j < grid_n; ++j) {
        const Mat3& g = f.at(i, j, k);
        Vec3 x{double(i) / grid_n, double(j) / grid_n,
               m.roof * double(k) / f.grid_ns};
        Mat3 r = spd_inv_sqrt(m.gram_ref(x));
        Mat3 rel = r * (g * r);
        Vec3 ev;
        Mat3 q;
        sym_eigen(rel, ev, q);
        if (!(ev.x > 0)) {
          char buf[96];
          std::snprintf(buf, sizeof buf,
                        "metric field not positive at node (%d,%d,%d)", i, j,
                        k);
          throw std::runtime_error(buf);
        }
        f.equiv_lower_sq = std::min(f.equiv_lower_sq, ev.x);
        f.equiv_upper_sq = std::max(f.equiv_upper_sq, ev.z);
      }
  return f;
}

void save_metric_field(const MetricField& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  char head[640];
  std::snprintf(head, sizeof head,
                "gramfield 1\nmodel %s\nmetric %d\ngrid %d %d %d\n"
                "roof %.17g\nwindow %.17g %.17g %.17g %.17g %.17g %d\n"
                "rates %.17g %.17g %.17g %.17g\n"
                "equiv %.17g %.17g\nbudget %.17g\npayload\n",
                f.model_id.c_str(), f.which, f.grid_n, f.grid_n, f.grid_ns,
                f.roof, f.params.window_length, f.params.short_threshold,
                f.params.k_constant, f.params.sigma, f.params.split_a,
                f.params.nodes_per_unit, f.params.lambda, f.params.c_star,
                f.params.beta, f.params.sigma_cap, f.equiv_lower_sq,
                f.equiv_upper_sq, f.interp_budget);
  out << head;
  // payload: row-major 64-bit floats (this build targets little-endian hosts)
  static_assert(sizeof(double) == 8);
  static_assert(sizeof(Mat3) == 9 * sizeof(double));
  out.write(reinterpret_cast<const char*>(f.gram.data()->a.data()),
            std::streamsize(f.gram.size() * 9 * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

MetricField load_metric_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  MetricField f;
  std::string line;
  if (!std::getline(in, line) || line != "gramfield 1")
    throw std::runtime_error("bad field header in " + path);
  int ny = 0;
  while (std::getline(in, line)) {
    if (line == "payload") break;
    char key[32];
    if (std::sscanf(line.c_str(), "%31s", key) != 1) continue;
    if (std::strcmp(key, "model") == 0) {
      f.model_id = line.substr(6);
    } else if (std::strcmp(key, "metric") == 0) {
      std::sscanf(line.c_str(), "metric %d", &f.which);
    } else if (std::strcmp(key, "grid") == 0) {
      std::sscanf(line.c_str(), "grid %d %d %d", &f.grid_n, &ny, &f.grid_ns);
    } else if (std::strcmp(key, "roof") == 0) {
      std::sscanf(line.c_str(), "roof %lg", &f.roof);
    } else if (std::strcmp(key, "window") == 0) {
      std::sscanf(line.c_str(), "window %lg %lg %lg %lg %lg %d",
                  &f.params.window_length, &f.params.short_threshold,
                  &f.params.k_constant, &f.params.sigma, &f.params.split_a,
                  &f.params.nodes_per_unit);
    } else if (std::strcmp(key, "rates") == 0) {
      std::sscanf(line.c_str(), "rates %lg %lg %lg %lg", &f.params.lambda,
                  &f.params.c_star, &f.params.beta, &f.params.sigma_cap);
    } else if (std::strcmp(key, "equiv") == 0) {
      std::sscanf(line.c_str(), "equiv %lg %lg", &f.equiv_lower_sq,
                  &f.equiv_upper_sq);
    } else if (std::strcmp(key, "budget") == 0) {
      std::sscanf(line.c_str(), "budget %lg", &f.interp_budget);
    }
  }
  if (f.grid_n < 1 || ny != f.grid_n || f.grid_ns < 1)
    throw std::runtime_error("bad field dimensions in " + path);
  f.gram.resize(size_t(f.grid_n) * f.grid_n * f.grid_ns);
  in.read(reinterpret_cast<char*>(f.gram.data()->a.data()),
          std::streamsize(f.gram.size() * 9 * sizeof(double)));
  if (in.gcount() != std::streamsize(f.gram.size() * 9 * sizeof(double)))
    throw std::runtime_error("truncated payload in " + path);
  return f;
}

}  // namespace anosov
