#include "anosov/metric_two.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "anosov/metric_one.hpp"

namespace anosov {

namespace {

inline double gnorm(const Mat3& g, const Vec3& v) {
  return std::sqrt(std::max(0.0, dot(v, g * v)));
}

}  // namespace

SplitData metric_two_data(const FlowModel& m, const AveragingParams& p,
                          const PushedFoliation& stable,
                          const PushedFoliation& unstable, const Vec3& x,
                          const Mat3* gram1, double h) {
  Vec3 q = m.normalize(x);
  Mat3 g1 = gram1 ? *gram1 : metric_one_gram(m, p, q, h);
  GraphFrame f = graph_frame_with(m, q, g1);
  GraphOperator us = stable.eval(m, p, q, &g1, h);
  GraphOperator uu = unstable.eval(m, p, q, &g1, h);

  SplitData d;
  d.gram1 = g1;
  d.e_s = graph_direction(f, us);
  d.e_s = d.e_s / gnorm(g1, d.e_s);
  d.e_u = graph_direction(f, uu);
  d.e_u = d.e_u / gnorm(g1, d.e_u);
  d.e_f = f.f_hat;

  // averaged-metric volume of the unit triple gauges transversality
  Mat3 r = spd_sqrt(g1);
  Mat3 tri;
  tri.set_col(0, r * d.e_s);
  tri.set_col(1, r * d.e_u);
  tri.set_col(2, r * d.e_f);
  d.volume = std::abs(det(tri));
  if (!(d.volume >= 0.05))
    throw std::runtime_error(
        "degenerate splitting: foliation directions lost transversality");

  Mat3 frame;
  frame.set_col(0, d.e_s);
  frame.set_col(1, d.e_u);
  frame.set_col(2, d.e_f);
  Mat3 fi = inverse(frame);
  d.proj_s = outer(d.e_s, Vec3{fi(0, 0), fi(0, 1), fi(0, 2)});
  d.proj_u = outer(d.e_u, Vec3{fi(1, 0), fi(1, 1), fi(1, 2)});
  d.proj_f = outer(d.e_f, Vec3{fi(2, 0), fi(2, 1), fi(2, 2)});
  d.gram2 = d.proj_s.transposed() * (g1 * d.proj_s) +
            d.proj_u.transposed() * (g1 * d.proj_u) +
            d.proj_f.transposed() * (g1 * d.proj_f);
  return d;
}

std::pair<MetricField, ProjectorField> build_metric_two(
    const FlowModel& m, const AveragingParams& p, const MetricField& field1,
    const PushedFoliation& stable, const PushedFoliation& unstable,
    int grid_n) {
  if (field1.which != 1)
    throw std::invalid_argument("build_metric_two wants the averaged field");
  if (field1.model_id != m.id() || stable.smoothed.model_id != m.id() ||
      unstable.smoothed.model_id != m.id())
    throw std::invalid_argument("field/foliation belongs to another model");
  if (grid_n < 8)
    throw std::invalid_argument("build_metric_two: need >= 8 nodes/period");

  MetricField f2;
  f2.which = 2;
  f2.grid_n = grid_n;
  f2.grid_ns = std::max(8, (int)std::llround(grid_n * m.roof));
  f2.roof = m.roof;
  f2.model_id = m.id();
  f2.params = field1.params;
  f2.interp_budget = field1.interp_budget;
  f2.gram.resize(size_t(grid_n) * grid_n * f2.grid_ns);

  ProjectorField pf;
  pf.grid_n = grid_n;
  pf.grid_ns = f2.grid_ns;
  pf.roof = m.roof;
  pf.model_id = m.id();
  pf.pi_s.resize(f2.gram.size());
  pf.pi_u.resize(f2.gram.size());
  pf.pi_f.resize(f2.gram.size());

  const bool aligned =
      field1.grid_n == grid_n && field1.grid_ns == f2.grid_ns;
  auto work = [&](int k_begin, int k_end) {
    for (int k = k_begin; k < k_end; ++k)
      for (int i = 0; i < grid_n; ++i)
        for (int j = 0; j < grid_n; ++j) {
          Vec3 x{double(i) / grid_n, double(j) / grid_n,
                 m.roof * double(k) / f2.grid_ns};
          SplitData d;
          if (aligned) {
            Mat3 g1 = field1.at(i, j, k);
            d = metric_two_data(m, p, stable, unstable, x, &g1);
          } else {
            d = metric_two_data(m, p, stable, unstable, x);
          }
          size_t n = pf.idx(i, j, k);
          f2.at(i, j, k) = d.gram2;
          pf.pi_s[n] = d.proj_s;
          pf.pi_u[n] = d.proj_u;
          pf.pi_f[n] = d.proj_f;
        }
  };
  int nthreads = (int)std::min(8u, std::thread::hardware_concurrency());
  nthreads = std::max(1, nthreads);
  if (nthreads == 1 || f2.grid_ns < 2 * nthreads) {
    work(0, f2.grid_ns);
  } else {
    std::vector<std::thread> pool;
    int per = (f2.grid_ns + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      int a = t * per, b = std::min(f2.grid_ns, a + per);
      if (a < b) pool.emplace_back(work, a, b);
    }
    for (auto& th : pool) th.join();
  }

  // node checks: positivity, block orthogonality, equivalence constants
  f2.equiv_lower_sq = 1e300;
  f2.equiv_upper_sq = 0.0;
  for (int k = 0; k < f2.grid_ns; ++k)
    for (int i = 0; i < grid_n; ++i)
      for (int j = 0; j < grid_n; ++j) {
        size_t n = pf.idx(i, j, k);
        const Mat3& g2 = f2.at(i, j, k);
        Mat3 cross = pf.pi_s[n].transposed() * (g2 * pf.pi_u[n]);
        double scale = opnorm(g2);
        if (frobenius(cross) > 1e-8 * scale) {
          char buf[96];
          std::snprintf(buf, sizeof buf,
                        "metric blocks not orthogonal at node (%d,%d,%d)", i,
                        j, k);
          throw std::runtime_error(buf);
        }
        Vec3 x{double(i) / grid_n, double(j) / grid_n,
               m.roof * double(k) / f2.grid_ns};
        Mat3 r = spd_inv_sqrt(m.gram_ref(x));
        Mat3 rel = r * (g2 * r);
        Vec3 ev;
        Mat3 q;
        sym_eigen(rel, ev, q);
        if (!(ev.x > 0)) {
          char buf[96];
          std::snprintf(buf, sizeof buf,
                        "orthogonalized metric not positive at node (%d,%d,%d)",
                        i, j, k);
          throw std::runtime_error(buf);
        }
        f2.equiv_lower_sq = std::min(f2.equiv_lower_sq, ev.x);
        f2.equiv_upper_sq = std::max(f2.equiv_upper_sq, ev.z);
      }
  return {std::move(f2), std::move(pf)};
}

void save_projector_field(const ProjectorField& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  char head[256];
  std::snprintf(head, sizeof head,
                "projfield 1\nmodel %s\ngrid %d %d %d\nroof %.17g\npayload\n",
                f.model_id.c_str(), f.grid_n, f.grid_n, f.grid_ns, f.roof);
  out << head;
  static_assert(sizeof(Mat3) == 9 * sizeof(double));
  auto dump = [&](const std::vector<Mat3>& v) {
    out.write(reinterpret_cast<const char*>(v.data()->a.data()),
              std::streamsize(v.size() * 9 * sizeof(double)));
  };
  dump(f.pi_s);
  dump(f.pi_u);
  dump(f.pi_f);
  if (!out) throw std::runtime_error("write failed: " + path);
}

ProjectorField load_projector_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  ProjectorField f;
  std::string line;
  if (!std::getline(in, line) || line != "projfield 1")
    throw std::runtime_error("bad field header in " + path);
  int ny = 0;
  while (std::getline(in, line)) {
    if (line == "payload") break;
    char key[32];
    if (std::sscanf(line.c_str(), "%31s", key) != 1) continue;
    if (std::strcmp(key, "model") == 0) {
      f.model_id = line.substr(6);
    } else if (std::strcmp(key, "grid") == 0) {
      std::sscanf(line.c_str(), "grid %d %d %d", &f.grid_n, &ny, &f.grid_ns);
    } else if (std::strcmp(key, "roof") == 0) {
      std::sscanf(line.c_str(), "roof %lg", &f.roof);
    }
  }
  if (f.grid_n < 2 || f.grid_ns < 2 || f.grid_n != ny)
    throw std::runtime_error("bad field geometry in " + path);
  size_t total = size_t(f.grid_n) * f.grid_n * f.grid_ns;
  f.pi_s.resize(total);
  f.pi_u.resize(total);
  f.pi_f.resize(total);
  auto slurp = [&](std::vector<Mat3>& v) {
    in.read(reinterpret_cast<char*>(v.data()->a.data()),
            std::streamsize(v.size() * 9 * sizeof(double)));
  };
  slurp(f.pi_s);
  slurp(f.pi_u);
  slurp(f.pi_f);
  if (!in) throw std::runtime_error("truncated field payload in " + path);
  return f;
}

}  // namespace anosov
