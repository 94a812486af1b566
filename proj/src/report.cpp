#include "anosov/report.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "anosov/rng.hpp"

namespace anosov {

void VerificationReport::add_margin(const std::string& family, double margin,
                                    const std::string& where, double t) {
  for (auto& r : records) {
    if (r.family == family) {
      if (margin < r.margin) {
        r.margin = margin;
        r.where = where;
        r.t = t;
      }
      return;
    }
  }
  records.push_back({family, margin, where, t});
}

void VerificationReport::set_param(const std::string& name, double value) {
  for (auto& kv : params) {
    if (kv.first == name) {
      kv.second = value;
      return;
    }
  }
  params.emplace_back(name, value);
}

void VerificationReport::note(const std::string& text) { notes.push_back(text); }

double VerificationReport::worst_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : records) m = std::min(m, r.margin);
  return m;
}

const MarginRecord* VerificationReport::find(const std::string& family) const {
  for (const auto& r : records)
    if (r.family == family) return &r;
  return nullptr;
}

void VerificationReport::finalize() { pass = worst_margin() >= -slack; }

std::string VerificationReport::to_text() const {
  std::string out;
  char buf[256];
  out += "suite: " + suite + "\n";
  out += "model: " + model_id + "\n";
  std::snprintf(buf, sizeof buf, "slack: %.17g\n", slack);
  out += buf;
  auto sorted = params;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& kv : sorted) {
    std::snprintf(buf, sizeof buf, "param %s = %.17g\n", kv.first.c_str(),
                  kv.second);
    out += buf;
  }
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "margin %s = %.17g at t=%.17g (%s)\n",
                  r.family.c_str(), r.margin, r.t, r.where.c_str());
    out += buf;
  }
  for (const auto& n : notes) out += "note: " + n + "\n";
  out += pass ? "result: pass\n" : "result: fail\n";
  return out;
}

uint64_t VerificationReport::digest() const { return fnv1a(to_text()); }

}  // namespace anosov
