#pragma once
// Deterministic random streams.  Implementation-defined library distributions
// are avoided so that reports are byte-identical across platforms and worker
// counts: every sample index owns its own splitmix-derived stream.

#include <cmath>
#include <cstdint>
#include <string_view>

namespace anosov {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// FNV-1a, used both for suite-name seeding and report digests.
inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // warm up: decorrelate trivially related seeds
    for (int i = 0; i < 4; ++i) splitmix64(state_);
  }

  // stream for sample `idx` of suite `name` under master seed
  static Rng for_sample(uint64_t master, std::string_view suite, uint64_t idx) {
    uint64_t s = fnv1a(suite) ^ (master * 0x9e3779b97f4a7c15ull);
    s ^= (idx + 1) * 0xd1342543de82ef95ull;
    return Rng(s);
  }

  uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // standard normal (Box-Muller, always consumes two draws)
  double normal() {
    double u1 = uniform(), u2 = uniform();
    if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

 private:
  uint64_t state_;
};

}  // namespace anosov
