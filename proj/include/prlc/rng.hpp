#pragma once

#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <random>

namespace prlc {

// splitmix64 step, used to derive independent substream seeds from a master
// seed plus an index path (run, link, ...).  Chaining the output keeps
// substreams decorrelated without coordinating stream offsets.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t base, std::initializer_list<uint64_t> path) {
  uint64_t s = splitmix64(base);
  for (uint64_t p : path) s = splitmix64(s ^ (p + 0x9e3779b97f4a7c15ull));
  return s;
}

// Deterministic random stream.  All draws go through next_u64 so that a
// stream's consumption is exactly reproducible; bernoulli uses a fixed
// 64-bit threshold and below() uses unbiased multiply-shift rejection.
class Stream {
 public:
  explicit Stream(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Unbiased uniform draw in [0, n).  n must be nonzero.
  uint32_t below(uint32_t n) {
    uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<uint64_t>(m);
    if (lo < n) {
      uint64_t t = (-n) % n;
      while (lo < t) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint32_t>(m >> 64);
  }

  bool bernoulli(double p) {
    if (p <= 0.0) { next_u64(); return false; }
    if (p >= 1.0) { next_u64(); return true; }
    // 2^64 as long double keeps the threshold exact for representable p.
    const long double scale = 18446744073709551616.0L;
    auto threshold = static_cast<uint64_t>(p * scale);
    return next_u64() < threshold;
  }

  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  std::string save() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
  }

  void restore(const std::string& s) {
    std::istringstream is(s);
    is >> eng_;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace prlc
