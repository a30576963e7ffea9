#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace prnu::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Mix a base seed with stream indices (block number, trial number, ...) so
/// that independent work items get independent, reproducible streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = base;
  std::uint64_t out = splitmix64(s);
  s ^= a * 0xd1342543de82ef95ULL;
  out ^= splitmix64(s);
  s ^= b * 0xaf251af3b0f025b5ULL;
  out ^= splitmix64(s);
  s ^= c * 0x9e6c63d0876a9a47ULL;
  out ^= splitmix64(s);
  return out;
}

/// Deterministic random stream. The engine is mt19937_64 (sequence fixed by
/// the standard); distributions are implemented here rather than taken from
/// <random> because the standard leaves those implementation-defined.
class Stream {
public:
  explicit Stream(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1).
  double next_unit() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Rejection sampling, unbiased.
  std::size_t below(std::size_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /// Standard normal via Box-Muller. One value per call; the paired sine
  /// value is discarded to keep the call sequence position-independent.
  double normal() {
    double u1 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
  }

  /// Fill with i.i.d. standard normals, consuming both Box-Muller outputs.
  void fill_normal(std::vector<double>& out) {
    std::size_t i = 0;
    while (i + 1 < out.size()) {
      double u1 = next_unit();
      while (u1 <= 0.0) u1 = next_unit();
      const double u2 = next_unit();
      const double r = std::sqrt(-2.0 * std::log(u1));
      const double t = 6.283185307179586476925 * u2;
      out[i++] = r * std::cos(t);
      out[i++] = r * std::sin(t);
    }
    if (i < out.size()) out[i] = normal();
  }

  /// First k entries of a random permutation of [0, n): sampling without
  /// replacement via partial Fisher-Yates.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
      const std::size_t j = i + below(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

private:
  std::mt19937_64 eng_;
};

}  // namespace prnu::rng
