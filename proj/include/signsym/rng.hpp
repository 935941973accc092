#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "signsym/tensor.hpp"

namespace signsym {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Combine two identifiers into one stream id.
inline std::uint64_t stream_id(std::uint64_t a, std::uint64_t b) { return splitmix64(a) ^ (b * 0x9e3779b97f4a7c15ULL); }

/// Deterministic generator keyed by (seed, stream-id).
///
/// Built on std::mt19937_64, whose output sequence is fixed by the standard;
/// all conversions to floating point and integer ranges are done here rather
/// than through <random> distributions, whose algorithms are
/// implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), engine_(splitmix64(seed) ^ splitmix64(~stream)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do x = engine_();
    while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// I.i.d. draws in [lo, hi), row-major order.
inline Tensor sample_uniform(SeededRng& rng, const Shape& shape, double lo, double hi) {
  if (!(lo < hi)) throw RangeError("sample_uniform: need lo < hi, got [" + std::to_string(lo) + ", " +
                                   std::to_string(hi) + ")");
  Tensor out(shape);
  for (auto& v : out.span()) v = rng.uniform(lo, hi);
  return out;
}

inline Tensor sample_normal(SeededRng& rng, const Shape& shape, double mean, double stddev) {
  Tensor out(shape);
  for (auto& v : out.span()) v = mean + stddev * rng.normal();
  return out;
}

}  // namespace signsym
