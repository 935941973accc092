#pragma once

#include <cmath>
#include <functional>

#include "signsym/network.hpp"
#include "signsym/rng.hpp"

namespace signsym::testing {

inline Tensor random_tensor(std::uint64_t seed, const Shape& shape, double lo = -1, double hi = 1) {
  SeededRng rng(seed, 0x7e57);
  return sample_uniform(rng, shape, lo, hi);
}

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

/// Central difference of f over every coordinate of t (t is restored).
inline Tensor central_difference(Tensor& t, const std::function<double()>& f, double h = 1e-5) {
  Tensor grad(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double saved = t[i];
    t[i] = saved + h;
    const double up = f();
    t[i] = saved - h;
    const double down = f();
    t[i] = saved;
    grad[i] = (up - down) / (2 * h);
  }
  return grad;
}

/// Two dense layers (tanh hidden) feeding a 1-unit identity head.
inline Network xor_net(std::uint64_t seed) {
  return make_network({2}, parse_architecture("dense8:tanh"), Head::classifier(1), seed);
}

inline Tensor xor_inputs() { return Tensor::from_rows({{0, 0}, {0, 1}, {1, 0}, {1, 1}}); }
inline Tensor xor_targets() { return Tensor::from_rows({{0}, {1}, {1}, {0}}); }

}  // namespace signsym::testing
