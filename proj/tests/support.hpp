#pragma once

#include <cstdint>
#include <random>

#include "das/autodiff.hpp"
#include "das/ops.hpp"
#include "das/tensor.hpp"

namespace das::test {

inline Tensor random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(s);
  for (double& v : t.data()) v = d(rng);
  return t;
}

inline Tensor gaussian_tensor(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Tensor t(s);
  for (double& v : t.data()) v = d(rng);
  return t;
}

inline void randomize(Tensor& t, std::uint64_t seed, double scale) {
  t = random_tensor(t.shape(), seed, -scale, scale);
}

// sum(y * r) for a fixed random r; avoids losses whose gradient vanishes identically.
inline Var probe_loss(Var y, std::uint64_t seed) {
  Var r = y.graph().input(random_tensor(y.shape(), seed));
  return ops::sum(ops::mul(y, r));
}

}  // namespace das::test
