#pragma once

#include <random>

#include "vpf/ops.hpp"

namespace vpf::tu {

inline Tensor random_tensor(const Shape& s, uint64_t seed, DType dt = DType::f64, double lo = -1.0,
                            double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<size_t>(shape_numel(s)));
  for (auto& x : v) x = u(rng);
  return Tensor::from_values(s, v, dt);
}

inline Var param(const Shape& s, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  return Var(random_tensor(s, seed, DType::f64, lo, hi), true);
}

/// Weighted sum with fixed positive random weights so every output entry
/// matters. Positive weights keep nonnegative outputs from cancelling, which
/// keeps the loss magnitude an honest scale for rounding noise.
inline Var probe_loss(const Var& y, uint64_t seed = 99) {
  return sum(mul(y, constant(random_tensor(y.shape(), seed, y.dtype(), 0.5, 1.5))));
}

}  // namespace vpf::tu
