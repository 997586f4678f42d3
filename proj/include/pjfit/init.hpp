#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pjfit/errors.hpp"
#include "pjfit/rng.hpp"
#include "pjfit/tensor.hpp"

namespace pjfit {

/// Glorot/Xavier uniform bound sqrt(6 / (fan_in + fan_out)).
inline double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  if (fan_in == 0 || fan_out == 0) {
    throw ConfigError("glorot fan sizes must be positive");
  }
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// Matrices are stored [out x in]. Vectors use fan_in = length, fan_out = 1.
inline double glorot_bound(const Shape& shape) {
  if (shape.empty()) throw ConfigError("glorot_init needs rank >= 1");
  for (auto extent : shape) {
    if (extent == 0) throw ConfigError("glorot_init on zero extent " + shape_str(shape));
  }
  if (shape.size() == 1) return glorot_bound(shape[0], 1);
  return glorot_bound(shape[1], shape[0]);
}

template <typename T>
Tensor<T> glorot_init(const Shape& shape, Rng& rng, bool requires_grad = true) {
  const double bound = glorot_bound(shape);
  std::vector<T> values(numel(shape));
  for (auto& v : values) {
    v = static_cast<T>(uniform(rng, -bound, bound));
    // Rounding to float can land exactly on the bound; keep draws inside it.
    if (std::abs(static_cast<double>(v)) > bound) v = static_cast<T>(0);
  }
  return Tensor<T>(shape, std::move(values), requires_grad);
}

}  // namespace pjfit
