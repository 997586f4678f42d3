#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pjfit/errors.hpp"

namespace pjfit {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// Dense row-major array with an optional gradient buffer.
///
/// A Tensor is a shared handle: copies alias the same storage, which is how
/// graph nodes refer to their operands. Use clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : impl_(std::make_shared<Impl>()) {
    for (auto extent : shape) {
      if (extent == 0) {
        throw DimensionError("tensor extents must be positive, got " +
                             shape_str(shape));
      }
    }
    if (numel(shape) != data.size()) {
      throw DimensionError("shape " + shape_str(shape) + " holds " +
                           std::to_string(numel(shape)) + " values, buffer has " +
                           std::to_string(data.size()));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    set_requires_grad(requires_grad);
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T{0}), requires_grad);
  }

  static Tensor vector(std::vector<T> values, bool requires_grad = false) {
    Shape shape{values.size()};
    return Tensor(std::move(shape), std::move(values), requires_grad);
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
  }

  bool defined() const noexcept { return static_cast<bool>(impl_); }

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->data.size(); }
  std::size_t rows() const { return impl_->shape[0]; }
  std::size_t cols() const { return rank() > 1 ? impl_->shape[1] : 1; }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  std::vector<T>& values() { return impl_->data; }
  const std::vector<T>& values() const { return impl_->data; }

  T& operator[](std::size_t i) { return impl_->data[i]; }
  const T& operator[](std::size_t i) const { return impl_->data[i]; }
  T& at(std::size_t r, std::size_t c) { return impl_->data[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const {
    return impl_->data[r * cols() + c];
  }

  T item() const {
    if (size() != 1) {
      throw RankError("item() needs a single-element tensor, shape is " +
                      shape_str(shape()));
    }
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }

  // Turning gradients on allocates a zeroed buffer of identical shape.
  void set_requires_grad(bool on) {
    impl_->requires_grad = on;
    if (on) {
      impl_->grad.assign(impl_->data.size(), T{0});
    } else {
      impl_->grad.clear();
    }
  }

  bool has_grad() const { return !impl_->grad.empty(); }
  // Gradient storage belongs to the shared handle, so it stays writable
  // through const copies captured by backward closures.
  std::span<T> grad() const { return impl_->grad; }

  void zero_grad() { std::fill(impl_->grad.begin(), impl_->grad.end(), T{0}); }

  Tensor clone() const {
    return Tensor(impl_->shape, impl_->data, impl_->requires_grad);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(impl_->data.begin(), impl_->data.end());
    return Tensor<U>(impl_->shape, std::move(out), impl_->requires_grad);
  }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

}  // namespace pjfit
