// SPDX-License-Identifier: Apache-2.0
#include "dtsv/autodiff/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "dtsv/error.hpp"

namespace dtsv::ad {

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  require(!shape_.empty(), "tensor shape must have at least one extent");
  for (auto d : shape_) require(d > 0, "tensor extents must be positive, got " + shape_str(shape_));
  values_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  require(!shape_.empty(), "tensor shape must have at least one extent");
  for (auto d : shape_) require(d > 0, "tensor extents must be positive, got " + shape_str(shape_));
  require(shape_size(shape_) == values_.size(),
          "tensor shape " + shape_str(shape_) + " does not match " +
              std::to_string(values_.size()) + " values");
}

bool Tensor::all_finite() const noexcept {
  // v - v is NaN exactly when v is inf or NaN; the sum is branch-free.
  double acc = 0.0;
  for (double v : values_) acc += v - v;
  return acc == 0.0;
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

}  // namespace dtsv::ad
