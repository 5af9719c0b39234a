#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "intgrad/error.hpp"

namespace intgrad {

/// Dense row-major array of doubles. Holds inputs, baselines, gradients and
/// attributions. Every value is finite; construction rejects NaN and Inf.
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    const std::size_t expected = std::accumulate(
        shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
    if (expected != values_.size()) {
      throw ValidationError("tensor shape holds " + std::to_string(expected) +
                            " values but " + std::to_string(values_.size()) +
                            " were given");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw NumericError("tensor value " + std::to_string(i) +
                           " is not finite");
      }
    }
  }

  /// Rank-1 tensor over `values`.
  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  static Tensor zeros(std::vector<std::size_t> shape) {
    const std::size_t n = std::accumulate(shape.begin(), shape.end(),
                                          std::size_t{1}, std::multiplies<>());
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
  }

  static Tensor filled(std::vector<std::size_t> shape, double value) {
    const std::size_t n = std::accumulate(shape.begin(), shape.end(),
                                          std::size_t{1}, std::multiplies<>());
    return Tensor(std::move(shape), std::vector<double>(n, value));
  }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

}  // namespace intgrad
