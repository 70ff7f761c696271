#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace modewise::nn {

/// Dense row-major f64 array with shape (B, C, L) or (B, F).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::initializer_list<std::size_t> shape, double fill = 0.0)
      : Tensor(std::vector<std::size_t>(shape), fill) {}

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }
  std::size_t batch() const { return shape_.empty() ? 0 : shape_[0]; }
  /// Elements per batch item.
  std::size_t stride() const { return batch() == 0 ? 0 : size() / batch(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> item(std::size_t b) { return values().subspan(b * stride(), stride()); }
  std::span<const double> item(std::size_t b) const {
    return values().subspan(b * stride(), stride());
  }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t b, std::size_t c, std::size_t l) {
    return values_[(b * shape_[1] + c) * shape_[2] + l];
  }
  const double& at(std::size_t b, std::size_t c, std::size_t l) const {
    return values_[(b * shape_[1] + c) * shape_[2] + l];
  }

  /// Same values, new shape; element counts must agree.
  Tensor reshaped(std::vector<std::size_t> shape) const;
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

}  // namespace modewise::nn
