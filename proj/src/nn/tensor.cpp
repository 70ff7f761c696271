#include "modewise/nn/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "modewise/error.hpp"

namespace modewise::nn {

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  const std::size_t n =
      std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  values_.assign(shape_.empty() ? 0 : n, fill);
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  const std::size_t n =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  if (n != values_.size()) throw DataError("reshape changes the element count");
  Tensor out;
  out.shape_ = std::move(shape);
  out.values_ = values_;
  return out;
}

bool Tensor::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace modewise::nn
