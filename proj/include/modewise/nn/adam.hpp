#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "modewise/nn/layers.hpp"

namespace modewise::nn {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments. Moment buffers are sized on the first step
/// and must keep matching the parameter list afterwards.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Throws NumericError naming the parameter if any gradient is non-finite.
  void step(std::span<const ParamRef> params);

  std::size_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::size_t step_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

}  // namespace modewise::nn
