#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modewise/nn/tensor.hpp"
#include "modewise/rng.hpp"

namespace modewise::nn {

enum class Phase { Train, Eval };

struct ForwardContext {
  Phase phase = Phase::Eval;
  Rng* rng = nullptr;  // required by dropout in the Train phase
};

/// A trainable array and its accumulated gradient.
struct ParamRef {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
};

/// Stride-1 convolution over (B, C, L) with zero "same" padding.
class Conv1d {
 public:
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t width = 3);

  Tensor forward(const Tensor& x, const ForwardContext& ctx);
  /// Accumulates into weight/bias gradients and returns d(loss)/dx.
  Tensor backward(const Tensor& grad_out);

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }
  std::size_t width() const { return width_; }
  std::size_t padding() const { return width_ / 2; }
  std::size_t fan_in() const { return in_ * width_; }
  std::size_t fan_out() const { return out_ * width_; }

  /// Layout [out][in][k].
  std::vector<double> weight;
  std::vector<double> bias;
  std::vector<double> weight_grad;
  std::vector<double> bias_grad;

  void params(std::vector<ParamRef>& out, const std::string& prefix);

 private:
  std::size_t in_, out_, width_;
  Tensor input_;
};

class Relu {
 public:
  Tensor forward(const Tensor& x, const ForwardContext& ctx);
  /// Subgradient at exactly 0 is 0.
  Tensor backward(const Tensor& grad_out);

 private:
  Tensor input_;
};

/// Max over windows of `width` taken every `stride` elements along L.
/// Output length is (L - width) / stride + 1; ties go to the first element.
class MaxPool {
 public:
  explicit MaxPool(std::size_t width = 2, std::size_t stride = 2);

  Tensor forward(const Tensor& x, const ForwardContext& ctx);
  Tensor backward(const Tensor& grad_out);

  std::size_t width() const { return width_; }
  std::size_t stride() const { return stride_; }
  std::size_t output_length(std::size_t length) const;

 private:
  std::size_t width_, stride_;
  std::vector<std::size_t> shape_;
  std::vector<std::size_t> argmax_;
};

/// Inverted dropout: survivors are scaled by 1/(1-p) in training, identity in eval.
class Dropout {
 public:
  explicit Dropout(double p);

  Tensor forward(const Tensor& x, const ForwardContext& ctx);
  Tensor backward(const Tensor& grad_out);

  double p() const { return p_; }
  void set_p(double p);

 private:
  double p_;
  std::vector<double> mask_;  // empty after an eval-phase forward
};

/// (B, C, L) -> (B, C*L), channel-major.
class Flatten {
 public:
  Tensor forward(const Tensor& x, const ForwardContext& ctx);
  Tensor backward(const Tensor& grad_out);

 private:
  std::vector<std::size_t> shape_;
};

/// out = W x + b over (B, F).
class Dense {
 public:
  Dense(std::size_t in_features, std::size_t out_features);

  Tensor forward(const Tensor& x, const ForwardContext& ctx);
  Tensor backward(const Tensor& grad_out);

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

  /// Layout [out][in].
  std::vector<double> weight;
  std::vector<double> bias;
  std::vector<double> weight_grad;
  std::vector<double> bias_grad;

  void params(std::vector<ParamRef>& out, const std::string& prefix);

 private:
  std::size_t in_, out_;
  Tensor input_;
};

struct LossResult {
  double loss = 0.0;   // mean negative log-likelihood
  Tensor grad;         // d(loss)/d(logits) = (softmax - onehot) / B
  Tensor probs;
};

/// Row-wise softmax of (B, K) logits, log-sum-exp stabilized.
Tensor softmax(const Tensor& logits);

/// Softmax + categorical cross-entropy. Labels must lie in [0, K).
LossResult softmax_xent(const Tensor& logits, std::span<const std::uint8_t> labels);

/// Glorot/Xavier uniform bound sqrt(6 / (fan_in + fan_out)).
double glorot_bound(std::size_t fan_in, std::size_t fan_out);
void glorot_uniform(std::span<double> weights, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace modewise::nn
