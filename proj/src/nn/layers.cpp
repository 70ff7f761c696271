#include "modewise/nn/layers.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>

#include "modewise/error.hpp"
#include "modewise/kernels/kernels.hpp"

namespace modewise::nn {
namespace {

void require_rank(const Tensor& x, std::size_t rank, const char* layer) {
  if (x.rank() != rank) {
    throw DataError(std::string(layer) + ": expected a rank-" + std::to_string(rank) +
                    " tensor, got rank " + std::to_string(x.rank()));
  }
}

void require_same_shape(const Tensor& a, const std::vector<std::size_t>& shape,
                        const char* layer) {
  if (a.shape() != shape) throw DataError(std::string(layer) + ": gradient shape mismatch");
}

}  // namespace

// ---------------------------------------------------------------------------

Conv1d::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t width)
    : weight(out_channels * in_channels * width, 0.0),
      bias(out_channels, 0.0),
      weight_grad(weight.size(), 0.0),
      bias_grad(out_channels, 0.0),
      in_(in_channels),
      out_(out_channels),
      width_(width) {
  if (width % 2 == 0) throw UsageError("convolution width must be odd for same padding");
}

Tensor Conv1d::forward(const Tensor& x, const ForwardContext&) {
  require_rank(x, 3, "conv1d");
  if (x.dim(1) != in_) {
    throw DataError("conv1d: expected " + std::to_string(in_) + " input channels, got " +
                    std::to_string(x.dim(1)));
  }
  const std::size_t B = x.dim(0), L = x.dim(2);
  const auto pad = static_cast<std::ptrdiff_t>(padding());
  const auto& k = kernels::active();
  Tensor out({B, out_, L});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t d = 0; d < out_; ++d) {
      double* dst = &out.at(b, d, 0);
      std::fill(dst, dst + L, bias[d]);
      for (std::size_t c = 0; c < in_; ++c) {
        const double* src = &x.at(b, c, 0);
        for (std::size_t t = 0; t < width_; ++t) {
          const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(t) - pad;
          const std::size_t i0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
          const std::size_t i1 = off > 0 ? L - std::min(L, static_cast<std::size_t>(off)) : L;
          if (i1 <= i0) continue;
          k.axpy(weight[(d * in_ + c) * width_ + t], src + (static_cast<std::ptrdiff_t>(i0) + off),
                 dst + i0, i1 - i0);
        }
      }
    }
  }
  input_ = x;
  return out;
}

Tensor Conv1d::backward(const Tensor& grad_out) {
  const std::size_t B = input_.dim(0), L = input_.dim(2);
  require_same_shape(grad_out, {B, out_, L}, "conv1d");
  const auto pad = static_cast<std::ptrdiff_t>(padding());
  const auto& k = kernels::active();
  Tensor dx({B, in_, L});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t d = 0; d < out_; ++d) {
      const double* g = &grad_out.at(b, d, 0);
      double gsum = 0.0;
      for (std::size_t i = 0; i < L; ++i) gsum += g[i];
      bias_grad[d] += gsum;
      for (std::size_t c = 0; c < in_; ++c) {
        const double* src = &input_.at(b, c, 0);
        double* dsrc = &dx.at(b, c, 0);
        for (std::size_t t = 0; t < width_; ++t) {
          const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(t) - pad;
          const std::size_t i0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
          const std::size_t i1 = off > 0 ? L - std::min(L, static_cast<std::size_t>(off)) : L;
          if (i1 <= i0) continue;
          const std::size_t w_idx = (d * in_ + c) * width_ + t;
          const std::ptrdiff_t shifted = static_cast<std::ptrdiff_t>(i0) + off;
          weight_grad[w_idx] += k.dot(g + i0, src + shifted, i1 - i0);
          k.axpy(weight[w_idx], g + i0, dsrc + shifted, i1 - i0);
        }
      }
    }
  }
  return dx;
}

void Conv1d::params(std::vector<ParamRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", weight, weight_grad});
  out.push_back({prefix + ".bias", bias, bias_grad});
}

// ---------------------------------------------------------------------------

Tensor Relu::forward(const Tensor& x, const ForwardContext&) {
  Tensor out(x.shape());
  kernels::active().relu(x.values().data(), out.values().data(), x.size());
  input_ = x;
  return out;
}

Tensor Relu::backward(const Tensor& grad_out) {
  require_same_shape(grad_out, input_.shape(), "relu");
  Tensor dx(grad_out.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = input_[i] > 0.0 ? grad_out[i] : 0.0;
  return dx;
}

// ---------------------------------------------------------------------------

MaxPool::MaxPool(std::size_t width, std::size_t stride) : width_(width), stride_(stride) {
  if (width == 0 || stride == 0) throw UsageError("pool width and stride must be positive");
}

std::size_t MaxPool::output_length(std::size_t length) const {
  return length < width_ ? 0 : (length - width_) / stride_ + 1;
}

Tensor MaxPool::forward(const Tensor& x, const ForwardContext&) {
  require_rank(x, 3, "maxpool");
  const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
  const std::size_t out_len = output_length(L);
  if (out_len == 0) throw DataError("maxpool: input shorter than the pool width");
  Tensor out({B, C, out_len});
  argmax_.assign(out.size(), 0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t j = 0; j < out_len; ++j) {
        const std::size_t start = j * stride_;
        std::size_t best = start;
        for (std::size_t i = start + 1; i < start + width_; ++i) {
          if (x.at(b, c, i) > x.at(b, c, best)) best = i;
        }
        out.at(b, c, j) = x.at(b, c, best);
        argmax_[(b * C + c) * out_len + j] = best;
      }
    }
  }
  shape_ = x.shape();
  return out;
}

Tensor MaxPool::backward(const Tensor& grad_out) {
  const std::size_t B = shape_[0], C = shape_[1];
  const std::size_t out_len = output_length(shape_[2]);
  require_same_shape(grad_out, {B, C, out_len}, "maxpool");
  Tensor dx(shape_);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t j = 0; j < out_len; ++j) {
        const std::size_t flat = (b * C + c) * out_len + j;
        dx.at(b, c, argmax_[flat]) += grad_out[flat];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------

Dropout::Dropout(double p) : p_(0.0) { set_p(p); }

void Dropout::set_p(double p) {
  if (!(p >= 0.0 && p < 1.0)) throw UsageError("dropout probability must be in [0, 1)");
  p_ = p;
}

Tensor Dropout::forward(const Tensor& x, const ForwardContext& ctx) {
  if (ctx.phase == Phase::Eval || p_ == 0.0) {
    mask_.clear();
    return x;
  }
  if (ctx.rng == nullptr) throw UsageError("dropout in training needs a random generator");
  const double keep_scale = 1.0 / (1.0 - p_);
  mask_.resize(x.size());
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = ctx.rng->uniform() < p_ ? 0.0 : keep_scale;
    out[i] = x[i] * mask_[i];
  }
  return out;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  if (mask_.empty()) return grad_out;
  if (mask_.size() != grad_out.size()) throw DataError("dropout: gradient shape mismatch");
  Tensor dx(grad_out.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = grad_out[i] * mask_[i];
  return dx;
}

// ---------------------------------------------------------------------------

Tensor Flatten::forward(const Tensor& x, const ForwardContext&) {
  if (x.rank() < 2) throw DataError("flatten: expected at least rank 2");
  shape_ = x.shape();
  return x.reshaped({x.dim(0), x.stride()});
}

Tensor Flatten::backward(const Tensor& grad_out) { return grad_out.reshaped(shape_); }

// ---------------------------------------------------------------------------

Dense::Dense(std::size_t in_features, std::size_t out_features)
    : weight(out_features * in_features, 0.0),
      bias(out_features, 0.0),
      weight_grad(weight.size(), 0.0),
      bias_grad(out_features, 0.0),
      in_(in_features),
      out_(out_features) {}

Tensor Dense::forward(const Tensor& x, const ForwardContext&) {
  require_rank(x, 2, "dense");
  if (x.dim(1) != in_) {
    throw DataError("dense: expected " + std::to_string(in_) + " input features, got " +
                    std::to_string(x.dim(1)));
  }
  const std::size_t B = x.dim(0);
  const auto& k = kernels::active();
  Tensor out({B, out_});
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = x.item(b).data();
    for (std::size_t o = 0; o < out_; ++o) {
      out[b * out_ + o] = bias[o] + k.dot(&weight[o * in_], row, in_);
    }
  }
  input_ = x;
  return out;
}

Tensor Dense::backward(const Tensor& grad_out) {
  const std::size_t B = input_.dim(0);
  require_same_shape(grad_out, {B, out_}, "dense");
  const auto& k = kernels::active();
  Tensor dx({B, in_});
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = input_.item(b).data();
    double* drow = dx.item(b).data();
    for (std::size_t o = 0; o < out_; ++o) {
      const double g = grad_out[b * out_ + o];
      if (g == 0.0) continue;
      bias_grad[o] += g;
      k.axpy(g, row, &weight_grad[o * in_], in_);
      k.axpy(g, &weight[o * in_], drow, in_);
    }
  }
  return dx;
}

void Dense::params(std::vector<ParamRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", weight, weight_grad});
  out.push_back({prefix + ".bias", bias, bias_grad});
}

// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 2, "softmax");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  Tensor probs({B, K});
  for (std::size_t b = 0; b < B; ++b) {
    const auto row = logits.item(b);
    const double peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      probs[b * K + j] = std::exp(row[j] - peak);
      total += probs[b * K + j];
    }
    for (std::size_t j = 0; j < K; ++j) probs[b * K + j] /= total;
  }
  return probs;
}

LossResult softmax_xent(const Tensor& logits, std::span<const std::uint8_t> labels) {
  require_rank(logits, 2, "softmax_xent");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  if (labels.size() != B) throw DataError("softmax_xent: one label per row required");
  LossResult result;
  result.probs = softmax(logits);
  result.grad = Tensor({B, K});
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] >= K) {
      throw DataError("label " + std::to_string(labels[b]) + " outside the " + std::to_string(K) +
                      " classes");
    }
    const auto row = logits.item(b);
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - peak);
    total += std::log(sum) + peak - row[labels[b]];
    for (std::size_t j = 0; j < K; ++j) {
      const double onehot = j == labels[b] ? 1.0 : 0.0;
      result.grad[b * K + j] = (result.probs[b * K + j] - onehot) / static_cast<double>(B);
    }
  }
  result.loss = total / static_cast<double>(B);
  return result;
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void glorot_uniform(std::span<double> weights, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = glorot_bound(fan_in, fan_out);
  for (auto& w : weights) w = rng.uniform(-bound, bound);
}

}  // namespace modewise::nn
