#include "modewise/nn/adam.hpp"

#include <cmath>

#include "modewise/error.hpp"

namespace modewise::nn {

void Adam::step(std::span<const ParamRef> params) {
  if (first_.empty()) {
    for (const auto& p : params) {
      first_.emplace_back(p.value.size(), 0.0);
      second_.emplace_back(p.value.size(), 0.0);
    }
  }
  if (first_.size() != params.size()) throw UsageError("Adam: parameter list changed size");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (first_[k].size() != params[k].value.size()) {
      throw UsageError("Adam: parameter " + params[k].name + " changed size");
    }
    for (double g : params[k].grad) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + params[k].name);
    }
  }

  ++step_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = first_[k];
    auto& v = second_[k];
    const auto value = params[k].value;
    const auto grad = params[k].grad;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

}  // namespace modewise::nn
