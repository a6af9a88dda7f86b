#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "udfsketch/nn/tensor.hpp"

namespace udfsketch::nn {

/// initial * (1 + cos(pi * step / total)) / 2; reaches zero at the final step.
inline double cosine_lr(long step, long total_steps, double initial_rate) {
  require(total_steps > 0 && step >= 0 && step <= total_steps, ErrorCode::parameter_error,
          "cosine schedule step out of range");
  return initial_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer with bias correction. Moments are stored per parameter
/// in registration order.
template <class S>
class Adam {
 public:
  explicit Adam(const ParameterList<S>& params, AdamConfig cfg = {}) : params_(params), cfg_(cfg) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.shape);
      v_.emplace_back(p->value.shape);
    }
  }

  void step(double learning_rate) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      require(p.grad.shape == m_[k].shape, ErrorCode::shape_error, "optimizer state shape mismatch");
      for (std::size_t i = 0; i < p.value.numel(); ++i) {
        const double g = p.grad[i];
        const double m = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * g;
        const double v = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * g * g;
        m_[k][i] = static_cast<S>(m);
        v_[k][i] = static_cast<S>(v);
        p.value[i] -= static_cast<S>(learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg_.eps));
      }
    }
  }

  long steps_taken() const noexcept { return t_; }

 private:
  ParameterList<S> params_;
  AdamConfig cfg_;
  std::vector<Tensor<S>> m_;
  std::vector<Tensor<S>> v_;
  long t_ = 0;
};

}  // namespace udfsketch::nn
