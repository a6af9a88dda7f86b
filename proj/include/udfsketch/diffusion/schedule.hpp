#pragma once

#include <cmath>
#include <vector>

#include "udfsketch/error.hpp"
#include "udfsketch/nn/tensor.hpp"

namespace udfsketch::diffusion {

/// DDPM variance schedule. Arrays are indexed by step t in [1, steps]; index 0 holds the
/// conventions alpha_bar[0] = 1 and beta[0] = posterior_variance[0] = 0.
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> posterior_variance;
};

inline NoiseSchedule make_linear_schedule(int steps, double beta_start, double beta_end) {
  require(steps >= 1, ErrorCode::parameter_error, "schedule needs at least one step");
  require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0, ErrorCode::parameter_error,
          "betas must satisfy 0 < start <= end < 1");
  NoiseSchedule s;
  s.steps = steps;
  s.beta.assign(steps + 1, 0.0);
  s.alpha.assign(steps + 1, 1.0);
  s.alpha_bar.assign(steps + 1, 1.0);
  s.posterior_variance.assign(steps + 1, 0.0);
  for (int t = 1; t <= steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
    s.beta[t] = beta_start + (beta_end - beta_start) * frac;
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    s.posterior_variance[t] = s.beta[t] * (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]);
  }
  return s;
}

/// Forward-process marginal: sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.
template <class S>
nn::Tensor<S> q_sample(const nn::Tensor<S>& x0, int t, const nn::Tensor<S>& eps, const NoiseSchedule& schedule) {
  require(t >= 1 && t <= schedule.steps, ErrorCode::parameter_error, "timestep out of range");
  nn::require_same_shape(x0, eps, "q_sample shape mismatch");
  const double a = std::sqrt(schedule.alpha_bar[t]);
  const double b = std::sqrt(1.0 - schedule.alpha_bar[t]);
  nn::Tensor<S> out(x0.shape);
  for (std::size_t i = 0; i < x0.numel(); ++i) out[i] = static_cast<S>(a * x0[i] + b * eps[i]);
  return out;
}

}  // namespace udfsketch::diffusion
