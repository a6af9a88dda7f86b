#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "udfsketch/nn/tensor.hpp"

namespace udfsketch::nn {

/// A differentiable quantity: its current value and where its analytic gradient lands.
struct GradProbe {
  Tensor<double>* value;
  Tensor<double>* grad;
};

struct GradCheckOptions {
  double epsilon = 1e-3;
  // Denominator floor so near-zero gradients are compared absolutely.
  double floor = 1e-3;
};

/// Compares analytic gradients against central differences on every coordinate of
/// every probe. `forward` returns the scalar objective; `backward` writes the analytic
/// gradient into the probes' grad tensors (which the harness zeroes first).
/// Returns max |a - n| / max(|a|, |n|, floor).
inline double grad_check(const std::vector<GradProbe>& probes, const std::function<double()>& forward,
                         const std::function<void()>& backward, GradCheckOptions opt = {}) {
  for (const auto& p : probes) p.grad->fill(0.0);
  forward();
  backward();
  std::vector<Tensor<double>> analytic;
  analytic.reserve(probes.size());
  for (const auto& p : probes) analytic.push_back(*p.grad);

  double worst = 0.0;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    auto& v = *probes[k].value;
    for (std::size_t i = 0; i < v.numel(); ++i) {
      const double saved = v[i];
      v[i] = saved + opt.epsilon;
      const double plus = forward();
      v[i] = saved - opt.epsilon;
      const double minus = forward();
      v[i] = saved;
      const double numeric = (plus - minus) / (2.0 * opt.epsilon);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

/// Objective sum_i w_i * y_i and its gradient w.r.t. y, for reducing a tensor output
/// to a scalar during gradient checks.
struct Projection {
  Tensor<double> weights;

  template <class Rng>
  static Projection random_like(const Tensor<double>& y, Rng& rng) {
    Projection p{Tensor<double>(y.shape)};
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& w : p.weights.data) w = dist(rng);
    return p;
  }

  double operator()(const Tensor<double>& y) const {
    double s = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += weights[i] * y[i];
    return s;
  }
};

}  // namespace udfsketch::nn
