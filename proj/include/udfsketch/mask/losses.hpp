#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "udfsketch/config.hpp"
#include "udfsketch/grid.hpp"

namespace udfsketch::mask {

inline constexpr double kProbabilityClamp = 1e-7;

struct MaskLossConfig {
  double lambda_focal = 20.0;
  double lambda_dice = 1.0;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;

  void validate() const {
    require(lambda_focal >= 0.0 && lambda_dice >= 0.0, ErrorCode::configuration_error,
            "loss weights must be nonnegative");
    require(lambda_focal + lambda_dice > 0.0, ErrorCode::configuration_error, "at least one loss weight must be positive");
    require(focal_alpha > 0.0 && focal_alpha < 1.0, ErrorCode::configuration_error, "focal alpha must lie in (0, 1)");
    require(focal_gamma >= 0.0, ErrorCode::configuration_error, "focal gamma must be nonnegative");
  }
};

inline MaskLossConfig mask_loss_config_from(const KeyValueConfig& kv, MaskLossConfig cfg = {}) {
  cfg.lambda_focal = kv.get_double("mask.lambda_focal", cfg.lambda_focal);
  cfg.lambda_dice = kv.get_double("mask.lambda_dice", cfg.lambda_dice);
  cfg.focal_alpha = kv.get_double("mask.focal_alpha", cfg.focal_alpha);
  cfg.focal_gamma = kv.get_double("mask.focal_gamma", cfg.focal_gamma);
  cfg.validate();
  return cfg;
}

namespace detail {

inline void require_loss_shapes(std::size_t pred, std::size_t target, std::size_t grad) {
  require(pred == target, ErrorCode::shape_error, "prediction and target sizes differ");
  require(grad == 0 || grad == pred, ErrorCode::shape_error, "gradient buffer size differs from prediction");
  require(pred > 0, ErrorCode::shape_error, "loss needs at least one pixel");
}

}  // namespace detail

/// Mean per-pixel focal loss. Probabilities are clamped to [1e-7, 1 - 1e-7]; clamped
/// pixels contribute no gradient. When `grad` is nonempty, d(loss)/d(pred) is added to it.
template <class S>
double focal_loss(std::span<const S> pred, std::span<const std::uint8_t> target, double alpha, double gamma,
                  std::span<S> grad = {}) {
  detail::require_loss_shapes(pred.size(), target.size(), grad.size());
  const double n = static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double raw = static_cast<double>(pred[i]);
    const double p = std::clamp(raw, kProbabilityClamp, 1.0 - kProbabilityClamp);
    const bool pos = target[i] != 0;
    const double pt = pos ? p : 1.0 - p;
    const double at = pos ? alpha : 1.0 - alpha;
    const double q = 1.0 - pt;
    const double modulator = std::pow(q, gamma);
    total += -at * modulator * std::log(pt);
    if (!grad.empty() && raw == p) {
      // d/dpt of -at * q^gamma * ln(pt), then chain through pt = p or 1 - p.
      double d_pt = -at * (modulator / pt);
      if (gamma != 0.0) d_pt += at * gamma * std::pow(q, gamma - 1.0) * std::log(pt);
      grad[i] += static_cast<S>((pos ? d_pt : -d_pt) / n);
    }
  }
  return total / n;
}

/// 1 - (2 sum(p t) + s) / (sum p + sum t + s) with smoothing s = 1.
template <class S>
double dice_loss(std::span<const S> pred, std::span<const std::uint8_t> target, std::span<S> grad = {}) {
  detail::require_loss_shapes(pred.size(), target.size(), grad.size());
  constexpr double s = 1.0;
  double inter = 0.0, sum_p = 0.0, sum_t = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double t = target[i] ? 1.0 : 0.0;
    inter += pred[i] * t;
    sum_p += pred[i];
    sum_t += t;
  }
  const double num = 2.0 * inter + s;
  const double den = sum_p + sum_t + s;
  if (!grad.empty()) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double t = target[i] ? 1.0 : 0.0;
      grad[i] += static_cast<S>(-(2.0 * t * den - num) / (den * den));
    }
  }
  return 1.0 - num / den;
}

template <class S>
double combined_mask_loss(std::span<const S> pred, std::span<const std::uint8_t> target, const MaskLossConfig& cfg,
                          std::span<S> grad = {}) {
  cfg.validate();
  detail::require_loss_shapes(pred.size(), target.size(), grad.size());
  double total = 0.0;
  std::vector<S> part(grad.empty() ? 0 : grad.size());
  if (cfg.lambda_focal > 0.0) {
    std::fill(part.begin(), part.end(), S{0});
    total += cfg.lambda_focal * focal_loss<S>(pred, target, cfg.focal_alpha, cfg.focal_gamma, part);
    for (std::size_t i = 0; i < part.size(); ++i) grad[i] += static_cast<S>(cfg.lambda_focal * part[i]);
  }
  if (cfg.lambda_dice > 0.0) {
    std::fill(part.begin(), part.end(), S{0});
    total += cfg.lambda_dice * dice_loss<S>(pred, target, part);
    for (std::size_t i = 0; i < part.size(); ++i) grad[i] += static_cast<S>(cfg.lambda_dice * part[i]);
  }
  return total;
}

/// Mean binary cross-entropy with the same clamping as the focal loss.
template <class S>
double binary_cross_entropy(std::span<const S> pred, std::span<const std::uint8_t> target) {
  detail::require_loss_shapes(pred.size(), target.size(), 0);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred[i]), kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= target[i] ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(pred.size());
}

}  // namespace udfsketch::mask
