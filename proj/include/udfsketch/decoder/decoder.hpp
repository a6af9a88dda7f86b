#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "udfsketch/marching_squares.hpp"
#include "udfsketch/mask/head.hpp"
#include "udfsketch/metrics.hpp"
#include "udfsketch/nn/optim.hpp"
#include "udfsketch/nn/unet.hpp"
#include "udfsketch/otsu.hpp"
#include "udfsketch/udf.hpp"

namespace udfsketch::decoder {

struct DecoderConfig {
  std::array<int, 3> widths{16, 32, 32};
  int residual_blocks = 4;
};

/// Field signal (N, 1, H, W) -> ink probability (N, 1, H, W): two stride-2 encoders,
/// residual blocks at quarter resolution, two upsampling decoders.
template <class S>
class DecoderNet {
 public:
  DecoderNet() : DecoderNet(DecoderConfig{}) {}
  explicit DecoderNet(const DecoderConfig& cfg)
      : cfg_(cfg),
        unet_("decoder.unet", nn::UNetConfig{.in_channels = 1,
                                             .out_channels = 1,
                                             .widths = cfg.widths,
                                             .level1_blocks = 0,
                                             .bottleneck_blocks = cfg.residual_blocks,
                                             .up_level1_blocks = 0,
                                             .emb_dim = 0,
                                             .skips = true,
                                             .out_gain = 1.0}) {}

  template <class Rng>
  void init(Rng& rng) {
    unet_.init(rng);
  }

  nn::Tensor<S> forward(const nn::Tensor<S>& x) {
    probs_ = nn::sigmoid(unet_.forward(x));
    return probs_;
  }
  nn::Tensor<S> backward(const nn::Tensor<S>& d_probs) { return unet_.backward(nn::sigmoid_backward(probs_, d_probs)); }

  nn::ParameterList<S> parameters() {
    nn::ParameterList<S> out;
    unet_.collect(out);
    return out;
  }

  const DecoderConfig& config() const noexcept { return cfg_; }

 private:
  DecoderConfig cfg_;
  nn::UNet<S> unet_;
  nn::Tensor<S> probs_;
};

struct DecoderPair {
  UdfGrid field;
  SketchBitmap sketch;
};

struct DecoderTrainConfig {
  long epochs = 20;
  int batch_size = 16;
  double initial_lr = 2e-3;
  double validation_fraction = 0.1;
  double noise_std = 0.05;  // upper bound of the per-item input noise level
  std::uint64_t seed = 0;
};

struct DecoderEpochReport {
  long epoch;
  double train_loss;
  double validation_chamfer;
};

/// Gray value = 255 * (1 - p), so ink is dark.
inline GrayBitmap probabilities_to_gray(const nn::Tensor<float>& p, int n = 0) {
  GrayBitmap out(p.width(), p.height());
  const float* src = p.channel_ptr(n, 0);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - std::clamp<double>(src[i], 0.0, 1.0))));
  return out;
}

inline GrayBitmap decode_learned(DecoderNet<float>& net, const UdfGrid& field) {
  nn::Tensor<float> x({1, 1, field.height(), field.width()});
  for (std::size_t i = 0; i < field.size(); ++i) x[i] = 2.0f * field[i] - 1.0f;
  return probabilities_to_gray(net.forward(x));
}

/// Otsu binarization of a decoded gray sketch. Only pixels darker than mid-gray can be
/// ink, so a near-uniform light image stays blank.
inline SketchBitmap binarize_decoded(const GrayBitmap& gray) {
  const OtsuResult otsu = otsu_threshold(gray);
  return binarize(gray, std::min<int>(otsu.threshold, 127));
}

inline SketchBitmap decode_learned_sketch(DecoderNet<float>& net, const UdfGrid& field) {
  return binarize_decoded(decode_learned(net, field));
}

/// Mean per-pixel binary cross-entropy of a probability batch; accumulates the gradient.
inline double bce_with_grad(const nn::Tensor<float>& p, const std::vector<std::uint8_t>& target, nn::Tensor<float>& grad) {
  const double n = static_cast<double>(p.numel());
  double loss = 0.0;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    const double q = std::clamp(static_cast<double>(p[i]), mask::kProbabilityClamp, 1.0 - mask::kProbabilityClamp);
    if (target[i]) {
      loss -= std::log(q);
      grad[i] = static_cast<float>(-1.0 / (q * n));
    } else {
      loss -= std::log(1.0 - q);
      grad[i] = static_cast<float>(1.0 / ((1.0 - q) * n));
    }
  }
  return loss / n;
}

/// Chamfer between a decode and ground truth; a blank decode scores the canvas diagonal.
inline double chamfer_or_diagonal(const SketchBitmap& decoded, const SketchBitmap& truth) {
  if (is_blank(decoded) || is_blank(truth)) return std::hypot(truth.width(), truth.height());
  return chamfer_distance(decoded, truth);
}

inline std::vector<DecoderEpochReport> train_decoder(DecoderNet<float>& net, const std::vector<DecoderPair>& data,
                                                     const DecoderTrainConfig& cfg,
                                                     const std::function<void(const DecoderEpochReport&)>& on_epoch = {}) {
  require(!data.empty(), ErrorCode::configuration_error, "decoder training set is empty");
  require(cfg.epochs > 0 && cfg.batch_size > 0 && cfg.initial_lr > 0.0 && cfg.noise_std >= 0.0,
          ErrorCode::configuration_error, "training sizes and rates must be positive");
  const int h = data[0].field.height(), w = data[0].field.width();
  for (const auto& d : data)
    require(d.field.width() == w && d.field.height() == h && d.sketch.width() == w && d.sketch.height() == h,
            ErrorCode::shape_error, "decoder pairs must share one canvas size");

  const std::size_t val_begin = mask::validation_start(data.size(), cfg.validation_fraction);
  const std::size_t train_count = val_begin == 0 ? data.size() : val_begin;
  const long per_epoch = static_cast<long>((train_count + cfg.batch_size - 1) / cfg.batch_size);
  const long total = per_epoch * cfg.epochs;
  const std::size_t plane = static_cast<std::size_t>(w) * h;

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::uniform_real_distribution<double> level(0.0, cfg.noise_std);
  auto params = net.parameters();
  nn::Adam<float> adam(params);
  std::vector<std::size_t> order(train_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<DecoderEpochReport> reports;
  long step = 0;
  for (long epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_count; start += cfg.batch_size) {
      const int n = static_cast<int>(std::min<std::size_t>(cfg.batch_size, train_count - start));
      nn::Tensor<float> x({n, 1, h, w});
      std::vector<std::uint8_t> target(plane * n);
      for (int k = 0; k < n; ++k) {
        const auto& d = data[order[start + k]];
        const double sigma = cfg.noise_std > 0.0 ? level(rng) : 0.0;
        float* dst = x.channel_ptr(k, 0);
        for (std::size_t i = 0; i < plane; ++i) {
          const float v = std::clamp(static_cast<float>(d.field[i] + sigma * normal(rng)), 0.0f, 1.0f);
          dst[i] = 2.0f * v - 1.0f;
        }
        std::copy(d.sketch.values().begin(), d.sketch.values().end(), target.begin() + static_cast<std::ptrdiff_t>(k * plane));
      }
      nn::zero_grad(params);
      const nn::Tensor<float> p = net.forward(x);
      nn::Tensor<float> grad(p.shape);
      loss_sum += bce_with_grad(p, target, grad);
      net.backward(grad);
      adam.step(nn::cosine_lr(++step, total, cfg.initial_lr));
    }
    double chamfer = 0.0;
    const std::size_t vb = val_begin == 0 ? 0 : val_begin;
    for (std::size_t i = vb; i < data.size(); ++i)
      chamfer += chamfer_or_diagonal(decode_learned_sketch(net, data[i].field), data[i].sketch);
    reports.push_back({epoch, loss_sum / static_cast<double>(per_epoch), chamfer / static_cast<double>(data.size() - vb)});
    if (on_epoch) on_epoch(reports.back());
  }
  return reports;
}

/// Mean BCE of the network on clean inputs.
inline double decoder_loss(DecoderNet<float>& net, const std::vector<DecoderPair>& data) {
  double sum = 0.0;
  for (const auto& d : data) {
    nn::Tensor<float> x({1, 1, d.field.height(), d.field.width()});
    for (std::size_t i = 0; i < d.field.size(); ++i) x[i] = 2.0f * d.field[i] - 1.0f;
    sum += mask::binary_cross_entropy<float>(net.forward(x).data, d.sketch.values());
  }
  return sum / static_cast<double>(data.size());
}

/// Loss of the confident all-background predictor.
inline double all_background_loss(const std::vector<DecoderPair>& data) {
  double sum = 0.0;
  for (const auto& d : data) {
    const std::vector<float> zeros(d.sketch.size(), 0.0f);
    sum += mask::binary_cross_entropy<float>(zeros, d.sketch.values());
  }
  return sum / static_cast<double>(data.size());
}

enum class DecodeMethod { learned, threshold, marching_squares };

inline const char* to_string(DecodeMethod m) {
  switch (m) {
    case DecodeMethod::learned: return "learned";
    case DecodeMethod::threshold: return "threshold";
    case DecodeMethod::marching_squares: return "msquares";
  }
  return "?";
}

struct MethodMetrics {
  DecodeMethod method;
  double chamfer;
  double ink_fraction;
  double continuity;
};

struct DecoderComparison {
  std::array<MethodMetrics, 3> methods;
  const MethodMetrics& get(DecodeMethod m) const { return methods[static_cast<std::size_t>(m)]; }
};

/// Additive Gaussian noise on every value, clamped back into [0, 1).
template <class Rng>
UdfGrid corrupt_field(const UdfGrid& field, double sigma, Rng& rng) {
  require(sigma >= 0.0, ErrorCode::parameter_error, "noise level must be nonnegative");
  std::normal_distribution<double> normal(0.0, 1.0);
  UdfGrid out = field;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(std::clamp(field[i] + sigma * normal(rng), 0.0, static_cast<double>(kMaxFieldValue)));
  return out;
}

/// Iso-level polylines rasterized with unit width.
inline SketchBitmap decode_marching_squares(const UdfGrid& field) {
  return rasterize_polylines(marching_squares(field, default_decode_level(field.time_constant())), field.width(),
                             field.height(), 1);
}

inline DecoderComparison compare_decoders(const UdfGrid& field, const SketchBitmap& truth, DecoderNet<float>& net) {
  require(!is_blank(truth), ErrorCode::empty_ink, "ground truth sketch is blank");
  require(truth.width() == field.width() && truth.height() == field.height(), ErrorCode::shape_error,
          "field and ground truth dimensions differ");
  auto metrics = [&](DecodeMethod m, const SketchBitmap& s) {
    return MethodMetrics{m, chamfer_or_diagonal(s, truth), ink_fraction(s), continuity_score(s)};
  };
  return DecoderComparison{{metrics(DecodeMethod::learned, decode_learned_sketch(net, field)),
                            metrics(DecodeMethod::threshold, decode_threshold(field)),
                            metrics(DecodeMethod::marching_squares, decode_marching_squares(field))}};
}

inline std::string comparison_csv(const std::vector<DecoderComparison>& rows) {
  std::ostringstream out;
  out.precision(9);
  out << "fixture,method,chamfer,ink_fraction,continuity\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& m : rows[i].methods)
      out << i << ',' << to_string(m.method) << ',' << m.chamfer << ',' << m.ink_fraction << ',' << m.continuity << '\n';
  return out.str();
}

}  // namespace udfsketch::decoder
