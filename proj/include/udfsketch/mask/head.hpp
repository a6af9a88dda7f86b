#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "udfsketch/diffusion/signal.hpp"
#include "udfsketch/mask/losses.hpp"
#include "udfsketch/nn/optim.hpp"
#include "udfsketch/nn/unet.hpp"
#include "udfsketch/udf.hpp"

namespace udfsketch::mask {

struct MaskHeadConfig {
  std::array<int, 3> widths{16, 32, 32};
  int level1_blocks = 1;
  int bottleneck_blocks = 2;
  int up_level1_blocks = 1;
};

/// Encoder-decoder from (field signal, box channel) to per-pixel inside probabilities.
template <class S>
class MaskHeadNet {
 public:
  MaskHeadNet() : MaskHeadNet(MaskHeadConfig{}) {}
  explicit MaskHeadNet(const MaskHeadConfig& cfg)
      : cfg_(cfg),
        unet_("mask.unet", nn::UNetConfig{.in_channels = 2,
                                          .out_channels = 1,
                                          .widths = cfg.widths,
                                          .level1_blocks = cfg.level1_blocks,
                                          .bottleneck_blocks = cfg.bottleneck_blocks,
                                          .up_level1_blocks = cfg.up_level1_blocks,
                                          .emb_dim = 0,
                                          .skips = true,
                                          .out_gain = 1.0}) {}

  template <class Rng>
  void init(Rng& rng) {
    unet_.init(rng);
  }

  /// x: (N, 2, H, W) -> probabilities (N, 1, H, W).
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

  const MaskHeadConfig& config() const noexcept { return cfg_; }

 private:
  MaskHeadConfig cfg_;
  nn::UNet<S> unet_;
  nn::Tensor<S> probs_;
};

struct MaskExample {
  UdfGrid field;
  BBox box;
  InstanceMask mask;
};

/// Writes the (signal, +-1 box) channels of one example into batch slot `n`.
inline void write_mask_head_input(const UdfGrid& field, const BBox& box, nn::Tensor<float>& x, int n) {
  require(x.channels() == 2 && x.height() == field.height() && x.width() == field.width(), ErrorCode::shape_error,
          "mask head input must be (N, 2, H, W) matching the field");
  float* sig = x.channel_ptr(n, 0);
  for (std::size_t i = 0; i < field.size(); ++i) sig[i] = 2.0f * field[i] - 1.0f;
  diffusion::write_mask_channel(bbox_to_mask(box, field.width(), field.height()), x.channel_ptr(n, 1));
}

struct MaskTrainConfig {
  long epochs = 30;
  int batch_size = 16;
  double initial_lr = 2e-3;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  MaskLossConfig loss;
};

struct MaskEpochReport {
  long epoch;
  double train_loss;
  double validation_iou;
};

/// Validation split: the trailing fraction of the examples, at least one, or the
/// whole set when there is a single example.
inline std::size_t validation_start(std::size_t count, double fraction) {
  if (count < 2) return 0;
  const auto held = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(fraction * count)), 1, count - 1);
  return count - held;
}

inline InstanceMask extract_mask_learned(MaskHeadNet<float>& net, const UdfGrid& field, const BBox& box,
                                         double threshold = 0.5) {
  nn::Tensor<float> x({1, 2, field.height(), field.width()});
  write_mask_head_input(field, box, x, 0);
  const nn::Tensor<float> p = net.forward(x);
  InstanceMask out(field.width(), field.height());
  for (int y = box.y0; y < box.y1; ++y)
    for (int xx = box.x0; xx < box.x1; ++xx)
      out.at(xx, y) = p[static_cast<std::size_t>(y) * field.width() + xx] > threshold ? 1 : 0;
  return out;
}

inline double mean_validation_iou(MaskHeadNet<float>& net, const std::vector<MaskExample>& data, std::size_t begin) {
  double sum = 0.0;
  for (std::size_t i = begin; i < data.size(); ++i)
    sum += mask_iou(extract_mask_learned(net, data[i].field, data[i].box), data[i].mask);
  return sum / static_cast<double>(data.size() - begin);
}

/// Minibatch Adam over shuffled epochs with a cosine rate. Deterministic given the seed
/// and the initial weights.
inline std::vector<MaskEpochReport> train_mask_head(MaskHeadNet<float>& net, const std::vector<MaskExample>& data,
                                                    const MaskTrainConfig& cfg,
                                                    const std::function<void(const MaskEpochReport&)>& on_epoch = {}) {
  require(!data.empty(), ErrorCode::configuration_error, "mask training set is empty");
  require(cfg.epochs > 0 && cfg.batch_size > 0 && cfg.initial_lr > 0.0, ErrorCode::configuration_error,
          "training sizes and rates must be positive");
  cfg.loss.validate();
  const int h = data[0].field.height(), w = data[0].field.width();
  for (const auto& e : data)
    require(e.field.width() == w && e.field.height() == h && e.mask.width() == w && e.mask.height() == h,
            ErrorCode::shape_error, "mask examples must share one canvas size");

  const std::size_t val_begin = validation_start(data.size(), cfg.validation_fraction);
  const std::size_t train_count = val_begin == 0 ? data.size() : val_begin;
  const long per_epoch = static_cast<long>((train_count + cfg.batch_size - 1) / cfg.batch_size);
  const long total = per_epoch * cfg.epochs;

  std::mt19937_64 rng(cfg.seed);
  auto params = net.parameters();
  nn::Adam<float> adam(params);
  std::vector<std::size_t> order(train_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<MaskEpochReport> reports;
  long step = 0;
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (long epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_count; start += cfg.batch_size) {
      const int n = static_cast<int>(std::min<std::size_t>(cfg.batch_size, train_count - start));
      nn::Tensor<float> x({n, 2, h, w});
      std::vector<std::uint8_t> target(plane * n);
      for (int k = 0; k < n; ++k) {
        const auto& e = data[order[start + k]];
        write_mask_head_input(e.field, e.box, x, k);
        std::copy(e.mask.values().begin(), e.mask.values().end(), target.begin() + static_cast<std::ptrdiff_t>(k * plane));
      }
      nn::zero_grad(params);
      const nn::Tensor<float> p = net.forward(x);
      nn::Tensor<float> grad(p.shape);
      double loss = 0.0;
      // Dice is per item; focal is a per-pixel mean, so both average over the batch.
      for (int k = 0; k < n; ++k) {
        const std::span<const float> pk(p.data.data() + k * plane, plane);
        const std::span<const std::uint8_t> tk(target.data() + k * plane, plane);
        loss += combined_mask_loss<float>(pk, tk, cfg.loss, std::span<float>(grad.data.data() + k * plane, plane));
      }
      for (auto& g : grad.data) g /= static_cast<float>(n);
      net.backward(grad);
      adam.step(nn::cosine_lr(++step, total, cfg.initial_lr));
      loss_sum += loss / n;
    }
    reports.push_back({epoch, loss_sum / static_cast<double>(per_epoch),
                       mean_validation_iou(net, data, val_begin == 0 ? 0 : val_begin)});
    if (on_epoch) on_epoch(reports.back());
  }
  return reports;
}

}  // namespace udfsketch::mask
