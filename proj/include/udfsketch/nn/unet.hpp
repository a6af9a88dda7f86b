#pragma once

#include <array>
#include <string>
#include <vector>

#include "udfsketch/nn/layers.hpp"

namespace udfsketch::nn {

/// Three-level convolutional encoder-decoder shared by the generator, the mask head
/// and the sketch decoder.
///
///   conv_in -> [stride-2 conv -> level-1 blocks] -> [stride-2 conv -> bottleneck blocks]
///   -> upsample, conv (+ level-1 skip) -> up level-1 blocks
///   -> upsample, conv (+ level-0 skip) -> norm, silu, conv_out
///
/// Spatial dimensions must be multiples of 4.
struct UNetConfig {
  int in_channels = 1;
  int out_channels = 1;
  std::array<int, 3> widths{32, 32, 64};
  int level1_blocks = 1;
  int bottleneck_blocks = 2;
  int up_level1_blocks = 1;
  int emb_dim = 0;
  bool skips = true;
  double out_gain = 1.0;
};

template <class S>
class UNet {
 public:
  UNet() = default;
  UNet(const std::string& name, const UNetConfig& cfg) : cfg_(cfg) {
    const auto [c0, c1, c2] = cfg.widths;
    conv_in_ = Conv2d<S>(name + ".conv_in", cfg.in_channels, c0);
    down1_ = Conv2d<S>(name + ".down1", c0, c1, 2);
    for (int i = 0; i < cfg.level1_blocks; ++i)
      level1_.emplace_back(name + ".level1." + std::to_string(i), c1, cfg.emb_dim);
    down2_ = Conv2d<S>(name + ".down2", c1, c2, 2);
    for (int i = 0; i < cfg.bottleneck_blocks; ++i)
      mid_.emplace_back(name + ".mid." + std::to_string(i), c2, cfg.emb_dim);
    up1_ = Conv2d<S>(name + ".up1", c2, c1);
    for (int i = 0; i < cfg.up_level1_blocks; ++i)
      up_level1_.emplace_back(name + ".up_level1." + std::to_string(i), c1, cfg.emb_dim);
    up0_ = Conv2d<S>(name + ".up0", c1, c0);
    norm_out_ = InstanceNorm<S>(name + ".norm_out", c0);
    conv_out_ = Conv2d<S>(name + ".conv_out", c0, cfg.out_channels);
  }

  template <class Rng>
  void init(Rng& rng) {
    conv_in_.init(rng);
    down1_.init(rng);
    for (auto& b : level1_) b.init(rng);
    down2_.init(rng);
    for (auto& b : mid_) b.init(rng);
    up1_.init(rng);
    for (auto& b : up_level1_) b.init(rng);
    up0_.init(rng);
    conv_out_.init(rng, cfg_.out_gain);
  }

  Tensor<S> forward(const Tensor<S>& x, const Tensor<S>* emb_act = nullptr) {
    require(x.rank() == 4 && x.channels() == cfg_.in_channels, ErrorCode::shape_error, "network input channel mismatch");
    require(x.height() % 4 == 0 && x.width() % 4 == 0, ErrorCode::shape_error,
            "network input sides must be multiples of 4");
    Tensor<S> h0 = conv_in_.forward(x);
    Tensor<S> h1 = down1_.forward(act_down1_.forward(h0));
    for (auto& b : level1_) h1 = b.forward(h1, emb_act);
    Tensor<S> h2 = down2_.forward(act_down2_.forward(h1));
    for (auto& b : mid_) h2 = b.forward(h2, emb_act);
    Tensor<S> u1 = up1_.forward(upsample_nearest2(h2));
    if (cfg_.skips) add_inplace(u1, h1);
    for (auto& b : up_level1_) u1 = b.forward(u1, emb_act);
    Tensor<S> u0 = up0_.forward(upsample_nearest2(u1));
    if (cfg_.skips) add_inplace(u0, h0);
    return conv_out_.forward(act_out_.forward(norm_out_.forward(u0)));
  }

  Tensor<S> backward(const Tensor<S>& dy, Tensor<S>* d_emb_act = nullptr) {
    Tensor<S> du0 = norm_out_.backward(act_out_.backward(conv_out_.backward(dy)));
    Tensor<S> du1 = upsample_nearest2_backward(up0_.backward(du0));
    for (auto it = up_level1_.rbegin(); it != up_level1_.rend(); ++it) du1 = it->backward(du1, d_emb_act);
    Tensor<S> dh2 = upsample_nearest2_backward(up1_.backward(du1));
    for (auto it = mid_.rbegin(); it != mid_.rend(); ++it) dh2 = it->backward(dh2, d_emb_act);
    Tensor<S> dh1 = act_down2_.backward(down2_.backward(dh2));
    if (cfg_.skips) add_inplace(dh1, du1);
    for (auto it = level1_.rbegin(); it != level1_.rend(); ++it) dh1 = it->backward(dh1, d_emb_act);
    Tensor<S> dh0 = act_down1_.backward(down1_.backward(dh1));
    if (cfg_.skips) add_inplace(dh0, du0);
    return conv_in_.backward(dh0);
  }

  void collect(ParameterList<S>& out) {
    conv_in_.collect(out);
    down1_.collect(out);
    for (auto& b : level1_) b.collect(out);
    down2_.collect(out);
    for (auto& b : mid_) b.collect(out);
    up1_.collect(out);
    for (auto& b : up_level1_) b.collect(out);
    up0_.collect(out);
    norm_out_.collect(out);
    conv_out_.collect(out);
  }

  const UNetConfig& config() const noexcept { return cfg_; }

 private:
  UNetConfig cfg_;
  Conv2d<S> conv_in_;
  Silu<S> act_down1_;
  Conv2d<S> down1_;
  std::vector<ResBlock<S>> level1_;
  Silu<S> act_down2_;
  Conv2d<S> down2_;
  std::vector<ResBlock<S>> mid_;
  Conv2d<S> up1_;
  std::vector<ResBlock<S>> up_level1_;
  Conv2d<S> up0_;
  InstanceNorm<S> norm_out_;
  Silu<S> act_out_;
  Conv2d<S> conv_out_;
};

}  // namespace udfsketch::nn
