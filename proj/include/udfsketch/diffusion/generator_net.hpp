#pragma once

#include <span>
#include <string>
#include <vector>

#include "udfsketch/grid.hpp"
#include "udfsketch/nn/layers.hpp"
#include "udfsketch/nn/unet.hpp"

namespace udfsketch::diffusion {

struct GeneratorConfig {
  int base_width = 32;
  int emb_dim = 64;
  int level1_blocks = 1;
  int bottleneck_blocks = 2;
  int up_level1_blocks = 1;
};

/// Noise predictor conditioned on a mask channel and on a stage indicator.
///
/// Input is (N, 2, H, W): the noisy signal concatenated with the +-1 condition mask.
/// The timestep goes through a sinusoidal embedding and a two-layer projection; the
/// stage indicator selects a row of a learned table that is summed onto it, so the
/// embedding keeps its shape. Every residual block adds a projection of the embedding
/// to its channel biases.
template <class S>
class GeneratorNet {
 public:
  static constexpr int kStageSlots = 4;

  GeneratorNet() : GeneratorNet(GeneratorConfig{}) {}
  explicit GeneratorNet(const GeneratorConfig& cfg)
      : cfg_(cfg),
        time_fc1_("gen.time.fc1", cfg.emb_dim, cfg.emb_dim),
        time_fc2_("gen.time.fc2", cfg.emb_dim, cfg.emb_dim),
        stage_table_("gen.stage_table", {kStageSlots, cfg.emb_dim}),
        unet_("gen.unet", nn::UNetConfig{.in_channels = 2,
                                         .out_channels = 1,
                                         .widths = {cfg.base_width, cfg.base_width, 2 * cfg.base_width},
                                         .level1_blocks = cfg.level1_blocks,
                                         .bottleneck_blocks = cfg.bottleneck_blocks,
                                         .up_level1_blocks = cfg.up_level1_blocks,
                                         .emb_dim = cfg.emb_dim,
                                         .skips = true,
                                         .out_gain = 0.1}) {}

  template <class Rng>
  void init(Rng& rng) {
    time_fc1_.init(rng);
    time_fc2_.init(rng);
    nn::fill_normal(stage_table_.value, rng, 1.0);
    unet_.init(rng);
  }

  /// Time embedding after the projection, before the stage row is added. Shape (N, emb_dim).
  nn::Tensor<S> time_embedding(std::span<const int> timesteps) {
    const int n = static_cast<int>(timesteps.size());
    nn::Tensor<S> sin({n, cfg_.emb_dim});
    for (int i = 0; i < n; ++i) {
      const auto e = nn::sinusoidal_embedding<S>(timesteps[i], cfg_.emb_dim);
      std::copy(e.data.begin(), e.data.end(), sin.data.begin() + static_cast<std::ptrdiff_t>(i) * cfg_.emb_dim);
    }
    return time_fc2_.forward(time_act_.forward(time_fc1_.forward(sin)));
  }

  /// Time embedding plus the stage table row. Shape (N, emb_dim), same as time_embedding.
  nn::Tensor<S> embedding(std::span<const int> timesteps, std::span<const Stage> stages) {
    require(timesteps.size() == stages.size(), ErrorCode::shape_error, "one stage per timestep required");
    nn::Tensor<S> emb = time_embedding(timesteps);
    for (std::size_t i = 0; i < stages.size(); ++i) {
      require_generation_stage(stages[i]);
      const int row = static_cast<int>(stages[i]);
      for (int k = 0; k < cfg_.emb_dim; ++k)
        emb[i * cfg_.emb_dim + k] += stage_table_.value[static_cast<std::size_t>(row) * cfg_.emb_dim + k];
    }
    return emb;
  }

  nn::Tensor<S> forward(const nn::Tensor<S>& x, std::span<const int> timesteps, std::span<const Stage> stages) {
    require(x.rank() == 4 && x.channels() == 2 && static_cast<std::size_t>(x.batch()) == timesteps.size(),
            ErrorCode::shape_error, "generator input must be (N, 2, H, W) with one timestep per item");
    nn::require_finite(x, "generator input");
    stages_.assign(stages.begin(), stages.end());
    const nn::Tensor<S> emb = embedding(timesteps, stages);
    const nn::Tensor<S> emb_act = emb_act_.forward(emb);
    nn::Tensor<S> out = unet_.forward(x, &emb_act);
    nn::require_finite(out, "generator output");
    return out;
  }

  /// Accumulates parameter gradients; returns the gradient w.r.t. the input tensor.
  nn::Tensor<S> backward(const nn::Tensor<S>& d_out) {
    nn::Tensor<S> d_emb_act({d_out.batch(), cfg_.emb_dim});
    nn::Tensor<S> dx = unet_.backward(d_out, &d_emb_act);
    const nn::Tensor<S> d_emb = emb_act_.backward(d_emb_act);
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      const int row = static_cast<int>(stages_[i]);
      for (int k = 0; k < cfg_.emb_dim; ++k)
        stage_table_.grad[static_cast<std::size_t>(row) * cfg_.emb_dim + k] += d_emb[i * cfg_.emb_dim + k];
    }
    time_fc1_.backward(time_act_.backward(time_fc2_.backward(d_emb)));
    return dx;
  }

  nn::ParameterList<S> parameters() {
    nn::ParameterList<S> out;
    time_fc1_.collect(out);
    time_fc2_.collect(out);
    out.push_back(&stage_table_);
    unet_.collect(out);
    return out;
  }

  const GeneratorConfig& config() const noexcept { return cfg_; }
  const nn::Tensor<S>& stage_table() const noexcept { return stage_table_.value; }

 private:
  GeneratorConfig cfg_;
  nn::Linear<S> time_fc1_;
  nn::Silu<S> time_act_;
  nn::Linear<S> time_fc2_;
  nn::Parameter<S> stage_table_;
  nn::Silu<S> emb_act_;
  nn::UNet<S> unet_;
  std::vector<Stage> stages_;
};

}  // namespace udfsketch::diffusion
