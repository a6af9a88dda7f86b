#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "udfsketch/config.hpp"
#include "udfsketch/diffusion/generator_net.hpp"
#include "udfsketch/diffusion/schedule.hpp"
#include "udfsketch/diffusion/signal.hpp"
#include "udfsketch/nn/optim.hpp"
#include "udfsketch/udf.hpp"

namespace udfsketch::diffusion {

using Rng = std::mt19937_64;

/// One conditioning/target pair: bbox mask -> rough field (stage 2) or
/// instance mask -> detailed field (stage 3).
struct TrainSample {
  InstanceMask condition_mask;
  UdfGrid target_udf;
  Stage stage = Stage::rough;
};

/// What the diffusion model is trained to produce: the transformed distance field,
/// or the raw +-1 sketch (the baseline representation).
enum class Representation { udf, binary };

struct TrainConfig {
  long total_steps = 20000;
  int batch_size = 16;
  double initial_lr = 2e-4;
  int diffusion_steps = 200;
  double beta_start = 1e-4;
  double beta_end = 2e-2;
  std::uint64_t seed = 0;
  long log_every = 100;
  Representation representation = Representation::udf;
  // Exponential moving average of the weights, copied into the net when training ends.
  // Zero disables it.
  double ema_decay = 0.0;

  NoiseSchedule schedule() const { return make_linear_schedule(diffusion_steps, beta_start, beta_end); }
};

inline TrainConfig train_config_from(const KeyValueConfig& kv, TrainConfig cfg = {}) {
  cfg.total_steps = kv.get_long("total_steps", cfg.total_steps);
  cfg.batch_size = static_cast<int>(kv.get_long("batch_size", cfg.batch_size));
  cfg.initial_lr = kv.get_double("initial_lr", cfg.initial_lr);
  cfg.diffusion_steps = static_cast<int>(kv.get_long("diffusion_steps", cfg.diffusion_steps));
  cfg.beta_start = kv.get_double("beta_start", cfg.beta_start);
  cfg.beta_end = kv.get_double("beta_end", cfg.beta_end);
  cfg.seed = static_cast<std::uint64_t>(kv.get_long("seed", static_cast<long>(cfg.seed)));
  cfg.log_every = kv.get_long("log_every", cfg.log_every);
  cfg.ema_decay = kv.get_double("ema_decay", cfg.ema_decay);
  const std::string rep = kv.get_string("representation", cfg.representation == Representation::udf ? "udf" : "binary");
  if (rep != "udf" && rep != "binary") fail(ErrorCode::configuration_error, "representation must be udf or binary");
  cfg.representation = rep == "udf" ? Representation::udf : Representation::binary;
  require(cfg.total_steps > 0 && cfg.batch_size > 0 && cfg.initial_lr > 0.0 && cfg.log_every > 0,
          ErrorCode::configuration_error, "training sizes and rates must be positive");
  require(cfg.ema_decay >= 0.0 && cfg.ema_decay < 1.0, ErrorCode::configuration_error, "ema_decay must lie in [0, 1)");
  return cfg;
}

struct LossPoint {
  long step;
  double lr;
  double loss;
};

inline std::string loss_curve_csv(const std::vector<LossPoint>& curve) {
  std::ostringstream out;
  out << "step,lr,loss\n";
  out.precision(9);
  for (const auto& p : curve) out << p.step << ',' << p.lr << ',' << p.loss << '\n';
  return out.str();
}

/// Target signal of a sample under the chosen representation.
inline nn::Tensor<float> target_signal(const TrainSample& sample, Representation rep) {
  if (rep == Representation::udf) return udf_to_signal(sample.target_udf);
  return sketch_to_signal(decode_threshold(sample.target_udf));
}

/// A materialized minibatch: x0 signals, condition masks, timesteps, stages and noise.
struct DiffusionBatch {
  nn::Tensor<float> x0;
  nn::Tensor<float> masks;
  std::vector<int> timesteps;
  std::vector<Stage> stages;
  nn::Tensor<float> noise;
};

template <class Rng>
DiffusionBatch draw_batch(const std::vector<TrainSample>& data, const std::vector<nn::Tensor<float>>& signals,
                          int batch_size, const NoiseSchedule& schedule, Rng& rng) {
  require(!data.empty(), ErrorCode::configuration_error, "training batch needs data");
  const int h = data[0].condition_mask.height();
  const int w = data[0].condition_mask.width();
  DiffusionBatch b{nn::Tensor<float>({batch_size, 1, h, w}), nn::Tensor<float>({batch_size, 1, h, w}), {}, {},
                   nn::Tensor<float>({batch_size, 1, h, w})};
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::uniform_int_distribution<int> step(1, schedule.steps);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (int n = 0; n < batch_size; ++n) {
    const std::size_t k = pick(rng);
    require(data[k].condition_mask.width() == w && data[k].condition_mask.height() == h, ErrorCode::shape_error,
            "training samples must share one canvas size");
    std::copy(signals[k].data.begin(), signals[k].data.end(), b.x0.channel_ptr(n, 0));
    write_mask_channel(data[k].condition_mask, b.masks.channel_ptr(n, 0));
    b.timesteps.push_back(step(rng));
    b.stages.push_back(data[k].stage);
  }
  for (auto& v : b.noise.data) v = normal(rng);
  return b;
}

/// Network input (N, 2, H, W) from noisy signals and mask channels.
inline nn::Tensor<float> generator_input(const nn::Tensor<float>& x_t, const nn::Tensor<float>& masks) {
  return nn::concat_channels(x_t, masks);
}

inline nn::Tensor<float> noisy_batch(const DiffusionBatch& b, const NoiseSchedule& schedule) {
  nn::Tensor<float> x_t(b.x0.shape);
  const std::size_t plane = b.x0.plane();
  for (int n = 0; n < b.x0.batch(); ++n) {
    const int t = b.timesteps[static_cast<std::size_t>(n)];
    const double a = std::sqrt(schedule.alpha_bar[t]);
    const double s = std::sqrt(1.0 - schedule.alpha_bar[t]);
    const float* x0 = b.x0.channel_ptr(n, 0);
    const float* e = b.noise.channel_ptr(n, 0);
    float* dst = x_t.channel_ptr(n, 0);
    for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<float>(a * x0[i] + s * e[i]);
  }
  return x_t;
}

/// Noise-prediction MSE on one batch; with `backward` set, accumulates gradients.
inline double ddpm_batch_loss(GeneratorNet<float>& net, const DiffusionBatch& b, const NoiseSchedule& schedule,
                              bool backward) {
  const nn::Tensor<float> pred = net.forward(generator_input(noisy_batch(b, schedule), b.masks), b.timesteps, b.stages);
  double loss = 0.0;
  nn::Tensor<float> grad(pred.shape);
  const double scale = 2.0 / static_cast<double>(pred.numel());
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - b.noise[i];
    loss += d * d;
    grad[i] = static_cast<float>(scale * d);
  }
  if (backward) net.backward(grad);
  return loss / static_cast<double>(pred.numel());
}

/// Mean squared error between unit-normal noise and its prediction at uniformly drawn
/// timesteps, one per sample.
template <class Rng>
double ddpm_loss(GeneratorNet<float>& net, const std::vector<TrainSample>& batch, const NoiseSchedule& schedule,
                 Rng& rng, Representation rep = Representation::udf) {
  require(!batch.empty(), ErrorCode::parameter_error, "loss needs a nonempty batch");
  std::vector<nn::Tensor<float>> signals;
  for (const auto& s : batch) signals.push_back(target_signal(s, rep));
  // Evaluate every sample exactly once, in order.
  const int h = batch[0].condition_mask.height(), w = batch[0].condition_mask.width();
  const int n = static_cast<int>(batch.size());
  DiffusionBatch b{nn::Tensor<float>({n, 1, h, w}), nn::Tensor<float>({n, 1, h, w}), {}, {},
                   nn::Tensor<float>({n, 1, h, w})};
  std::uniform_int_distribution<int> step(1, schedule.steps);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (int i = 0; i < n; ++i) {
    std::copy(signals[i].data.begin(), signals[i].data.end(), b.x0.channel_ptr(i, 0));
    write_mask_channel(batch[i].condition_mask, b.masks.channel_ptr(i, 0));
    b.timesteps.push_back(step(rng));
    b.stages.push_back(batch[i].stage);
  }
  for (auto& v : b.noise.data) v = normal(rng);
  return ddpm_batch_loss(net, b, schedule, false);
}

struct TrainResult {
  std::vector<LossPoint> curve;
};

/// Deterministic given the config seed and the initial weights. Logged loss is the mean
/// over the preceding `log_every` steps; the curve's final entry is the last step.
inline TrainResult train(GeneratorNet<float>& net, const std::vector<TrainSample>& dataset, const TrainConfig& cfg,
                         const std::function<void(const LossPoint&)>& on_log = {}) {
  require(!dataset.empty(), ErrorCode::configuration_error, "training dataset is empty");
  bool has_rough = false, has_detailed = false;
  for (const auto& s : dataset) {
    has_rough |= s.stage == Stage::rough;
    has_detailed |= s.stage == Stage::detailed;
    require_generation_stage(s.stage);
  }
  require(has_rough && has_detailed, ErrorCode::configuration_error, "dataset must contain both stage 2 and stage 3 samples");

  const NoiseSchedule schedule = cfg.schedule();
  std::vector<nn::Tensor<float>> signals;
  signals.reserve(dataset.size());
  for (const auto& s : dataset) signals.push_back(target_signal(s, cfg.representation));

  Rng rng(cfg.seed);
  auto params = net.parameters();
  nn::Adam<float> adam(params);
  std::vector<std::vector<double>> ema;
  if (cfg.ema_decay > 0.0)
    for (auto* p : params) ema.emplace_back(p->value.data.begin(), p->value.data.end());
  TrainResult result;
  double window = 0.0;
  long in_window = 0;
  for (long step = 1; step <= cfg.total_steps; ++step) {
    const double lr = nn::cosine_lr(step, cfg.total_steps, cfg.initial_lr);
    const DiffusionBatch batch = draw_batch(dataset, signals, cfg.batch_size, schedule, rng);
    nn::zero_grad(params);
    window += ddpm_batch_loss(net, batch, schedule, true);
    ++in_window;
    adam.step(lr);
    for (std::size_t k = 0; k < ema.size(); ++k) {
      const auto& v = params[k]->value.data;
      for (std::size_t i = 0; i < v.size(); ++i) ema[k][i] = cfg.ema_decay * ema[k][i] + (1.0 - cfg.ema_decay) * v[i];
    }
    if (step % cfg.log_every == 0 || step == cfg.total_steps) {
      result.curve.push_back({step, lr, window / static_cast<double>(in_window)});
      if (on_log) on_log(result.curve.back());
      window = 0.0;
      in_window = 0;
    }
  }
  for (std::size_t k = 0; k < ema.size(); ++k)
    std::transform(ema[k].begin(), ema[k].end(), params[k]->value.data.begin(), [](double v) { return static_cast<float>(v); });
  return result;
}

/// Noise predictor used by ancestral sampling: (x_t (N,1,H,W), mask channels (N,1,H,W),
/// t, stage) -> predicted noise (N,1,H,W).
using NoisePredictor =
    std::function<nn::Tensor<float>(const nn::Tensor<float>&, const nn::Tensor<float>&, int, Stage)>;

inline NoisePredictor net_predictor(GeneratorNet<float>& net) {
  return [&net](const nn::Tensor<float>& x_t, const nn::Tensor<float>& masks, int t, Stage stage) {
    const std::vector<int> ts(static_cast<std::size_t>(x_t.batch()), t);
    const std::vector<Stage> st(static_cast<std::size_t>(x_t.batch()), stage);
    return net.forward(generator_input(x_t, masks), ts, st);
  };
}

/// Single-mask noise prediction with the mask rendered as a +-1 channel.
inline nn::Tensor<float> predict_eps(GeneratorNet<float>& net, const nn::Tensor<float>& x_t, const InstanceMask& mask,
                                     int t, Stage stage) {
  require_generation_stage(stage);
  require(x_t.rank() == 4 && x_t.batch() == 1 && x_t.channels() == 1 && x_t.height() == mask.height() &&
              x_t.width() == mask.width(),
          ErrorCode::shape_error, "x_t must be (1, 1, H, W) matching the mask");
  nn::Tensor<float> m({1, 1, mask.height(), mask.width()});
  write_mask_channel(mask, m.channel_ptr(0, 0));
  return net_predictor(net)(x_t, m, t, stage);
}

/// Ancestral sampling from x_T ~ N(0, I) down to x_0, batched over masks. Returns the
/// raw x_0 signal (N, 1, H, W).
template <class Rng>
nn::Tensor<float> ancestral_sample(const NoisePredictor& predictor, const std::vector<InstanceMask>& masks, Stage stage,
                                   const NoiseSchedule& schedule, Rng& rng) {
  require_generation_stage(stage);
  require(!masks.empty(), ErrorCode::parameter_error, "sampling needs at least one mask");
  const int n = static_cast<int>(masks.size());
  const int h = masks[0].height(), w = masks[0].width();
  nn::Tensor<float> cond({n, 1, h, w});
  for (int i = 0; i < n; ++i) {
    require(masks[i].width() == w && masks[i].height() == h, ErrorCode::shape_error, "masks must share dimensions");
    write_mask_channel(masks[i], cond.channel_ptr(i, 0));
  }
  std::normal_distribution<float> normal(0.0f, 1.0f);
  nn::Tensor<float> x({n, 1, h, w});
  for (auto& v : x.data) v = normal(rng);
  for (int t = schedule.steps; t >= 1; --t) {
    const nn::Tensor<float> eps = predictor(x, cond, t, stage);
    const double coef = schedule.beta[t] / std::sqrt(1.0 - schedule.alpha_bar[t]);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha[t]);
    const double sigma = t > 1 ? std::sqrt(schedule.posterior_variance[t]) : 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
      double next = (x[i] - coef * eps[i]) * inv_sqrt_alpha;
      if (t > 1) next += sigma * normal(rng);
      x[i] = static_cast<float>(next);
    }
  }
  return x;
}

/// Samples one field per mask and maps each back to [0, 1).
template <class Rng>
std::vector<UdfGrid> sample_batch(GeneratorNet<float>& net, const std::vector<InstanceMask>& masks, Stage stage,
                                  const NoiseSchedule& schedule, Rng& rng, double time_constant) {
  const nn::Tensor<float> x0 = ancestral_sample(net_predictor(net), masks, stage, schedule, rng);
  std::vector<UdfGrid> out;
  for (int i = 0; i < x0.batch(); ++i) out.push_back(signal_to_udf(x0, time_constant, i));
  return out;
}

template <class Rng>
UdfGrid sample(GeneratorNet<float>& net, const InstanceMask& mask, Stage stage, const NoiseSchedule& schedule, Rng& rng) {
  return sample_batch(net, {mask}, stage, schedule, rng, default_time_constant(mask.width(), mask.height())).front();
}

/// Decodes a raw sampled signal under the given representation: the field path
/// thresholds the mapped field, the binary path marks negative signal as ink.
inline SketchBitmap decode_signal(const nn::Tensor<float>& x0, int n, Representation rep, double time_constant) {
  if (rep == Representation::udf) return decode_threshold(signal_to_udf(x0, time_constant, n));
  SketchBitmap out(x0.width(), x0.height());
  const float* src = x0.channel_ptr(n, 0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[i] < 0.0f ? 1 : 0;
  return out;
}

}  // namespace udfsketch::diffusion
