#pragma once

#include <cmath>
#include <random>
#include <string>

#include "udfsketch/nn/ops.hpp"
#include "udfsketch/nn/tensor.hpp"

namespace udfsketch::nn {

// Stateful wrappers over the functional ops. Each layer caches what its backward
// pass needs from the most recent forward call, so one instance serves one
// forward/backward at a time.

template <class S>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int stride = 1)
      : weight_(name + ".weight", {out_channels, in_channels, 3, 3}), bias_(name + ".bias", {out_channels}),
        stride_(stride) {}

  template <class Rng>
  void init(Rng& rng, double gain = 1.0) {
    fill_normal(weight_.value, rng, gain / std::sqrt(9.0 * weight_.value.dim(1)));
    bias_.value.fill(S{0});
  }

  Tensor<S> forward(const Tensor<S>& x) {
    input_ = x;
    return conv2d(x, weight_.value, bias_.value, stride_, &col_);
  }
  Tensor<S> backward(const Tensor<S>& dy) {
    return conv2d_backward(input_, weight_.value, stride_, dy, weight_.grad, bias_.grad, &col_);
  }

  void collect(ParameterList<S>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Parameter<S>& weight() { return weight_; }
  Parameter<S>& bias() { return bias_; }

 private:
  Parameter<S> weight_;
  Parameter<S> bias_;
  int stride_ = 1;
  Tensor<S> input_;
  std::vector<S> col_;
};

template <class S>
class InstanceNorm {
 public:
  InstanceNorm() = default;
  InstanceNorm(const std::string& name, int channels)
      : scale_(name + ".scale", {channels}), shift_(name + ".shift", {channels}) {
    scale_.value.fill(S{1});
  }

  Tensor<S> forward(const Tensor<S>& x) { return instance_norm(x, scale_.value, shift_.value, &cache_); }
  Tensor<S> backward(const Tensor<S>& dy) {
    return instance_norm_backward(cache_, scale_.value, dy, scale_.grad, shift_.grad);
  }

  void collect(ParameterList<S>& out) {
    out.push_back(&scale_);
    out.push_back(&shift_);
  }

 private:
  Parameter<S> scale_;
  Parameter<S> shift_;
  InstanceNormCache<S> cache_;
};

template <class S>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in_features, int out_features)
      : weight_(name + ".weight", {out_features, in_features}), bias_(name + ".bias", {out_features}) {}

  template <class Rng>
  void init(Rng& rng, double gain = 1.0) {
    fill_normal(weight_.value, rng, gain / std::sqrt(static_cast<double>(weight_.value.dim(1))));
    bias_.value.fill(S{0});
  }

  Tensor<S> forward(const Tensor<S>& x) {
    input_ = x;
    return linear(x, weight_.value, bias_.value);
  }
  Tensor<S> backward(const Tensor<S>& dy) { return linear_backward(input_, weight_.value, dy, weight_.grad, bias_.grad); }

  void collect(ParameterList<S>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  Parameter<S> weight_;
  Parameter<S> bias_;
  Tensor<S> input_;
};

template <class S>
class Silu {
 public:
  Tensor<S> forward(const Tensor<S>& x) {
    input_ = x;
    return silu(x);
  }
  Tensor<S> backward(const Tensor<S>& dy) const { return silu_backward(input_, dy); }

 private:
  Tensor<S> input_;
};

/// Pre-activation residual block: x + conv(silu(norm(conv(silu(norm(x))) + proj(emb)))).
/// The embedding projection is present only when emb_dim > 0.
template <class S>
class ResBlock {
 public:
  ResBlock() = default;
  ResBlock(const std::string& name, int channels, int emb_dim)
      : norm1_(name + ".norm1", channels), conv1_(name + ".conv1", channels, channels),
        norm2_(name + ".norm2", channels), conv2_(name + ".conv2", channels, channels), has_emb_(emb_dim > 0) {
    if (has_emb_) proj_ = Linear<S>(name + ".emb_proj", emb_dim, channels);
  }

  template <class Rng>
  void init(Rng& rng) {
    conv1_.init(rng);
    conv2_.init(rng, 0.5);
    if (has_emb_) proj_.init(rng);
  }

  /// `emb_act` is silu(embedding), shared by all blocks of a network.
  Tensor<S> forward(const Tensor<S>& x, const Tensor<S>* emb_act) {
    Tensor<S> h = conv1_.forward(act1_.forward(norm1_.forward(x)));
    if (has_emb_) add_channel_bias(h, proj_.forward(*emb_act));
    h = conv2_.forward(act2_.forward(norm2_.forward(h)));
    add_inplace(h, x);
    return h;
  }

  /// Returns dx; adds this block's contribution to d_emb_act when present.
  Tensor<S> backward(const Tensor<S>& dy, Tensor<S>* d_emb_act) {
    Tensor<S> g = norm2_.backward(act2_.backward(conv2_.backward(dy)));
    if (has_emb_) add_inplace(*d_emb_act, proj_.backward(channel_bias_backward(g)));
    Tensor<S> dx = norm1_.backward(act1_.backward(conv1_.backward(g)));
    add_inplace(dx, dy);
    return dx;
  }

  void collect(ParameterList<S>& out) {
    norm1_.collect(out);
    conv1_.collect(out);
    if (has_emb_) proj_.collect(out);
    norm2_.collect(out);
    conv2_.collect(out);
  }

 private:
  InstanceNorm<S> norm1_;
  Silu<S> act1_;
  Conv2d<S> conv1_;
  Linear<S> proj_;
  InstanceNorm<S> norm2_;
  Silu<S> act2_;
  Conv2d<S> conv2_;
  bool has_emb_ = false;
};

}  // namespace udfsketch::nn
