#pragma once

#include <algorithm>

#include "udfsketch/grid.hpp"
#include "udfsketch/nn/tensor.hpp"
#include "udfsketch/udf.hpp"

namespace udfsketch::diffusion {

// Range adaptation at the network boundary: field values in [0, 1) map to [-1, 1).

inline constexpr float kSignalClampMax = 1.0f - 1e-6f;

/// v -> 2v - 1 as a (1, 1, H, W) tensor.
inline nn::Tensor<float> udf_to_signal(const UdfGrid& field) {
  nn::Tensor<float> out({1, 1, field.height(), field.width()});
  for (std::size_t i = 0; i < field.size(); ++i) out[i] = 2.0f * field[i] - 1.0f;
  return out;
}

/// Inverse of udf_to_signal for batch item `n`, clamped to [0, 1 - 1e-6].
template <class S>
UdfGrid signal_to_udf(const nn::Tensor<S>& x, double time_constant, int n = 0) {
  require(x.rank() == 4 && x.channels() == 1, ErrorCode::shape_error, "signal must be (N, 1, H, W)");
  UdfGrid out(x.width(), x.height(), time_constant);
  const S* src = x.channel_ptr(n, 0);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::clamp(static_cast<float>(0.5 * (static_cast<double>(src[i]) + 1.0)), 0.0f, kSignalClampMax);
  return out;
}

/// Binary representation for the raw-sketch baseline: ink -> -1, background -> +1.
inline nn::Tensor<float> sketch_to_signal(const SketchBitmap& sketch) {
  nn::Tensor<float> out({1, 1, sketch.height(), sketch.width()});
  for (std::size_t i = 0; i < sketch.size(); ++i) out[i] = sketch[i] ? -1.0f : 1.0f;
  return out;
}

/// Mask rendered as a +-1 condition channel.
inline void write_mask_channel(const InstanceMask& mask, float* dst) {
  for (std::size_t i = 0; i < mask.size(); ++i) dst[i] = mask[i] ? 1.0f : -1.0f;
}

}  // namespace udfsketch::diffusion
