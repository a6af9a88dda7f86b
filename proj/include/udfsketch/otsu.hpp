#pragma once

#include <array>
#include <cstdint>

#include "udfsketch/grid.hpp"

namespace udfsketch {

struct OtsuResult {
  int threshold = 0;
  // Set when the image holds a single intensity; `threshold` is then that intensity.
  bool degenerate = false;
};

/// Threshold t maximizing between-class variance for the split {<= t} / {> t}.
/// Scores are compared exactly as rationals, so ties resolve to the smallest t.
inline OtsuResult otsu_threshold(const GrayBitmap& image) {
  require(!image.empty(), ErrorCode::parameter_error, "image is empty");
  std::array<std::uint64_t, 256> hist{};
  for (auto v : image.values()) ++hist[v];

  using u128 = unsigned __int128;
  std::uint64_t total = image.size();
  std::uint64_t sum = 0;
  for (int i = 0; i < 256; ++i) sum += hist[i] * static_cast<std::uint64_t>(i);

  // Between-class variance is proportional to (N*S0 - N0*S)^2 / (N0*N1).
  bool found = false;
  u128 best_num = 0;
  u128 best_den = 1;
  double best_score = -1.0;
  const bool exact = total <= (std::uint64_t{1} << 18);
  int best_t = 0;
  std::uint64_t n0 = 0;
  std::uint64_t s0 = 0;
  for (int t = 0; t < 255; ++t) {
    n0 += hist[t];
    s0 += hist[t] * static_cast<std::uint64_t>(t);
    const std::uint64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const auto a = static_cast<__int128>(total) * s0;
    const auto b = static_cast<__int128>(n0) * sum;
    const u128 diff = static_cast<u128>(a > b ? a - b : b - a);
    const u128 num = diff * diff;
    const u128 den = static_cast<u128>(n0) * n1;
    if (exact) {
      if (!found || num * best_den > best_num * den) {
        best_num = num;
        best_den = den;
        best_t = t;
        found = true;
      }
    } else {
      const double score = static_cast<double>(num) / static_cast<double>(den);
      if (!found || score > best_score) {
        best_score = score;
        best_t = t;
        found = true;
      }
    }
  }
  if (!found) return OtsuResult{static_cast<int>(image[0]), true};
  return OtsuResult{best_t, false};
}

/// Dark-on-light input: pixels at or below the threshold become ink.
inline SketchBitmap binarize(const GrayBitmap& image, int threshold) {
  require(threshold >= 0 && threshold <= 255, ErrorCode::parameter_error, "threshold must lie in [0, 255]");
  SketchBitmap out(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = image[i] <= threshold ? 1 : 0;
  return out;
}

}  // namespace udfsketch
