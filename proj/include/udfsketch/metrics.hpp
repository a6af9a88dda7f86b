#pragma once

#include "udfsketch/edt.hpp"
#include "udfsketch/grid.hpp"

namespace udfsketch {

/// Symmetric mean nearest-ink distance: half of each directed mean.
inline double chamfer_distance(const SketchBitmap& a, const SketchBitmap& b) {
  require(a.same_shape(b), ErrorCode::shape_error, "sketch dimensions differ");
  const DistanceGrid to_a = exact_edt(a);
  const DistanceGrid to_b = exact_edt(b);
  double sum_ab = 0.0;
  double sum_ba = 0.0;
  std::size_t na = 0;
  std::size_t nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]) {
      sum_ab += to_b[i];
      ++na;
    }
    if (b[i]) {
      sum_ba += to_a[i];
      ++nb;
    }
  }
  return 0.5 * sum_ab / static_cast<double>(na) + 0.5 * sum_ba / static_cast<double>(nb);
}

/// Fraction of ink pixels with at least two ink pixels among their 8 neighbors.
/// A blank sketch scores 0.
inline double continuity_score(const SketchBitmap& sketch) {
  std::size_t ink = 0;
  std::size_t connected = 0;
  for (int y = 0; y < sketch.height(); ++y) {
    for (int x = 0; x < sketch.width(); ++x) {
      if (!sketch.at(x, y)) continue;
      ++ink;
      int neighbors = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if ((dx || dy) && sketch.in_bounds(x + dx, y + dy) && sketch.at(x + dx, y + dy)) ++neighbors;
      if (neighbors >= 2) ++connected;
    }
  }
  return ink == 0 ? 0.0 : static_cast<double>(connected) / static_cast<double>(ink);
}

}  // namespace udfsketch
