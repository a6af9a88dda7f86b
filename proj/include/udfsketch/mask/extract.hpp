#pragma once

#include <queue>

#include "udfsketch/edt.hpp"
#include "udfsketch/grid.hpp"
#include "udfsketch/udf.hpp"

namespace udfsketch::mask {

inline constexpr int kGapRadius = 2;

/// Geometric mask from a rough field: threshold to strokes, close gaps by dilation,
/// flood the background in from the box border, and keep what lies farther than
/// `radius` from that background or from an open stretch of the box edge. Stroke
/// pixels inside the box are always kept.
inline InstanceMask extract_mask_deterministic(const UdfGrid& field, const BBox& box, int radius = kGapRadius) {
  const int w = field.width(), h = field.height();
  require(box.valid_for(w, h), ErrorCode::bounds_error, "box does not fit the canvas");
  require(radius >= 0, ErrorCode::parameter_error, "gap radius must be nonnegative");
  const InstanceMask region = bbox_to_mask(box, w, h);
  SketchBitmap strokes = decode_threshold(field);
  for (std::size_t i = 0; i < strokes.size(); ++i)
    if (!region[i]) strokes[i] = 0;
  require(!is_blank(strokes), ErrorCode::empty_region, "no strokes inside the box");

  const SketchBitmap closed = dilate(strokes, radius);
  SketchBitmap background(w, h);
  std::queue<std::pair<int, int>> frontier;
  auto seed = [&](int x, int y) {
    if (!closed.at(x, y) && !background.at(x, y)) {
      background.at(x, y) = 1;
      frontier.push({x, y});
    }
  };
  for (int x = box.x0; x < box.x1; ++x) {
    seed(x, box.y0);
    seed(x, box.y1 - 1);
  }
  for (int y = box.y0; y < box.y1; ++y) {
    seed(box.x0, y);
    seed(box.x1 - 1, y);
  }
  while (!frontier.empty()) {
    const auto [x, y] = frontier.front();
    frontier.pop();
    constexpr int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (box.contains(nx, ny)) seed(nx, ny);
    }
  }

  // Distances run on a canvas padded by one pixel. Outside pixels facing a non-stroke
  // box edge pixel count as background, which trims slivers the dilation cut off.
  const int pw = w + 2, ph = h + 2;
  SketchBitmap padded(pw, ph);
  bool any = false;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (background.at(x, y)) {
        padded.at(x + 1, y + 1) = 1;
        any = true;
      }
  auto open_edge = [&](int x, int y, int ox, int oy) {
    if (!strokes.at(x, y)) {
      padded.at(ox + 1, oy + 1) = 1;
      any = true;
    }
  };
  for (int x = box.x0; x < box.x1; ++x) {
    open_edge(x, box.y0, x, box.y0 - 1);
    open_edge(x, box.y1 - 1, x, box.y1);
  }
  for (int y = box.y0; y < box.y1; ++y) {
    open_edge(box.x0, y, box.x0 - 1, y);
    open_edge(box.x1 - 1, y, box.x1, y);
  }

  InstanceMask out = region;
  if (any) {
    const DistanceGrid to_background = exact_edt(padded);
    for (int y = box.y0; y < box.y1; ++y)
      for (int x = box.x0; x < box.x1; ++x)
        if (to_background.at(x + 1, y + 1) <= radius && !strokes.at(x, y)) out.at(x, y) = 0;
  }
  return out;
}

}  // namespace udfsketch::mask
