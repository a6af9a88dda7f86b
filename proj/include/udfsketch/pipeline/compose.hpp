#pragma once

#include <vector>

#include "udfsketch/grid.hpp"

namespace udfsketch::pipeline {

struct Layer {
  SketchBitmap sketch;
  InstanceMask mask;
  int dx = 0;
  int dy = 0;
};

/// Layers in back-to-front order.
struct CompositionCanvas {
  int width = 0;
  int height = 0;
  std::vector<Layer> layers;
};

/// Box covering a layer's mask and ink, before the offset.
inline BBox layer_extent(const Layer& layer) {
  BBox box{layer.mask.width(), layer.mask.height(), 0, 0};
  for (int y = 0; y < layer.mask.height(); ++y)
    for (int x = 0; x < layer.mask.width(); ++x)
      if (layer.mask.at(x, y) || layer.sketch.at(x, y)) {
        box.x0 = std::min(box.x0, x);
        box.y0 = std::min(box.y0, y);
        box.x1 = std::max(box.x1, x + 1);
        box.y1 = std::max(box.y1, y + 1);
      }
  return box;
}

/// Back-to-front painting: each layer clears the pixels under its mask, then paints its ink.
inline SketchBitmap compose(const CompositionCanvas& canvas) {
  require(!canvas.layers.empty(), ErrorCode::parameter_error, "composition needs at least one layer");
  require(canvas.width > 0 && canvas.height > 0, ErrorCode::shape_error, "canvas dimensions must be positive");
  SketchBitmap out(canvas.width, canvas.height);
  for (const auto& layer : canvas.layers) {
    require(layer.sketch.same_shape(layer.mask), ErrorCode::shape_error, "layer sketch and mask dimensions differ");
    const BBox e = layer_extent(layer);
    if (e.x0 >= e.x1) continue;  // nothing to paint
    const BBox placed{e.x0 + layer.dx, e.y0 + layer.dy, e.x1 + layer.dx, e.y1 + layer.dy};
    require(placed.valid_for(canvas.width, canvas.height), ErrorCode::bounds_error, "layer offset leaves the canvas");
    for (int y = e.y0; y < e.y1; ++y)
      for (int x = e.x0; x < e.x1; ++x)
        if (layer.mask.at(x, y)) out.at(x + layer.dx, y + layer.dy) = 0;
    for (int y = e.y0; y < e.y1; ++y)
      for (int x = e.x0; x < e.x1; ++x)
        if (layer.sketch.at(x, y)) out.at(x + layer.dx, y + layer.dy) = 1;
  }
  return out;
}

}  // namespace udfsketch::pipeline
