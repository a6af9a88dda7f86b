#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "udfsketch/error.hpp"

namespace udfsketch {

/// Row-major raster with origin at the top-left, x rightward and y downward.
/// The tag parameter keeps sketches, masks and grayscale images from mixing.
template <class T, class Tag>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    require(width > 0 && height > 0, ErrorCode::shape_error, "grid dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  Grid(int width, int height, std::vector<T> data) : width_(width), height_(height), data_(std::move(data)) {
    require(width > 0 && height > 0, ErrorCode::shape_error, "grid dimensions must be positive");
    require(data_.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
            ErrorCode::shape_error, "grid length must equal width * height");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool in_bounds(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& at(int x, int y) { return data_[index(x, y)]; }
  const T& at(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  template <class OtherTag>
  bool same_shape(const Grid<T, OtherTag>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

struct SketchTag {};
struct MaskTag {};
struct GrayTag {};

/// Binary ink raster: 1 = black stroke pixel, 0 = white background.
using SketchBitmap = Grid<std::uint8_t, SketchTag>;
/// Binary region raster: 1 = inside the object.
using InstanceMask = Grid<std::uint8_t, MaskTag>;
/// 8-bit intensities, 0 = black.
using GrayBitmap = Grid<std::uint8_t, GrayTag>;

/// Half-open pixel box [x0, x1) x [y0, y1).
struct BBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool valid_for(int canvas_width, int canvas_height) const noexcept {
    return x0 >= 0 && y0 >= 0 && x0 < x1 && y0 < y1 && x1 <= canvas_width && y1 <= canvas_height;
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Abstraction level of a generation pass. Only rough and detailed are generation targets.
enum class Stage : int { box = 1, rough = 2, detailed = 3 };

inline Stage stage_from_int(int value) {
  require(value >= 1 && value <= 3, ErrorCode::parameter_error, "stage indicator must be 1, 2 or 3");
  return static_cast<Stage>(value);
}

inline void require_generation_stage(Stage stage) {
  require(stage == Stage::rough || stage == Stage::detailed, ErrorCode::parameter_error,
          "only stages 2 and 3 are generation targets");
}

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Sub-pixel polyline. Closed polylines do not repeat their first point at the end.
struct Polyline {
  std::vector<Point> points;
  bool closed = false;
};

template <class T, class Tag>
std::size_t count_nonzero(const Grid<T, Tag>& grid) {
  return static_cast<std::size_t>(
      std::count_if(grid.values().begin(), grid.values().end(), [](T v) { return v != T{}; }));
}

inline bool is_blank(const SketchBitmap& sketch) { return count_nonzero(sketch) == 0; }

inline double ink_fraction(const SketchBitmap& sketch) {
  return static_cast<double>(count_nonzero(sketch)) / static_cast<double>(sketch.size());
}

inline InstanceMask bbox_to_mask(const BBox& box, int width, int height) {
  require(box.valid_for(width, height), ErrorCode::bounds_error, "box does not fit the canvas");
  InstanceMask mask(width, height);
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x) mask.at(x, y) = 1;
  return mask;
}

/// Tightest box around the true pixels.
inline BBox mask_bbox(const InstanceMask& mask) {
  BBox box{mask.width(), mask.height(), -1, -1};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      box.x0 = std::min(box.x0, x);
      box.y0 = std::min(box.y0, y);
      box.x1 = std::max(box.x1, x + 1);
      box.y1 = std::max(box.y1, y + 1);
    }
  }
  require(box.x1 > 0, ErrorCode::empty_region, "mask has no true pixels");
  return box;
}

inline double mask_area_fraction(const InstanceMask& mask) {
  return static_cast<double>(count_nonzero(mask)) / static_cast<double>(mask.size());
}

/// Fraction of ink pixels that fall inside the mask.
inline double ink_containment(const SketchBitmap& sketch, const InstanceMask& mask) {
  require(sketch.same_shape(mask), ErrorCode::shape_error, "sketch and mask dimensions differ");
  std::size_t ink = 0;
  std::size_t inside = 0;
  for (std::size_t i = 0; i < sketch.size(); ++i) {
    if (!sketch[i]) continue;
    ++ink;
    if (mask[i]) ++inside;
  }
  require(ink > 0, ErrorCode::empty_ink, "sketch has no ink");
  return static_cast<double>(inside) / static_cast<double>(ink);
}

/// Intersection over union; two empty masks agree vacuously (1.0).
inline double mask_iou(const InstanceMask& a, const InstanceMask& b) {
  require(a.same_shape(b), ErrorCode::shape_error, "mask dimensions differ");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline InstanceMask sketch_as_mask(const SketchBitmap& sketch) {
  return InstanceMask(sketch.width(), sketch.height(), std::vector<std::uint8_t>(sketch.values().begin(), sketch.values().end()));
}

inline SketchBitmap mask_as_sketch(const InstanceMask& mask) {
  return SketchBitmap(mask.width(), mask.height(), std::vector<std::uint8_t>(mask.values().begin(), mask.values().end()));
}

/// Pixels within Euclidean radius `radius` of any true pixel (disk structuring element).
template <class Tag>
Grid<std::uint8_t, Tag> dilate(const Grid<std::uint8_t, Tag>& grid, int radius) {
  Grid<std::uint8_t, Tag> out(grid.width(), grid.height());
  const int r2 = radius * radius;
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      if (!grid.at(x, y)) continue;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
          if (dx * dx + dy * dy <= r2 && out.in_bounds(x + dx, y + dy)) out.at(x + dx, y + dy) = 1;
    }
  }
  return out;
}

/// True pixels of the mask that touch a false pixel or the canvas edge (4-neighborhood).
inline SketchBitmap mask_boundary(const InstanceMask& mask) {
  SketchBitmap out(mask.width(), mask.height());
  constexpr int dx[4] = {1, -1, 0, 0};
  constexpr int dy[4] = {0, 0, 1, -1};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      for (int k = 0; k < 4; ++k) {
        const int nx = x + dx[k];
        const int ny = y + dy[k];
        if (!mask.in_bounds(nx, ny) || !mask.at(nx, ny)) {
          out.at(x, y) = 1;
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace udfsketch
