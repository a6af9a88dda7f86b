#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "udfsketch/edt.hpp"
#include "udfsketch/grid.hpp"

namespace udfsketch {

struct UdfTag {};

/// Transformed unsigned distance field v = 1 - exp(-u / T), values in [0, 1).
/// T is held at float precision, matching the UDFG file.
class UdfGrid {
 public:
  UdfGrid() = default;
  UdfGrid(int width, int height, double time_constant, float fill = 0.0f)
      : values_(width, height, fill), time_constant_(static_cast<float>(time_constant)) {
    require(time_constant > 0.0, ErrorCode::parameter_error, "time constant must be positive");
  }
  UdfGrid(Grid<float, UdfTag> values, double time_constant)
      : values_(std::move(values)), time_constant_(static_cast<float>(time_constant)) {
    require(time_constant > 0.0, ErrorCode::parameter_error, "time constant must be positive");
  }

  int width() const noexcept { return values_.width(); }
  int height() const noexcept { return values_.height(); }
  std::size_t size() const noexcept { return values_.size(); }
  double time_constant() const noexcept { return time_constant_; }

  float& at(int x, int y) { return values_.at(x, y); }
  float at(int x, int y) const { return values_.at(x, y); }
  float& operator[](std::size_t i) { return values_[i]; }
  float operator[](std::size_t i) const { return values_[i]; }
  std::span<float> values() noexcept { return values_.values(); }
  std::span<const float> values() const noexcept { return values_.values(); }
  const Grid<float, UdfTag>& grid() const noexcept { return values_; }

  friend bool operator==(const UdfGrid&, const UdfGrid&) = default;

 private:
  Grid<float, UdfTag> values_;
  double time_constant_ = 1.0;
};

/// Canvas-diagonal scaled e-folding distance: 15 * sqrt(w^2 + h^2) / 540.
inline double default_time_constant(int width, int height) {
  require(width >= 1 && height >= 1, ErrorCode::parameter_error, "canvas dimensions must be positive");
  const double w = width;
  const double h = height;
  return 15.0 * std::sqrt(w * w + h * h) / 540.0;
}

inline double udf_value(double u, double time_constant) { return 1.0 - std::exp(-u / time_constant); }

inline double udf_inverse(double v, double time_constant) {
  require(v >= 0.0 && v < 1.0, ErrorCode::parameter_error, "field value must lie in [0, 1)");
  require(time_constant > 0.0, ErrorCode::parameter_error, "time constant must be positive");
  return -time_constant * std::log1p(-v);
}

/// Largest storable field value; far distances round up to 1 in float otherwise.
inline const float kMaxFieldValue = std::nextafter(1.0f, 0.0f);

inline UdfGrid udf_transform(const DistanceGrid& distances, double time_constant) {
  require(time_constant > 0.0, ErrorCode::parameter_error, "time constant must be positive");
  UdfGrid out(distances.width(), distances.height(), time_constant);
  for (std::size_t i = 0; i < distances.size(); ++i)
    out[i] = std::min(static_cast<float>(-std::expm1(-distances[i] / time_constant)), kMaxFieldValue);
  return out;
}

inline UdfGrid encode_sketch(const SketchBitmap& sketch, double time_constant) {
  require(time_constant > 0.0, ErrorCode::parameter_error, "time constant must be positive");
  return udf_transform(exact_edt(sketch), time_constant);
}

inline UdfGrid encode_sketch(const SketchBitmap& sketch) {
  return encode_sketch(sketch, default_time_constant(sketch.width(), sketch.height()));
}

/// Field level at half a pixel from the nearest stroke. Thresholding an encoded sketch
/// here recovers its ink set exactly.
inline double default_decode_level(double time_constant) { return udf_value(0.5, time_constant); }

inline SketchBitmap decode_threshold(const UdfGrid& field, double level) {
  require(level > 0.0 && level < 1.0, ErrorCode::parameter_error, "decode level must lie in (0, 1)");
  SketchBitmap out(field.width(), field.height());
  for (std::size_t i = 0; i < field.size(); ++i) out[i] = field[i] < level ? 1 : 0;
  return out;
}

inline SketchBitmap decode_threshold(const UdfGrid& field) {
  return decode_threshold(field, default_decode_level(field.time_constant()));
}

}  // namespace udfsketch
