#pragma once

#include <cmath>
#include <numbers>
#include <queue>
#include <random>
#include <vector>

#include "udfsketch/grid.hpp"
#include "udfsketch/marching_squares.hpp"

namespace udfsketch::data {

struct ShapeParams {
  int min_vertices = 5;
  int max_vertices = 12;
  double radius_jitter = 0.35;    // relative radial perturbation per vertex
  int smoothing_passes = 2;       // corner-cutting iterations
  double min_radius = 0.22;       // mean radius as a fraction of min(width, height)
  double max_radius = 0.40;
  int max_attempts = 10;
};

struct Shape {
  InstanceMask mask;
  Polyline contour;
  int vertex_count = 0;
};

namespace detail {

inline bool segments_cross(Point a, Point b, Point c, Point d) {
  auto orient = [](Point p, Point q, Point r) { return (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x); };
  const double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

inline bool self_intersects(const std::vector<Point>& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the wrap-around
      if (segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return true;
    }
  return false;
}

inline bool point_in_polygon(const std::vector<Point>& poly, double x, double y) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point a = poly[i], b = poly[j];
    if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) inside = !inside;
  }
  return inside;
}

/// Chaikin corner cutting on a closed polygon.
inline std::vector<Point> corner_cut(const std::vector<Point>& poly) {
  std::vector<Point> out;
  out.reserve(poly.size() * 2);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point a = poly[i], b = poly[(i + 1) % poly.size()];
    out.push_back({0.75 * a.x + 0.25 * b.x, 0.75 * a.y + 0.25 * b.y});
    out.push_back({0.25 * a.x + 0.75 * b.x, 0.25 * a.y + 0.75 * b.y});
  }
  return out;
}

/// Number of 4-connected components of pixels equal to `value`; when `outside_connects`
/// is set, pixels of that value on the canvas border all count as one component.
inline int count_components(const InstanceMask& mask, std::uint8_t value, bool outside_connects) {
  const int w = mask.width(), h = mask.height();
  std::vector<std::uint8_t> seen(mask.size(), 0);
  auto flood = [&](int sx, int sy) {
    std::queue<std::pair<int, int>> q;
    q.push({sx, sy});
    seen[static_cast<std::size_t>(sy) * w + sx] = 1;
    while (!q.empty()) {
      const auto [x, y] = q.front();
      q.pop();
      constexpr int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int nx = x + dx[k], ny = y + dy[k];
        if (!mask.in_bounds(nx, ny)) continue;
        const auto i = static_cast<std::size_t>(ny) * w + nx;
        if (seen[i] || mask[i] != value) continue;
        seen[i] = 1;
        q.push({nx, ny});
      }
    }
  };
  int components = 0;
  if (outside_connects) {
    bool any = false;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const bool border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
        if (border && mask.at(x, y) == value && !seen[static_cast<std::size_t>(y) * w + x]) {
          flood(x, y);
          any = true;
        }
      }
    components += any ? 1 : 0;
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask.at(x, y) == value && !seen[static_cast<std::size_t>(y) * w + x]) {
        flood(x, y);
        ++components;
      }
  return components;
}

}  // namespace detail

/// True when the mask is one 4-connected region with no enclosed background.
inline bool is_simply_connected(const InstanceMask& mask) {
  return count_nonzero(mask) > 0 && detail::count_components(mask, 1, false) == 1 &&
         detail::count_components(mask, 0, true) <= 1;
}

/// Random star polygon, smoothed by corner cutting, filled at pixel centers together
/// with its rasterized outline. Degenerate draws are retried.
template <class Rng>
Shape gen_shape(Rng& rng, int width, int height, const ShapeParams& params = {}) {
  require(width >= 16 && height >= 16, ErrorCode::parameter_error, "shape canvas must be at least 16x16");
  require(params.min_vertices >= 3 && params.min_vertices <= params.max_vertices, ErrorCode::parameter_error,
          "bad vertex range");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> vertices(params.min_vertices, params.max_vertices);
  const double side = std::min(width, height);
  for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
    const int n = vertices(rng);
    const double radius = side * (params.min_radius + (params.max_radius - params.min_radius) * unit(rng));
    const double reach = radius * (1.0 + params.radius_jitter);
    const double margin_x = std::min(reach, (width - 2) / 2.0);
    const double margin_y = std::min(reach, (height - 2) / 2.0);
    const double cx = margin_x + 0.5 + (width - 1 - 2 * margin_x) * unit(rng);
    const double cy = margin_y + 0.5 + (height - 1 - 2 * margin_y) * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);

    std::vector<Point> poly;
    for (int i = 0; i < n; ++i) {
      const double angle = phase + 2.0 * std::numbers::pi * (i + 0.35 * (unit(rng) - 0.5)) / n;
      const double r = radius * (1.0 + params.radius_jitter * (2.0 * unit(rng) - 1.0));
      poly.push_back({std::clamp(cx + r * std::cos(angle), 0.0, width - 1.0),
                      std::clamp(cy + r * std::sin(angle), 0.0, height - 1.0)});
    }
    for (int p = 0; p < params.smoothing_passes; ++p) poly = detail::corner_cut(poly);
    if (detail::self_intersects(poly)) continue;

    Polyline contour{poly, true};
    InstanceMask mask = sketch_as_mask(rasterize_polylines({contour}, width, height, 1));
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (detail::point_in_polygon(poly, x, y)) mask.at(x, y) = 1;
    if (!is_simply_connected(mask)) continue;
    return Shape{std::move(mask), std::move(contour), n};
  }
  fail(ErrorCode::generation_error, "could not draw a simple shape");
}

/// One-pixel closed outline of the contour.
inline SketchBitmap render_rough(const Polyline& contour, int width, int height) {
  require(contour.closed, ErrorCode::parameter_error, "rough rendering needs a closed contour");
  return rasterize_polylines({contour}, width, height, 1);
}

struct DetailParams {
  int hatch_spacing = 4;
  int hatch_style = 0;  // 0: horizontal, 1: diagonal
  int detail_strokes = 2;
};

struct DetailedSketch {
  SketchBitmap sketch;
  // Set when the mask left no room for interior strokes; the sketch is then the rough one.
  bool rough_only = false;
};

/// Contour plus interior hatching and short arcs, all clipped to the mask interior.
template <class Rng>
DetailedSketch render_detailed(const Polyline& contour, const InstanceMask& mask, Rng& rng,
                               const DetailParams& params = {}) {
  require(count_nonzero(mask) > 0, ErrorCode::empty_region, "detailed rendering needs a nonempty mask");
  require(params.hatch_spacing >= 2, ErrorCode::parameter_error, "hatch spacing must be at least 2");
  const int w = mask.width(), h = mask.height();
  SketchBitmap out = render_rough(contour, w, h);
  const std::size_t rough_ink = count_nonzero(out);

  // Interior: mask pixels whose 4-neighbors are all inside.
  InstanceMask interior(w, h);
  const SketchBitmap edge = mask_boundary(mask);
  for (std::size_t i = 0; i < mask.size(); ++i) interior[i] = (mask[i] && !edge[i]) ? 1 : 0;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Polyline> strokes;
  const int s = params.hatch_spacing;
  const int offset = static_cast<int>(unit(rng) * s) % s;
  if (params.hatch_style == 0) {
    for (int y = offset; y < h; y += s) strokes.push_back({{{0.0, double(y)}, {w - 1.0, double(y)}}, false});
  } else {
    for (int k = offset - h; k < w; k += s)
      strokes.push_back({{{double(k), 0.0}, {double(k + h - 1), h - 1.0}}, false});
  }
  const auto box = mask_bbox(mask);
  for (int i = 0; i < params.detail_strokes; ++i) {
    const double cx = box.x0 + unit(rng) * box.width();
    const double cy = box.y0 + unit(rng) * box.height();
    const double r = 1.5 + unit(rng) * 0.25 * std::min(box.width(), box.height());
    const double a0 = 2.0 * std::numbers::pi * unit(rng);
    Polyline arc;
    for (int k = 0; k <= 6; ++k) {
      const double a = a0 + k * (std::numbers::pi / 6.0);
      arc.points.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    strokes.push_back(std::move(arc));
  }
  const SketchBitmap detail = rasterize_polylines(strokes, w, h, 1);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (detail[i] && interior[i]) out[i] = 1;
  const bool rough_only = count_nonzero(out) <= rough_ink;
  return DetailedSketch{std::move(out), rough_only};
}

}  // namespace udfsketch::data
