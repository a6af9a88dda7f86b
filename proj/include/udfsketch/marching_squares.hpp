#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "udfsketch/grid.hpp"
#include "udfsketch/udf.hpp"

namespace udfsketch {

namespace detail {

struct IsoSegment {
  std::int64_t from_edge;
  std::int64_t to_edge;
  Point from;
  Point to;
};

}  // namespace detail

/// Iso-contours of the field at `level`. Grid vertices sit at pixel centers (integer
/// coordinates). Segments are oriented with the below-level side on the left-hand turn
/// (positive cross product in image coordinates) and chained through shared cell edges.
/// Saddle cells are split by the average of their four corners.
inline std::vector<Polyline> marching_squares(const UdfGrid& field, double level) {
  require(level > 0.0 && level < 1.0, ErrorCode::parameter_error, "iso level must lie in (0, 1)");
  const int w = field.width();
  const int h = field.height();

  // Edge ids: horizontal edge (x,y)-(x+1,y) -> 2*(y*w+x); vertical edge (x,y)-(x,y+1) -> 2*(y*w+x)+1.
  auto hedge = [w](int x, int y) { return 2 * (static_cast<std::int64_t>(y) * w + x); };
  auto vedge = [w](int x, int y) { return 2 * (static_cast<std::int64_t>(y) * w + x) + 1; };
  auto interp = [level](Point a, Point b, double va, double vb) {
    const double t = (level - va) / (vb - va);
    return Point{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
  };

  std::vector<detail::IsoSegment> segments;
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      // Corners: 0 top-left, 1 top-right, 2 bottom-right, 3 bottom-left.
      const std::array<Point, 4> p{Point{double(x), double(y)}, Point{double(x + 1), double(y)},
                                   Point{double(x + 1), double(y + 1)}, Point{double(x), double(y + 1)}};
      const std::array<double, 4> v{field.at(x, y), field.at(x + 1, y), field.at(x + 1, y + 1), field.at(x, y + 1)};
      std::array<bool, 4> low{};
      int mask = 0;
      for (int k = 0; k < 4; ++k) {
        low[k] = v[k] < level;
        mask |= (low[k] ? 1 : 0) << k;
      }
      if (mask == 0 || mask == 15) continue;

      // Cell edges: k connects corner k and corner (k+1)%4: top, right, bottom, left.
      const std::array<std::int64_t, 4> edge_id{hedge(x, y), vedge(x + 1, y), hedge(x, y + 1), vedge(x, y)};

      auto emit = [&](int ea, int eb, int reference_corner) {
        const Point a = interp(p[ea], p[(ea + 1) % 4], v[ea], v[(ea + 1) % 4]);
        const Point b = interp(p[eb], p[(eb + 1) % 4], v[eb], v[(eb + 1) % 4]);
        const Point r = p[reference_corner];
        const double cross = (b.x - a.x) * (r.y - a.y) - (b.y - a.y) * (r.x - a.x);
        const bool reference_low = low[reference_corner];
        if ((cross > 0.0) == reference_low)
          segments.push_back({edge_id[ea], edge_id[eb], a, b});
        else
          segments.push_back({edge_id[eb], edge_id[ea], b, a});
      };

      if (mask == 5 || mask == 10) {
        const double center = 0.25 * (v[0] + v[1] + v[2] + v[3]);
        const bool center_low = center < level;
        // Cut off each corner that differs from the center; corner k sits between edges (k+3)%4 and k.
        for (int k = 0; k < 4; ++k)
          if (low[k] != center_low) emit((k + 3) % 4, k, k);
        continue;
      }

      std::array<int, 2> crossing{};
      int n = 0;
      for (int k = 0; k < 4; ++k)
        if (low[k] != low[(k + 1) % 4]) crossing[n++] = k;
      int reference = 0;
      while (!low[reference]) ++reference;
      emit(crossing[0], crossing[1], reference);
    }
  }

  std::unordered_map<std::int64_t, std::size_t> by_start;
  std::unordered_map<std::int64_t, std::size_t> by_end;
  by_start.reserve(segments.size());
  by_end.reserve(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    by_start.emplace(segments[i].from_edge, i);
    by_end.emplace(segments[i].to_edge, i);
  }

  std::vector<bool> used(segments.size(), false);
  std::vector<Polyline> out;
  auto trace = [&](std::size_t first) {
    Polyline line;
    line.points.push_back(segments[first].from);
    std::size_t cur = first;
    while (true) {
      used[cur] = true;
      const auto next = by_start.find(segments[cur].to_edge);
      if (next == by_start.end()) {
        line.points.push_back(segments[cur].to);
        break;
      }
      if (next->second == first) {
        line.closed = true;
        break;
      }
      if (used[next->second]) {
        line.points.push_back(segments[cur].to);
        break;
      }
      cur = next->second;
      line.points.push_back(segments[cur].from);
    }
    out.push_back(std::move(line));
  };

  // Open chains start where no segment ends; everything left afterwards is a loop.
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (!used[i] && !by_end.contains(segments[i].from_edge)) trace(i);
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (!used[i]) trace(i);
  return out;
}

namespace detail {

// Liang-Barsky clip of segment a-b to the rectangle [lo_x, hi_x] x [lo_y, hi_y].
inline bool clip_segment(Point& a, Point& b, double lo_x, double lo_y, double hi_x, double hi_y) {
  double t0 = 0.0;
  double t1 = 1.0;
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const std::array<double, 4> p{-dx, dx, -dy, dy};
  const std::array<double, 4> q{a.x - lo_x, hi_x - a.x, a.y - lo_y, hi_y - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      if (t > t1) return false;
      t0 = std::max(t0, t);
    } else {
      if (t < t0) return false;
      t1 = std::min(t1, t);
    }
  }
  const Point start{a.x + t0 * dx, a.y + t0 * dy};
  const Point end{a.x + t1 * dx, a.y + t1 * dy};
  a = start;
  b = end;
  return true;
}

// Nearest pixel center; exact halves go to the lower index.
inline int nearest_pixel(double c) { return static_cast<int>(std::ceil(c - 0.5)); }

}  // namespace detail

/// Bresenham rasterization of every segment, each pixel stamped with a
/// stroke_width x stroke_width square, clipped to the canvas.
inline SketchBitmap rasterize_polylines(const std::vector<Polyline>& lines, int width, int height, int stroke_width = 1) {
  require(stroke_width >= 1, ErrorCode::parameter_error, "stroke width must be at least 1");
  SketchBitmap out(width, height);
  const int before = (stroke_width - 1) / 2;
  const int after = stroke_width - 1 - before;
  auto stamp = [&](int x, int y) {
    for (int dy = -before; dy <= after; ++dy)
      for (int dx = -before; dx <= after; ++dx)
        if (out.in_bounds(x + dx, y + dy)) out.at(x + dx, y + dy) = 1;
  };
  const double pad = stroke_width + 1.0;
  for (const auto& line : lines) {
    const std::size_t n = line.points.size();
    if (n == 0) continue;
    const std::size_t segs = line.closed ? n : n - 1;
    if (n == 1) {
      Point a = line.points[0];
      Point b = a;
      if (detail::clip_segment(a, b, -pad, -pad, width - 1 + pad, height - 1 + pad))
        stamp(detail::nearest_pixel(a.x), detail::nearest_pixel(a.y));
      continue;
    }
    for (std::size_t i = 0; i < segs; ++i) {
      Point a = line.points[i];
      Point b = line.points[(i + 1) % n];
      if (!detail::clip_segment(a, b, -pad, -pad, width - 1 + pad, height - 1 + pad)) continue;
      int x0 = detail::nearest_pixel(a.x);
      int y0 = detail::nearest_pixel(a.y);
      const int x1 = detail::nearest_pixel(b.x);
      const int y1 = detail::nearest_pixel(b.y);
      const int dx = std::abs(x1 - x0);
      const int dy = -std::abs(y1 - y0);
      const int sx = x0 < x1 ? 1 : -1;
      const int sy = y0 < y1 ? 1 : -1;
      int err = dx + dy;
      while (true) {
        stamp(x0, y0);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
          err += dy;
          x0 += sx;
        }
        if (e2 <= dx) {
          err += dx;
          y0 += sy;
        }
      }
    }
  }
  return out;
}

}  // namespace udfsketch
