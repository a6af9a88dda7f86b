#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "udfsketch/grid.hpp"

namespace udfsketch {

struct DistanceTag {};
/// Euclidean pixel distance to the nearest ink pixel; zero exactly on ink.
using DistanceGrid = Grid<double, DistanceTag>;

namespace detail {

// Lower envelope of parabolas y = f[q] + (x - q)^2 over one line. `f` holds squared
// distances (or +inf). Writes squared distances into `d`.
inline void squared_distance_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                                std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s > z[k]) break;
      if (--k < 0) break;
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), inf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace detail

/// Exact Euclidean distance transform (separable lower-envelope method, linear per line).
/// Distances are measured between pixel centers and only to ink, never to the border.
inline DistanceGrid exact_edt(const SketchBitmap& sketch) {
  require(!is_blank(sketch), ErrorCode::empty_ink, "distance transform of a blank sketch is undefined");
  const int w = sketch.width();
  const int h = sketch.height();
  const int n = std::max(w, h);
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::vector<double> sq(sketch.size());
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);

  // Columns first, then rows over the column result.
  f.resize(h);
  d.resize(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = sketch.at(x, y) ? 0.0 : inf;
    detail::squared_distance_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) sq[static_cast<std::size_t>(y) * w + x] = d[y];
  }
  f.resize(w);
  d.resize(w);
  DistanceGrid out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = sq[static_cast<std::size_t>(y) * w + x];
    detail::squared_distance_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) out.at(x, y) = std::sqrt(d[x]);
  }
  return out;
}

}  // namespace udfsketch
