#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "udfsketch/grid.hpp"

// Independent reference implementations shared by the unit and acceptance suites.
namespace oracles {

using namespace udfsketch;

inline SketchBitmap random_sketch(std::mt19937_64& rng, int w, int h, double density) {
  std::bernoulli_distribution ink(density);
  SketchBitmap s(w, h);
  for (auto& v : s.values()) v = ink(rng) ? 1 : 0;
  if (is_blank(s)) s.at(static_cast<int>(rng() % w), static_cast<int>(rng() % h)) = 1;
  return s;
}

// All-pairs nearest ink distance.
inline std::vector<double> brute_edt(const SketchBitmap& s) {
  std::vector<std::pair<int, int>> ink;
  for (int y = 0; y < s.height(); ++y)
    for (int x = 0; x < s.width(); ++x)
      if (s.at(x, y)) ink.emplace_back(x, y);
  std::vector<double> out(s.size(), std::numeric_limits<double>::infinity());
  for (int y = 0; y < s.height(); ++y)
    for (int x = 0; x < s.width(); ++x) {
      auto& o = out[static_cast<std::size_t>(y) * s.width() + x];
      for (auto [qx, qy] : ink) o = std::min(o, std::hypot(double(x - qx), double(y - qy)));
    }
  return out;
}

// Directed-mean chamfer by explicit nearest-neighbor search.
inline double brute_chamfer(const SketchBitmap& a, const SketchBitmap& b) {
  auto directed = [](const SketchBitmap& p, const SketchBitmap& q) {
    double sum = 0;
    int n = 0;
    for (int y = 0; y < p.height(); ++y)
      for (int x = 0; x < p.width(); ++x) {
        if (!p.at(x, y)) continue;
        double best = std::numeric_limits<double>::infinity();
        for (int qy = 0; qy < q.height(); ++qy)
          for (int qx = 0; qx < q.width(); ++qx)
            if (q.at(qx, qy)) best = std::min(best, std::hypot(double(x - qx), double(y - qy)));
        sum += best;
        ++n;
      }
    return sum / n;
  };
  return 0.5 * directed(a, b) + 0.5 * directed(b, a);
}


// Exhaustive between-class variance search over t in [0, 254]; the first maximum wins.
inline int otsu(const GrayBitmap& g) {
  std::vector<long double> hist(256, 0);
  for (auto v : g.values()) hist[v] += 1;
  const long double n = static_cast<long double>(g.size());
  int best = -1;
  long double best_var = -1;
  for (int t = 0; t < 255; ++t) {
    long double n0 = 0, s0 = 0, n1 = 0, s1 = 0;
    for (int i = 0; i <= t; ++i) n0 += hist[i], s0 += hist[i] * i;
    for (int i = t + 1; i < 256; ++i) n1 += hist[i], s1 += hist[i] * i;
    if (n0 == 0 || n1 == 0) continue;
    const long double m0 = s0 / n0, m1 = s1 / n1;
    const long double var = (n0 / n) * (n1 / n) * (m0 - m1) * (m0 - m1);
    if (var > best_var) {
      best_var = var;
      best = t;
    }
  }
  return best;
}

}  // namespace oracles
