#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "udfsketch/edt.hpp"
#include "udfsketch/io.hpp"
#include "udfsketch/marching_squares.hpp"
#include "udfsketch/metrics.hpp"
#include "udfsketch/otsu.hpp"
#include "udfsketch/udf.hpp"

using namespace udfsketch;
using namespace testing_support;

namespace {

SketchBitmap single(int w, int h, int x, int y) {
  SketchBitmap s(w, h);
  s.at(x, y) = 1;
  return s;
}

GrayBitmap gray_of(const SketchBitmap& s) {
  GrayBitmap g(s.width(), s.height());
  for (std::size_t i = 0; i < s.size(); ++i) g[i] = s[i] ? 0 : 255;
  return g;
}

bool on_border(const Point& p, int w, int h) {
  constexpr double eps = 1e-9;
  return p.x < eps || p.y < eps || p.x > w - 1 - eps || p.y > h - 1 - eps;
}

}  // namespace

// ---------------------------------------------------------------------------
// exact_edt

TEST(ExactEdt, CenterInk3x3) {
  const auto d = exact_edt(single(3, 3, 1, 1));
  const double r2 = std::sqrt(2.0);
  const double want[9] = {r2, 1, r2, 1, 0, 1, r2, 1, r2};
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(d[i], want[i], 1e-12);
}

TEST(ExactEdt, Row1x4) {
  const auto d = exact_edt(single(4, 1, 0, 0));
  for (int x = 0; x < 4; ++x) EXPECT_DOUBLE_EQ(d.at(x, 0), x);
}

TEST(ExactEdt, InkIsZero) {
  std::mt19937_64 rng(1);
  const auto s = random_sketch(rng, 20, 13, 0.2);
  const auto d = exact_edt(s);
  for (std::size_t i = 0; i < s.size(); ++i)
    EXPECT_EQ(d[i] == 0.0, s[i] == 1);
}

TEST(ExactEdt, BlankRejected) {
  EXPECT_EQ(code_of([] { exact_edt(SketchBitmap(5, 5)); }), ErrorCode::empty_ink);
}

TEST(ExactEdt, MatchesBruteForce64) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dens(0.0005, 0.2);
  for (int t = 0; t < 100; ++t) {
    const auto s = random_sketch(rng, 64, 64, dens(rng));
    const auto d = exact_edt(s);
    const auto want = brute_edt(s);
    double err = 0;
    for (std::size_t i = 0; i < s.size(); ++i) err = std::max(err, std::abs(d[i] - want[i]));
    ASSERT_LT(err, 1e-6) << "trial " << t;
  }
}

TEST(ExactEdt, NonSquareMatchesBruteForce) {
  std::mt19937_64 rng(3);
  for (auto [w, h] : {std::pair{1, 9}, {9, 1}, {17, 5}, {3, 40}}) {
    const auto s = random_sketch(rng, w, h, 0.05);
    const auto d = exact_edt(s);
    const auto want = brute_edt(s);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(d[i], want[i], 1e-9);
  }
}

TEST(ExactEdt, Lipschitz) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto d = exact_edt(random_sketch(rng, 32, 32, 0.01));
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        if (x + 1 < 32) {
          EXPECT_LE(std::abs(d.at(x, y) - d.at(x + 1, y)), 1 + 1e-9);
        }
        if (y + 1 < 32) {
          EXPECT_LE(std::abs(d.at(x, y) - d.at(x, y + 1)), 1 + 1e-9);
        }
      }
  }
}

// ---------------------------------------------------------------------------
// Time constant and transform

TEST(TimeConstant, Values) {
  EXPECT_NEAR(default_time_constant(540, 540), 15 * std::numbers::sqrt2, 1e-9);
  EXPECT_NEAR(default_time_constant(512, 512), 20.1133, 5e-5);
  EXPECT_NEAR(default_time_constant(512, 512), 15 * std::numbers::sqrt2 * 512 / 540, 1e-12);
  EXPECT_NEAR(default_time_constant(1, 1), 0.0392837, 1e-6);
  EXPECT_EQ(code_of([] { default_time_constant(0, 3); }), ErrorCode::parameter_error);
}

TEST(Transform, PointValues) {
  EXPECT_EQ(udf_value(0, 3.0), 0.0);
  EXPECT_NEAR(udf_value(3.0, 3.0), 1 - std::exp(-1.0), 1e-12);
  EXPECT_NEAR(udf_value(9.0, 3.0), 0.950213, 1e-6);
}

TEST(Transform, GridAndBadT) {
  DistanceGrid d(3, 1);
  d[0] = 0;
  d[1] = 2;
  d[2] = 6;
  const auto v = udf_transform(d, 2.0);
  EXPECT_EQ(v[0], 0.0f);
  EXPECT_NEAR(v[1], 1 - std::exp(-1.0), 1e-7);
  EXPECT_NEAR(v[2], 1 - std::exp(-3.0), 1e-7);
  EXPECT_EQ(v.time_constant(), 2.0);
  EXPECT_EQ(code_of([&] { udf_transform(d, 0.0); }), ErrorCode::parameter_error);
  EXPECT_EQ(code_of([&] { udf_transform(d, -1.0); }), ErrorCode::parameter_error);
}

TEST(Transform, MonotoneAndBounded) {
  double prev = -1;
  for (double u = 0; u < 100; u += 0.37) {
    const double v = udf_value(u, 5.0);
    EXPECT_GT(v, prev);
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
    prev = v;
  }
}

TEST(Inverse, Examples) {
  EXPECT_EQ(udf_inverse(0.0, 4.0), 0.0);
  EXPECT_NEAR(udf_inverse(1 - std::exp(-1.0), 10.0), 10.0, 1e-12);
  EXPECT_EQ(code_of([] { udf_inverse(1.0, 1.0); }), ErrorCode::parameter_error);
  EXPECT_EQ(code_of([] { udf_inverse(-0.1, 1.0); }), ErrorCode::parameter_error);
}

TEST(Inverse, RoundTrip1000) {
  std::mt19937_64 rng(5);
  // u/T up to 15; beyond that 1 - v drops under float resolution.
  std::uniform_real_distribution<double> ratio(0.001, 15.0), ts(0.05, 30.0);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const double t = ts(rng), u = ratio(rng) * t;
    const double v = udf_value(u, t);
    worst = std::max(worst, std::abs(udf_inverse(v, t) - u) / u);
  }
  EXPECT_LT(worst, 1e-4);
}

// ---------------------------------------------------------------------------
// encode / decode

TEST(Encode, CornerValue) {
  const auto v = encode_sketch(single(3, 3, 1, 1), 1.0);
  EXPECT_EQ(v.at(1, 1), 0.0f);
  EXPECT_NEAR(v.at(0, 0), 0.7569, 1e-4);
  EXPECT_NEAR(v.at(0, 0), 1 - std::exp(-std::sqrt(2.0)), 1e-7);
  EXPECT_EQ(code_of([] { encode_sketch(SketchBitmap(3, 3), 1.0); }), ErrorCode::empty_ink);
  EXPECT_EQ(code_of([] { encode_sketch(single(3, 3, 0, 0), 0.0); }), ErrorCode::parameter_error);
}

TEST(Encode, ZeroExactlyOnInk) {
  std::mt19937_64 rng(6);
  const auto s = random_sketch(rng, 32, 32, 0.1);
  const auto v = encode_sketch(s);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(v[i] == 0.0f, s[i] == 1);
}

TEST(Encode, FarFieldStaysBelowOne) {
  const auto v = encode_sketch(single(64, 64, 0, 0), 0.5);
  EXPECT_LT(v.at(63, 63), 1.0f);
  EXPECT_EQ(v.at(63, 63), std::nextafter(1.0f, 0.0f));
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_GT(v[i], 0.0f);
}

TEST(Decode, RoundTrip100) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dens(0.001, 0.5);
  for (int t = 0; t < 100; ++t) {
    const auto s = random_sketch(rng, 64, 64, dens(rng));
    const auto field = encode_sketch(s);
    const auto back = decode_threshold(field, 1 - std::exp(-0.5 / field.time_constant()));
    ASSERT_EQ(back, s);
    ASSERT_EQ(binarize(gray_of(back), 127), s);
  }
}

TEST(Decode, ConstantFieldAndBadLevel) {
  const UdfGrid f(4, 4, 1.0, 0.9f);
  EXPECT_TRUE(is_blank(decode_threshold(f, 0.5)));
  EXPECT_EQ(code_of([&] { decode_threshold(f, 1.2); }), ErrorCode::parameter_error);
  EXPECT_EQ(code_of([&] { decode_threshold(f, 0.0); }), ErrorCode::parameter_error);
}

// ---------------------------------------------------------------------------
// Otsu and binarize

TEST(Otsu, HalfAndHalfPicksSmallest) {
  GrayBitmap g(8, 8);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = i < 32 ? 0 : 255;
  const auto r = otsu_threshold(g);
  EXPECT_EQ(r.threshold, 0);
  EXPECT_EQ(oracles::otsu(g), 0);
  EXPECT_FALSE(r.degenerate);
}

TEST(Otsu, Constant) {
  const auto r = otsu_threshold(GrayBitmap(5, 5, 7));
  EXPECT_EQ(r.threshold, 7);
  EXPECT_TRUE(r.degenerate);
}

TEST(Otsu, MatchesExhaustive) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    GrayBitmap g(64, 64);
    // Mix of uniform and bimodal histograms.
    std::uniform_int_distribution<int> any(0, 255), lo(0, 90), hi(140, 255);
    const int mode = t % 3;
    for (auto& v : g.values()) v = static_cast<std::uint8_t>(mode == 0 ? any(rng) : (rng() % 3 ? hi(rng) : lo(rng)));
    ASSERT_EQ(otsu_threshold(g).threshold, oracles::otsu(g)) << "trial " << t;
  }
}

TEST(Binarize, Examples) {
  EXPECT_EQ(count_nonzero(binarize(GrayBitmap(3, 3, 0), 0)), 9u);
  EXPECT_TRUE(is_blank(binarize(GrayBitmap(3, 3, 255), 0)));
  GrayBitmap g(2, 2, 200);
  g.at(1, 0) = 10;
  g.at(0, 1) = 10;
  const auto s = binarize(g, 100);
  EXPECT_EQ(s.at(1, 0), 1);
  EXPECT_EQ(s.at(0, 1), 1);
  EXPECT_EQ(count_nonzero(s), 2u);
  EXPECT_EQ(code_of([&] { binarize(g, 256); }), ErrorCode::parameter_error);
}

// ---------------------------------------------------------------------------
// Marching squares and rasterization

TEST(MarchingSquares, ConstantField) {
  EXPECT_TRUE(marching_squares(UdfGrid(6, 6, 1.0, 0.7f), 0.5).empty());
}

TEST(MarchingSquares, TwoByTwoCorner) {
  UdfGrid f(2, 2, 1.0, 1.0f);
  f.at(0, 0) = 0.0f;
  const auto lines = marching_squares(f, 0.5);
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_FALSE(lines[0].closed);
  ASSERT_EQ(lines[0].points.size(), 2u);
  EXPECT_NEAR(lines[0].points[0].x, 0.5, 1e-12);
  EXPECT_NEAR(lines[0].points[0].y, 0.0, 1e-12);
  EXPECT_NEAR(lines[0].points[1].x, 0.0, 1e-12);
  EXPECT_NEAR(lines[0].points[1].y, 0.5, 1e-12);
}

TEST(MarchingSquares, BadLevel) {
  EXPECT_EQ(code_of([] { marching_squares(UdfGrid(2, 2, 1.0), 1.0); }), ErrorCode::parameter_error);
}

namespace {

SketchBitmap filled_disk(int n, double cx, double cy, double radius) {
  SketchBitmap disk(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) disk.at(x, y) = std::hypot(x - cx, y - cy) <= radius ? 1 : 0;
  return disk;
}

}  // namespace

TEST(MarchingSquares, DiskContourNearCircle) {
  const double c = 32.0, radius = 12.0, offset = 3.0;
  const auto field = encode_sketch(filled_disk(64, c, c, radius));
  const auto lines = marching_squares(field, udf_value(offset, field.time_constant()));
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_TRUE(lines[0].closed);
  for (const auto& p : lines[0].points) EXPECT_LT(std::abs(std::hypot(p.x - c, p.y - c) - (radius + offset)), 0.75);
}

TEST(MarchingSquares, OffGridDiskTracksPixelDistance) {
  const double cx = 31.3, cy = 32.1, radius = 9.5;
  const auto disk = filled_disk(64, cx, cy, radius);
  const auto field = encode_sketch(disk);
  for (double offset : {1.0, 2.5, 4.0}) {
    const auto lines = marching_squares(field, udf_value(offset, field.time_constant()));
    ASSERT_EQ(lines.size(), 1u);
    for (const auto& p : lines[0].points) {
      double d = 1e9;
      for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
          if (disk.at(x, y)) d = std::min(d, std::hypot(p.x - x, p.y - y));
      EXPECT_NEAR(d, offset, 0.1);
    }
  }
}

TEST(MarchingSquares, ClosedOrBoundaryTerminated) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> val(0.0f, 0.999f);
  std::uniform_int_distribution<int> side(2, 24);
  for (int t = 0; t < 1000; ++t) {
    const int w = side(rng), h = side(rng);
    UdfGrid f(w, h, 1.0);
    for (auto& v : f.values()) v = val(rng);
    for (const auto& line : marching_squares(f, 0.5)) {
      ASSERT_GE(line.points.size(), 2u);
      if (line.closed) continue;
      ASSERT_TRUE(on_border(line.points.front(), w, h) && on_border(line.points.back(), w, h)) << "trial " << t;
    }
  }
}

TEST(MarchingSquares, SaddleByCenterAverage) {
  UdfGrid f(2, 2, 1.0);
  f.at(0, 0) = 0.0f;
  f.at(1, 1) = 0.0f;
  f.at(1, 0) = 0.9f;
  f.at(0, 1) = 0.9f;
  // Center average 0.45 < 0.5: the two low corners connect, leaving two arcs around the high ones.
  const auto lines = marching_squares(f, 0.5);
  ASSERT_EQ(lines.size(), 2u);
  for (const auto& l : lines) {
    ASSERT_EQ(l.points.size(), 2u);
    const Point mid{(l.points[0].x + l.points[1].x) / 2, (l.points[0].y + l.points[1].y) / 2};
    const bool near_hi = std::hypot(mid.x - 1, mid.y) < 0.5 || std::hypot(mid.x, mid.y - 1) < 0.5;
    EXPECT_TRUE(near_hi);
  }
}

TEST(Rasterize, Examples) {
  EXPECT_TRUE(is_blank(rasterize_polylines({}, 4, 4)));
  const auto s = rasterize_polylines({Polyline{{{0.5, 1.0}, {3.5, 1.0}}, false}}, 5, 3);
  EXPECT_EQ(count_nonzero(s), 4u);
  for (int x = 0; x < 4; ++x) EXPECT_EQ(s.at(x, 1), 1);
  EXPECT_TRUE(is_blank(rasterize_polylines({Polyline{{{-20, -5}, {-10, -30}}, false}}, 5, 3)));
  EXPECT_EQ(code_of([] { rasterize_polylines({}, 4, 4, 0); }), ErrorCode::parameter_error);
}

TEST(Rasterize, StrokeWidthAndClosure) {
  const auto s = rasterize_polylines({Polyline{{{2, 2}, {6, 2}, {6, 6}, {2, 6}}, true}}, 9, 9);
  EXPECT_EQ(count_nonzero(s), 16u);
  EXPECT_EQ(s.at(2, 4), 1);
  const auto wide = rasterize_polylines({Polyline{{{4, 4}, {4, 4}}, false}}, 9, 9, 3);
  EXPECT_EQ(count_nonzero(wide), 9u);
}

TEST(Rasterize, DecodedContourLiesOnLevelSet) {
  std::mt19937_64 rng(10);
  const auto s = random_sketch(rng, 32, 32, 0.01);
  const auto f = encode_sketch(s);
  const double level = udf_value(2.0, f.time_constant());
  const auto ink = rasterize_polylines(marching_squares(f, level), 32, 32);
  const auto d = exact_edt(s);
  for (std::size_t i = 0; i < ink.size(); ++i)
    if (ink[i]) {
      EXPECT_NEAR(d[i], 2.0, 1.5);
    }
}

// ---------------------------------------------------------------------------
// Chamfer

TEST(Chamfer, Examples) {
  std::mt19937_64 rng(11);
  const auto a = random_sketch(rng, 16, 16, 0.1);
  EXPECT_EQ(chamfer_distance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(chamfer_distance(single(10, 10, 1, 1), single(10, 10, 4, 5)), 5.0);
  EXPECT_EQ(code_of([&] { chamfer_distance(a, SketchBitmap(16, 16)); }), ErrorCode::empty_ink);
  EXPECT_EQ(code_of([&] { chamfer_distance(a, SketchBitmap(8, 16)); }), ErrorCode::shape_error);
}

TEST(Chamfer, MatchesBruteForce) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_sketch(rng, 24, 24, 0.03);
    const auto b = random_sketch(rng, 24, 24, 0.08);
    EXPECT_NEAR(chamfer_distance(a, b), brute_chamfer(a, b), 1e-6);
  }
}

TEST(Continuity, Examples) {
  EXPECT_EQ(continuity_score(SketchBitmap(4, 4)), 0.0);
  SketchBitmap line(6, 3);
  for (int x = 0; x < 6; ++x) line.at(x, 1) = 1;
  EXPECT_NEAR(continuity_score(line), 4.0 / 6.0, 1e-12);
}

// ---------------------------------------------------------------------------
// File formats

TEST(Udfg, RoundTripAndLayout) {
  std::mt19937_64 rng(13);
  const auto f = encode_sketch(random_sketch(rng, 7, 5, 0.2), 2.5);
  const std::string bytes = encode_udfg(f);
  ASSERT_EQ(bytes.size(), 4 + 1 + 4 + 4 + 4 + 4 * 35u);
  EXPECT_EQ(bytes.substr(0, 4), "UDFG");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 7);  // little-endian width
  EXPECT_EQ(bytes[6], 0);
  EXPECT_EQ(decode_udfg(bytes), f);
}

TEST(Udfg, DefaultTimeConstantRoundTripsExactly) {
  std::mt19937_64 rng(14);
  const auto f = encode_sketch(random_sketch(rng, 32, 32, 0.05));
  EXPECT_EQ(f.time_constant(), static_cast<float>(default_time_constant(32, 32)));
  EXPECT_EQ(decode_udfg(encode_udfg(f)), f);
}

TEST(Udfg, Rejects) {
  const std::string good = encode_udfg(UdfGrid(2, 2, 1.0, 0.25f));
  std::string bad_version = good;
  bad_version[4] = 2;
  EXPECT_EQ(code_of([&] { decode_udfg(bad_version); }), ErrorCode::format_error);
  EXPECT_EQ(code_of([&] { decode_udfg(good.substr(0, good.size() - 1)); }), ErrorCode::format_error);
  EXPECT_EQ(code_of([&] { decode_udfg(good + "x"); }), ErrorCode::format_error);
  EXPECT_EQ(code_of([&] { decode_udfg("UDFX" + good.substr(4)); }), ErrorCode::format_error);
}

TEST(P5, RoundTrips) {
  std::mt19937_64 rng(14);
  const auto s = random_sketch(rng, 9, 4, 0.3);
  EXPECT_EQ(sketch_from_p5(to_p5(s)), s);
  const auto m = sketch_as_mask(s);
  EXPECT_EQ(mask_from_p5(to_p5(m)), m);
  GrayBitmap g(3, 2);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<std::uint8_t>(i * 40);
  EXPECT_EQ(decode_p5(to_p5(g)), g);
  EXPECT_EQ(to_p5(s).substr(0, 11), "P5\n9 4\n255\n");
}

TEST(P5, HeaderCommentsAndErrors) {
  std::string with_comment = "P5 # made by hand\n2 1\n255\n";
  with_comment.push_back('\0');
  with_comment.push_back('\xff');
  const auto g = decode_p5(with_comment);
  EXPECT_EQ(g.at(0, 0), 0);
  EXPECT_EQ(g.at(1, 0), 255);
  EXPECT_EQ(code_of([] { decode_p5("P6\n1 1\n255\n\x01"); }), ErrorCode::format_error);
  EXPECT_EQ(code_of([] { decode_p5("P5\n2 2\n255\n\x01"); }), ErrorCode::format_error);
  EXPECT_EQ(code_of([] { decode_p5("P5\n1 1\n65535\n\x01\x01"); }), ErrorCode::format_error);
}
