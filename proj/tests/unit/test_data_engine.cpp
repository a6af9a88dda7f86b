#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <queue>
#include <random>
#include <set>

#include "support.hpp"
#include "udfsketch/data/engine.hpp"
#include "udfsketch/mask/extract.hpp"

using namespace udfsketch;
using namespace udfsketch::data;
using testing_support::code_of;

namespace {

// Flood-fill oracle: one 4-connected foreground component and no background component
// (8-connected) that misses the canvas border.
bool simply_connected_oracle(const InstanceMask& m) {
  const int w = m.width(), h = m.height();
  auto components = [&](std::uint8_t value, bool eight, bool count_border_touching) {
    std::vector<char> seen(m.size(), 0);
    int count = 0;
    for (int sy = 0; sy < h; ++sy)
      for (int sx = 0; sx < w; ++sx) {
        if (m.at(sx, sy) != value || seen[sy * w + sx]) continue;
        bool border = false;
        std::queue<std::pair<int, int>> q;
        q.push({sx, sy});
        seen[sy * w + sx] = 1;
        while (!q.empty()) {
          const auto [x, y] = q.front();
          q.pop();
          border |= x == 0 || y == 0 || x == w - 1 || y == h - 1;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              if ((dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0)) continue;
              const int nx = x + dx, ny = y + dy;
              if (nx < 0 || ny < 0 || nx >= w || ny >= h || seen[ny * w + nx] || m.at(nx, ny) != value) continue;
              seen[ny * w + nx] = 1;
              q.push({nx, ny});
            }
        }
        if (count_border_touching || !border) ++count;
      }
    return count;
  };
  return components(1, false, true) == 1 && components(0, true, false) == 0;
}

bool subset(const SketchBitmap& a, const SketchBitmap& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

void expect_same_record(const SampleRecord& a, const SampleRecord& b) {
  EXPECT_EQ(a.id, b.id);
  EXPECT_EQ(a.class_tag, b.class_tag);
  EXPECT_EQ(a.bbox, b.bbox);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_EQ(a.rough, b.rough);
  EXPECT_EQ(a.detailed, b.detailed);
  EXPECT_TRUE(std::ranges::equal(a.rough_udf.values(), b.rough_udf.values()));
  EXPECT_TRUE(std::ranges::equal(a.detailed_udf.values(), b.detailed_udf.values()));
  EXPECT_FLOAT_EQ(a.rough_udf.time_constant(), b.rough_udf.time_constant());
  EXPECT_EQ(a.rough_only_detail, b.rough_only_detail);
  EXPECT_EQ(a.degenerate_otsu, b.degenerate_otsu);
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("udfsketch_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

// ---------------------------------------------------------------------------
// Shapes

TEST(GenShape, SimplyConnectedAndConsistent) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    const Shape s = gen_shape(rng, 32, 32);
    ASSERT_TRUE(simply_connected_oracle(s.mask)) << seed;
    EXPECT_TRUE(is_simply_connected(s.mask));
    EXPECT_TRUE(s.contour.closed);
    EXPECT_GE(s.vertex_count, 5);
    EXPECT_LE(s.vertex_count, 12);
    const SketchBitmap outline = rasterize_polylines({s.contour}, 32, 32, 1);
    EXPECT_LE(testing_support::brute_chamfer(outline, mask_boundary(s.mask)), 1.0) << seed;
  }
}

TEST(GenShape, OracleRejectsHolesAndSplits) {
  InstanceMask ring = bbox_to_mask({2, 2, 8, 8}, 10, 10);
  ring.at(4, 4) = 0;
  EXPECT_FALSE(simply_connected_oracle(ring));
  EXPECT_FALSE(is_simply_connected(ring));
  InstanceMask two(10, 10);
  two.at(1, 1) = two.at(5, 5) = 1;
  EXPECT_FALSE(simply_connected_oracle(two));
  EXPECT_FALSE(is_simply_connected(two));
  EXPECT_TRUE(simply_connected_oracle(bbox_to_mask({0, 0, 4, 4}, 10, 10)));
}

TEST(GenShape, DeterministicAndValidated) {
  std::mt19937_64 a(9), b(9);
  const Shape x = gen_shape(a, 40, 24), y = gen_shape(b, 40, 24);
  EXPECT_EQ(x.mask, y.mask);
  EXPECT_EQ(x.contour.points, y.contour.points);
  EXPECT_EQ(code_of([&] { gen_shape(a, 15, 32); }), ErrorCode::parameter_error);
  ShapeParams none;
  none.max_attempts = 0;
  EXPECT_EQ(code_of([&] { gen_shape(a, 32, 32, none); }), ErrorCode::generation_error);
}

TEST(RenderRough, OutlineInsideDilatedMask) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const Shape s = gen_shape(rng, 32, 32);
    const SketchBitmap rough = render_rough(s.contour, 32, 32);
    EXPECT_EQ(ink_containment(rough, dilate(s.mask, 1)), 1.0);
    EXPECT_EQ(rough, rasterize_polylines({s.contour}, 32, 32, 1));
    const UdfGrid field = encode_sketch(rough);
    EXPECT_GE(mask_iou(mask::extract_mask_deterministic(field, mask_bbox(s.mask)), s.mask), 0.9) << seed;
  }
  EXPECT_EQ(code_of([] { render_rough(Polyline{{{1, 1}, {5, 5}}, false}, 8, 8); }), ErrorCode::parameter_error);
}

TEST(RenderDetailed, ContainsRoughAndStaysInMask) {
  int strictly_more = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const Shape s = gen_shape(rng, 32, 32);
    const SketchBitmap rough = render_rough(s.contour, 32, 32);
    const DetailedSketch d = render_detailed(s.contour, s.mask, rng, {.hatch_style = static_cast<int>(seed % 2)});
    EXPECT_TRUE(subset(rough, d.sketch));
    EXPECT_EQ(ink_containment(d.sketch, dilate(s.mask, 1)), 1.0);
    if (d.rough_only) {
      EXPECT_EQ(d.sketch, rough);
    } else {
      EXPECT_GT(ink_fraction(d.sketch), ink_fraction(rough));
      ++strictly_more;
    }
  }
  EXPECT_EQ(strictly_more, 100);
}

TEST(RenderDetailed, TinyMaskFallsBackToRough) {
  std::mt19937_64 rng(1);
  const Polyline c{{{4, 4}, {6, 4}, {6, 6}, {4, 6}}, true};
  const InstanceMask m = sketch_as_mask(render_rough(c, 16, 16));
  const DetailedSketch d = render_detailed(c, m, rng);
  EXPECT_TRUE(d.rough_only);
  EXPECT_EQ(d.sketch, render_rough(c, 16, 16));
  EXPECT_EQ(code_of([&] { render_detailed(c, InstanceMask(16, 16), rng); }), ErrorCode::empty_region);
  EXPECT_EQ(code_of([&] { render_detailed(c, m, rng, {.hatch_spacing = 1}); }), ErrorCode::parameter_error);
}

// ---------------------------------------------------------------------------
// Records

TEST(BuildRecord, InvariantsHold) {
  const double t = default_time_constant(32, 32);
  const auto records = generate_records(3, 200, 32, 32);
  std::set<std::string> ids;
  for (const auto& r : records) {
    EXPECT_TRUE(ids.insert(r.id).second);
    EXPECT_GE(r.class_tag, 0);
    EXPECT_LT(r.class_tag, kClassCount);
    EXPECT_EQ(r.bbox, mask_bbox(r.mask));
    EXPECT_TRUE(subset(r.rough, dilate(mask_boundary(r.mask), 1)));
    EXPECT_TRUE(subset(r.detailed, dilate(mask_as_sketch(r.mask), 1)));
    EXPECT_TRUE(subset(r.rough, r.detailed));
    EXPECT_EQ(r.rough_udf, encode_sketch(r.rough, t));
    EXPECT_EQ(r.detailed_udf, encode_sketch(r.detailed, t));
    for (std::size_t i = 0; i < r.rough.size(); ++i) EXPECT_EQ(r.rough_udf[i] == 0.0f, r.rough[i] == 1);
  }
}

TEST(BuildRecord, StagePairsContainTheirTargets) {
  for (const auto& s : generator_samples(generate_records(4, 100, 32, 32))) {
    const SketchBitmap target = decode_threshold(s.target_udf);
    EXPECT_EQ(ink_containment(target, dilate(s.condition_mask, 1)), 1.0);
  }
}

TEST(BuildRecord, IndexedRecordsAreDeterministic) {
  const auto a = generate_records(5, 12, 32, 32);
  const auto b = generate_records(5, 12, 32, 32);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 0; i < a.size(); ++i) expect_same_record(a[i], b[i]);
  expect_same_record(a[7], build_indexed_record(5, 7, 32, 32, default_time_constant(32, 32)));
  EXPECT_EQ(a[7].id, "rec000007");
  const auto c = generate_records(6, 12, 32, 32);
  int differ = 0;
  for (std::size_t i = 0; i < a.size(); ++i) differ += a[i].mask != c[i].mask;
  EXPECT_GT(differ, 0);
}

TEST(BuildRecord, ThousandRecordsUnderAMinute) {
  const auto start = std::chrono::steady_clock::now();
  const auto records = generate_records(7, 1000, 32, 32);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(records.size(), 1000u);
  EXPECT_LT(seconds, 60.0);
}

TEST(ClassTag, Buckets) {
  EXPECT_EQ(class_tag_for(5, 0), 0);
  EXPECT_EQ(class_tag_for(6, 1), 1);
  EXPECT_EQ(class_tag_for(7, 0), 2);
  EXPECT_EQ(class_tag_for(12, 1), 7);
}

// ---------------------------------------------------------------------------
// Filtering

TEST(FilterSmall, ExamplesAndProperties) {
  auto records = generate_records(8, 60, 32, 32);
  EXPECT_EQ(filter_small(records, 0.0).size(), records.size());
  EXPECT_TRUE(filter_small(records, 1.0).empty());

  // Constructed masks with known coverage: 1/1024, 64/1024, 256/1024.
  std::vector<SampleRecord> known(3);
  known[0].mask = bbox_to_mask({0, 0, 1, 1}, 32, 32);
  known[1].mask = bbox_to_mask({0, 0, 8, 8}, 32, 32);
  known[2].mask = bbox_to_mask({0, 0, 16, 16}, 32, 32);
  for (int i = 0; i < 3; ++i) known[i].id = std::to_string(i);
  auto ids = [](const std::vector<SampleRecord>& rs) {
    std::vector<std::string> out;
    for (const auto& r : rs) out.push_back(r.id);
    return out;
  };
  EXPECT_EQ(ids(filter_small(known, 0.02)), (std::vector<std::string>{"1", "2"}));
  EXPECT_EQ(ids(filter_small(known, 64.0 / 1024)), (std::vector<std::string>{"1", "2"}));
  EXPECT_EQ(ids(filter_small(known, 0.1)), (std::vector<std::string>{"2"}));

  const auto once = filter_small(records, 0.1);
  EXPECT_EQ(ids(filter_small(once, 0.1)), ids(once));
  std::size_t j = 0;
  for (const auto& r : records)
    if (j < once.size() && once[j].id == r.id) ++j;
  EXPECT_EQ(j, once.size());

  EXPECT_EQ(code_of([&] { filter_small(records, -0.1); }), ErrorCode::parameter_error);
  EXPECT_EQ(code_of([&] { filter_small(records, 1.5); }), ErrorCode::parameter_error);
}

// ---------------------------------------------------------------------------
// Ingest

TEST(Ingest, ReingestReproducesDetailedFieldBitExactly) {
  for (const auto& r : generate_records(9, 30, 32, 32)) {
    const SampleRecord back = ingest_external(sketch_to_gray(r.detailed), r.mask, r.class_tag);
    EXPECT_EQ(back.detailed, r.detailed);
    EXPECT_EQ(back.detailed_udf, r.detailed_udf);
    EXPECT_EQ(back.bbox, r.bbox);
    EXPECT_EQ(back.rough, mask_boundary(r.mask));
    EXPECT_FALSE(back.degenerate_otsu);
  }
}

TEST(Ingest, ClipsBlankAndDegenerate) {
  const InstanceMask m = bbox_to_mask({4, 4, 12, 12}, 16, 16);
  EXPECT_EQ(code_of([&] { ingest_external(GrayBitmap(16, 16, 255), m, 0); }), ErrorCode::empty_ink);

  GrayBitmap g(16, 16, 255);
  g.at(1, 1) = 0;
  g.at(6, 6) = 0;
  const SampleRecord r = ingest_external(g, m, 3, "x");
  EXPECT_EQ(count_nonzero(r.detailed), 1u);
  EXPECT_EQ(r.detailed.at(6, 6), 1);
  EXPECT_EQ(r.id, "x");
  EXPECT_EQ(r.class_tag, 3);

  const SampleRecord dark = ingest_external(GrayBitmap(16, 16, 0), m, 0);
  EXPECT_TRUE(dark.degenerate_otsu);
  EXPECT_EQ(dark.detailed, mask_as_sketch(m));

  EXPECT_EQ(code_of([&] { ingest_external(GrayBitmap(8, 8, 0), m, 0); }), ErrorCode::shape_error);
}

// ---------------------------------------------------------------------------
// Training views

TEST(TrainingViews, ShapesOfDerivedSets) {
  const auto records = generate_records(10, 5, 32, 32);
  const auto gen = generator_samples(records);
  ASSERT_EQ(gen.size(), 10u);
  EXPECT_EQ(gen[0].stage, Stage::rough);
  EXPECT_EQ(gen[0].condition_mask, bbox_to_mask(records[0].bbox, 32, 32));
  EXPECT_EQ(gen[1].stage, Stage::detailed);
  EXPECT_EQ(gen[1].condition_mask, records[0].mask);
  EXPECT_EQ(gen[1].target_udf, records[0].detailed_udf);

  const auto masks = mask_examples(records);
  ASSERT_EQ(masks.size(), 5u);
  EXPECT_EQ(masks[2].field, records[2].rough_udf);
  EXPECT_EQ(masks[2].box, records[2].bbox);

  const auto pairs = decoder_pairs(records);
  ASSERT_EQ(pairs.size(), 10u);
  EXPECT_EQ(pairs[3].field, records[1].detailed_udf);
  EXPECT_EQ(pairs[3].sketch, records[1].detailed);
}

// ---------------------------------------------------------------------------
// Manifest

TEST(Manifest, RoundTrip) {
  const auto dir = fresh_dir("manifest");
  DatasetManifest m{32, 32, default_time_constant(32, 32), 11, 0.02, filter_small(generate_records(11, 8, 32, 32), 0.02)};
  save_dataset(dir, m);
  for (const auto& r : m.records)
    for (const char* ext : {".mask.pgm", ".rough.pgm", ".detailed.pgm", ".rough.udfg", ".detailed.udfg"})
      EXPECT_TRUE(std::filesystem::exists(dir / (r.id + ext)));
  const DatasetManifest back = load_dataset(dir);
  EXPECT_EQ(back.width, 32);
  EXPECT_EQ(back.height, 32);
  EXPECT_EQ(back.seed, 11u);
  EXPECT_EQ(back.min_area_fraction, 0.02);
  EXPECT_EQ(back.time_constant, m.time_constant);
  ASSERT_EQ(back.records.size(), m.records.size());
  for (std::size_t i = 0; i < m.records.size(); ++i) expect_same_record(back.records[i], m.records[i]);

  // Saving again produces byte-identical text.
  const std::string first = read_file(dir / "manifest.json");
  save_dataset(dir, back);
  EXPECT_EQ(read_file(dir / "manifest.json"), first);
  const auto doc = nlohmann::json::parse(first);
  EXPECT_EQ(doc.at("records").size(), m.records.size());
  EXPECT_EQ(doc.at("records")[0].at("files").at("rough_udf"), m.records[0].id + ".rough.udfg");
  std::filesystem::remove_all(dir);
}

TEST(Manifest, Rejects) {
  const auto dir = fresh_dir("manifest_bad");
  auto records = generate_records(12, 2, 32, 32);
  records[1].id = records[0].id;
  EXPECT_EQ(code_of([&] { save_dataset(dir, {32, 32, 1.0, 12, 0.0, records}); }), ErrorCode::configuration_error);

  records = generate_records(12, 2, 32, 32);
  save_dataset(dir, {32, 32, 1.0, 12, 0.0, records});
  std::filesystem::remove(dir / (records[1].id + ".rough.udfg"));
  EXPECT_EQ(code_of([&] { load_dataset(dir); }), ErrorCode::format_error);

  write_file(dir / "manifest.json", "{ not json");
  EXPECT_EQ(code_of([&] { load_dataset(dir); }), ErrorCode::format_error);
  write_file(dir / "manifest.json", R"({"canvas": {"width": 32}})");
  EXPECT_EQ(code_of([&] { load_dataset(dir); }), ErrorCode::format_error);
  std::filesystem::remove_all(dir);
}
