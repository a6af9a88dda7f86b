#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "udfsketch/data/shapes.hpp"
#include "udfsketch/decoder/decoder.hpp"
#include "udfsketch/diffusion/generator.hpp"
#include "udfsketch/io.hpp"
#include "udfsketch/mask/head.hpp"
#include "udfsketch/otsu.hpp"
#include "udfsketch/udf.hpp"

namespace udfsketch::data {

/// Number of discrete shape classes: four vertex-count buckets times two hatch styles.
inline constexpr int kClassCount = 8;

inline int class_tag_for(int vertex_count, int hatch_style) {
  const int bucket = std::clamp((vertex_count - 5) / 2, 0, 3);
  return bucket * 2 + (hatch_style & 1);
}

struct SampleRecord {
  std::string id;
  int class_tag = 0;
  BBox bbox;
  InstanceMask mask;
  SketchBitmap rough;
  SketchBitmap detailed;
  UdfGrid rough_udf;
  UdfGrid detailed_udf;
  bool rough_only_detail = false;  // no interior strokes fit
  bool degenerate_otsu = false;    // ingested from a single-intensity image
};

struct EngineParams {
  ShapeParams shape;
  int hatch_spacing = 4;
  int detail_strokes = 2;
};

/// Procedural record: shape, rough outline, detailed sketch, tight box and both fields.
/// Everything outside the mask stays background.
template <class Rng>
SampleRecord build_record(Rng& rng, int width, int height, double time_constant, const EngineParams& params = {}) {
  Shape shape = gen_shape(rng, width, height, params.shape);
  std::uniform_int_distribution<int> style(0, 1);
  const int hatch_style = style(rng);
  SampleRecord r;
  r.class_tag = class_tag_for(shape.vertex_count, hatch_style);
  r.rough = render_rough(shape.contour, width, height);
  auto detailed = render_detailed(shape.contour, shape.mask, rng,
                                  DetailParams{params.hatch_spacing, hatch_style, params.detail_strokes});
  r.detailed = std::move(detailed.sketch);
  r.rough_only_detail = detailed.rough_only;
  r.mask = std::move(shape.mask);
  r.bbox = mask_bbox(r.mask);
  r.rough_udf = encode_sketch(r.rough, time_constant);
  r.detailed_udf = encode_sketch(r.detailed, time_constant);
  return r;
}

/// Record `index` of a dataset is a pure function of (seed, index).
inline SampleRecord build_indexed_record(std::uint64_t seed, std::size_t index, int width, int height,
                                         double time_constant, const EngineParams& params = {}) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  SampleRecord r = build_record(rng, width, height, time_constant, params);
  char id[32];
  std::snprintf(id, sizeof id, "rec%06zu", index);
  r.id = id;
  return r;
}

inline std::vector<SampleRecord> generate_records(std::uint64_t seed, std::size_t count, int width, int height,
                                                  const EngineParams& params = {}) {
  const double t = default_time_constant(width, height);
  std::vector<SampleRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(build_indexed_record(seed, i, width, height, t, params));
  return out;
}

/// Keeps records whose mask covers at least `min_area_fraction` of the canvas, in order.
inline std::vector<SampleRecord> filter_small(const std::vector<SampleRecord>& records, double min_area_fraction) {
  require(min_area_fraction >= 0.0 && min_area_fraction < 1.0 + 1e-12, ErrorCode::parameter_error,
          "area threshold must lie in [0, 1]");
  std::vector<SampleRecord> out;
  for (const auto& r : records)
    if (mask_area_fraction(r.mask) >= min_area_fraction) out.push_back(r);
  return out;
}

inline SketchBitmap sketch_from_gray_levels(const GrayBitmap& gray) {
  SketchBitmap out(gray.width(), gray.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gray[i] < 128 ? 1 : 0;
  return out;
}

/// Turns an external dark-on-light sketch into a record: Otsu binarization, clipping to
/// the mask, box and fields derived from the result. The rough variant is the mask outline.
inline SampleRecord ingest_external(const GrayBitmap& gray, const InstanceMask& mask, int class_tag, std::string id = "ext") {
  require(gray.same_shape(mask), ErrorCode::shape_error, "sketch and mask dimensions differ");
  const OtsuResult otsu = otsu_threshold(gray);
  // A single-intensity image is all ink when dark and blank when light.
  SketchBitmap ink = otsu.degenerate ? sketch_from_gray_levels(gray) : binarize(gray, otsu.threshold);
  for (std::size_t i = 0; i < ink.size(); ++i)
    if (!mask[i]) ink[i] = 0;
  require(!is_blank(ink), ErrorCode::empty_ink, "no ink inside the mask after binarization");
  const double t = default_time_constant(gray.width(), gray.height());
  SampleRecord r;
  r.id = std::move(id);
  r.class_tag = class_tag;
  r.mask = mask;
  r.bbox = mask_bbox(mask);
  r.rough = mask_boundary(mask);
  r.detailed = std::move(ink);
  r.rough_udf = encode_sketch(r.rough, t);
  r.detailed_udf = encode_sketch(r.detailed, t);
  r.degenerate_otsu = otsu.degenerate;
  return r;
}

/// Renders a sketch as 8-bit dark-on-light pixels.
inline GrayBitmap sketch_to_gray(const SketchBitmap& sketch) {
  GrayBitmap g(sketch.width(), sketch.height());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = sketch[i] ? 0 : 255;
  return g;
}

/// Stage-2 pair (box mask -> rough field) and stage-3 pair (instance mask -> detailed field).
inline std::vector<diffusion::TrainSample> generator_samples(const std::vector<SampleRecord>& records) {
  std::vector<diffusion::TrainSample> out;
  out.reserve(records.size() * 2);
  for (const auto& r : records) {
    out.push_back({bbox_to_mask(r.bbox, r.mask.width(), r.mask.height()), r.rough_udf, Stage::rough});
    out.push_back({r.mask, r.detailed_udf, Stage::detailed});
  }
  return out;
}

/// (rough field, box, mask) triples for the mask head.
inline std::vector<mask::MaskExample> mask_examples(const std::vector<SampleRecord>& records) {
  std::vector<mask::MaskExample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.rough_udf, r.bbox, r.mask});
  return out;
}

/// Both fields of every record paired with their sketches.
inline std::vector<decoder::DecoderPair> decoder_pairs(const std::vector<SampleRecord>& records) {
  std::vector<decoder::DecoderPair> out;
  out.reserve(records.size() * 2);
  for (const auto& r : records) {
    out.push_back({r.rough_udf, r.rough});
    out.push_back({r.detailed_udf, r.detailed});
  }
  return out;
}

// ---------------------------------------------------------------------------
// On-disk layout: <root>/manifest.json plus <root>/<id>.{mask.pgm, rough.pgm,
// detailed.pgm, rough.udfg, detailed.udfg}.

struct DatasetManifest {
  int width = 0;
  int height = 0;
  double time_constant = 0.0;
  std::uint64_t seed = 0;
  double min_area_fraction = 0.0;
  std::vector<SampleRecord> records;
};

inline void save_dataset(const std::filesystem::path& root, const DatasetManifest& m) {
  using nlohmann::json;
  json records = json::array();
  std::set<std::string> ids;
  for (const auto& r : m.records) {
    require(ids.insert(r.id).second, ErrorCode::configuration_error, "duplicate record id");
    write_file(root / (r.id + ".mask.pgm"), to_p5(r.mask));
    write_file(root / (r.id + ".rough.pgm"), to_p5(r.rough));
    write_file(root / (r.id + ".detailed.pgm"), to_p5(r.detailed));
    write_file(root / (r.id + ".rough.udfg"), encode_udfg(r.rough_udf));
    write_file(root / (r.id + ".detailed.udfg"), encode_udfg(r.detailed_udf));
    records.push_back(json{
        {"id", r.id},
        {"class_tag", r.class_tag},
        {"bbox", {r.bbox.x0, r.bbox.y0, r.bbox.x1, r.bbox.y1}},
        {"files",
         {{"mask", r.id + ".mask.pgm"},
          {"rough", r.id + ".rough.pgm"},
          {"detailed", r.id + ".detailed.pgm"},
          {"rough_udf", r.id + ".rough.udfg"},
          {"detailed_udf", r.id + ".detailed.udfg"}}},
        {"flags", {{"rough_only_detail", r.rough_only_detail}, {"degenerate_otsu", r.degenerate_otsu}}},
    });
  }
  const json doc{{"canvas", {{"width", m.width}, {"height", m.height}}},
                 {"time_constant", m.time_constant},
                 {"seed", m.seed},
                 {"min_area_fraction", m.min_area_fraction},
                 {"records", records}};
  write_file(root / "manifest.json", doc.dump(2) + "\n");
}

inline DatasetManifest load_dataset(const std::filesystem::path& root) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(read_file(root / "manifest.json"));
  } catch (const json::exception& e) {
    fail(ErrorCode::format_error, std::string("manifest: ") + e.what());
  }
  try {
    DatasetManifest m;
    m.width = doc.at("canvas").at("width").get<int>();
    m.height = doc.at("canvas").at("height").get<int>();
    m.time_constant = doc.at("time_constant").get<double>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.min_area_fraction = doc.at("min_area_fraction").get<double>();
    std::set<std::string> ids;
    for (const auto& jr : doc.at("records")) {
      SampleRecord r;
      r.id = jr.at("id").get<std::string>();
      require(ids.insert(r.id).second, ErrorCode::format_error, "duplicate record id in manifest");
      r.class_tag = jr.at("class_tag").get<int>();
      const auto b = jr.at("bbox");
      r.bbox = BBox{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
      const auto& f = jr.at("files");
      r.mask = mask_from_p5(read_file(root / f.at("mask").get<std::string>()));
      r.rough = sketch_from_p5(read_file(root / f.at("rough").get<std::string>()));
      r.detailed = sketch_from_p5(read_file(root / f.at("detailed").get<std::string>()));
      r.rough_udf = decode_udfg(read_file(root / f.at("rough_udf").get<std::string>()));
      r.detailed_udf = decode_udfg(read_file(root / f.at("detailed_udf").get<std::string>()));
      r.rough_only_detail = jr.at("flags").at("rough_only_detail").get<bool>();
      r.degenerate_otsu = jr.at("flags").at("degenerate_otsu").get<bool>();
      require(r.mask.width() == m.width && r.mask.height() == m.height, ErrorCode::format_error,
              "record canvas differs from manifest");
      m.records.push_back(std::move(r));
    }
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::format_error, std::string("manifest: ") + e.what());
  }
}

}  // namespace udfsketch::data
