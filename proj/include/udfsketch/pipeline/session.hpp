#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include <json.hpp>

#include "udfsketch/diffusion/generator.hpp"
#include "udfsketch/io.hpp"
#include "udfsketch/mask/extract.hpp"
#include "udfsketch/udf.hpp"

namespace udfsketch::pipeline {

enum class SessionState { box_specified, rough_generated, rough_edited, mask_extracted, detailed_generated };

inline const char* to_string(SessionState s) {
  switch (s) {
    case SessionState::box_specified: return "BoxSpecified";
    case SessionState::rough_generated: return "RoughGenerated";
    case SessionState::rough_edited: return "RoughEdited";
    case SessionState::mask_extracted: return "MaskExtracted";
    case SessionState::detailed_generated: return "DetailedGenerated";
  }
  return "?";
}

inline SessionState session_state_from_string(std::string_view name) {
  for (auto s : {SessionState::box_specified, SessionState::rough_generated, SessionState::rough_edited,
                 SessionState::mask_extracted, SessionState::detailed_generated})
    if (name == to_string(s)) return s;
  fail(ErrorCode::format_error, "unknown session state: " + std::string(name));
}

struct GenerationSession {
  std::string id;
  int width = 0;
  int height = 0;
  SessionState state = SessionState::box_specified;
  BBox bbox;
  int class_tag = 0;
  std::optional<UdfGrid> rough_udf;
  std::optional<UdfGrid> detailed_udf;
  std::optional<SketchBitmap> rough_sketch;
  std::optional<SketchBitmap> edited_sketch;
  std::optional<SketchBitmap> detailed_sketch;
  std::optional<InstanceMask> instance_mask;
  int blank_decodes = 0;  // generation attempts whose decode came out blank

  friend bool operator==(const GenerationSession&, const GenerationSession&) = default;
};

/// Field generator: condition mask and stage in, transformed field out.
using FieldSampler = std::function<UdfGrid(const InstanceMask&, Stage, std::mt19937_64&)>;
/// Field to binary sketch.
using SketchDecoder = std::function<SketchBitmap(const UdfGrid&)>;
/// Rough field and box to instance mask.
using MaskExtractor = std::function<InstanceMask(const UdfGrid&, const BBox&)>;

inline FieldSampler net_sampler(diffusion::GeneratorNet<float>& net, diffusion::NoiseSchedule schedule) {
  return [&net, schedule = std::move(schedule)](const InstanceMask& mask, Stage stage, std::mt19937_64& rng) {
    return diffusion::sample(net, mask, stage, schedule, rng);
  };
}

inline SketchBitmap threshold_decoder(const UdfGrid& field) { return decode_threshold(field); }

inline InstanceMask deterministic_extractor(const UdfGrid& field, const BBox& box) {
  return mask::extract_mask_deterministic(field, box);
}

/// Throws state_error unless every populated field matches the state.
inline void check_session(const GenerationSession& s) {
  const int st = static_cast<int>(s.state);
  const bool rough = st >= static_cast<int>(SessionState::rough_generated);
  const bool edited = s.state == SessionState::rough_edited ||
                      (st >= static_cast<int>(SessionState::mask_extracted) && s.edited_sketch.has_value());
  const bool masked = st >= static_cast<int>(SessionState::mask_extracted);
  const bool detailed = s.state == SessionState::detailed_generated;
  const bool ok = s.bbox.valid_for(s.width, s.height) && s.rough_udf.has_value() == rough &&
                  s.rough_sketch.has_value() == rough && s.edited_sketch.has_value() == edited &&
                  s.instance_mask.has_value() == masked && s.detailed_udf.has_value() == detailed &&
                  s.detailed_sketch.has_value() == detailed;
  if (!ok) fail(ErrorCode::state_error, std::string("session fields inconsistent with state ") + to_string(s.state));
}

inline GenerationSession create_session(const BBox& bbox, int class_tag, int width, int height, std::string id) {
  require(width >= 4 && height >= 4 && width % 4 == 0 && height % 4 == 0, ErrorCode::shape_error,
          "canvas sides must be positive multiples of 4");
  require(bbox.valid_for(width, height), ErrorCode::bounds_error, "box does not fit the canvas");
  GenerationSession s;
  s.id = std::move(id);
  s.width = width;
  s.height = height;
  s.bbox = bbox;
  s.class_tag = class_tag;
  return s;
}

namespace detail {

inline void require_state(const GenerationSession& s, std::initializer_list<SessionState> allowed, const char* op) {
  for (auto a : allowed)
    if (s.state == a) return;
  fail(ErrorCode::state_error, std::string(op) + " is not allowed in state " + to_string(s.state));
}

}  // namespace detail

/// Stage-2 generation inside the box. A blank decode leaves the state unchanged and
/// counts the attempt, so the caller may retry.
inline GenerationSession generate_rough(const GenerationSession& s, const FieldSampler& sampler, std::mt19937_64& rng,
                                        const SketchDecoder& decode = threshold_decoder) {
  detail::require_state(s, {SessionState::box_specified}, "rough generation");
  UdfGrid field = sampler(bbox_to_mask(s.bbox, s.width, s.height), Stage::rough, rng);
  require(field.width() == s.width && field.height() == s.height, ErrorCode::generation_error,
          "generator returned a field of the wrong size");
  SketchBitmap sketch = decode(field);
  GenerationSession out = s;
  if (is_blank(sketch)) {
    ++out.blank_decodes;
    return out;
  }
  out.rough_udf = std::move(field);
  out.rough_sketch = std::move(sketch);
  out.state = SessionState::rough_generated;
  return out;
}

/// Replaces the rough field by the encoding of the user's sketch. Ink may leave the box.
inline GenerationSession submit_edit(const GenerationSession& s, const SketchBitmap& edited) {
  detail::require_state(s, {SessionState::rough_generated}, "editing");
  require(edited.width() == s.width && edited.height() == s.height, ErrorCode::shape_error,
          "edited sketch dimensions differ from the canvas");
  require(!is_blank(edited), ErrorCode::empty_ink, "edited sketch is blank");
  GenerationSession out = s;
  out.edited_sketch = edited;
  out.rough_udf = encode_sketch(edited, default_time_constant(s.width, s.height));
  out.state = SessionState::rough_edited;
  return out;
}

inline GenerationSession extract_mask(const GenerationSession& s,
                                      const MaskExtractor& extractor = deterministic_extractor) {
  detail::require_state(s, {SessionState::rough_generated, SessionState::rough_edited}, "mask extraction");
  InstanceMask m = extractor(*s.rough_udf, s.bbox);
  require(!is_blank(mask_as_sketch(m)), ErrorCode::empty_region, "extracted mask is empty");
  GenerationSession out = s;
  out.instance_mask = std::move(m);
  out.state = SessionState::mask_extracted;
  return out;
}

inline GenerationSession generate_detailed(const GenerationSession& s, const FieldSampler& sampler,
                                           std::mt19937_64& rng, const SketchDecoder& decode = threshold_decoder) {
  detail::require_state(s, {SessionState::mask_extracted}, "detailed generation");
  UdfGrid field = sampler(*s.instance_mask, Stage::detailed, rng);
  require(field.width() == s.width && field.height() == s.height, ErrorCode::generation_error,
          "generator returned a field of the wrong size");
  SketchBitmap sketch = decode(field);
  GenerationSession out = s;
  if (is_blank(sketch)) {
    ++out.blank_decodes;
    return out;
  }
  out.detailed_udf = std::move(field);
  out.detailed_sketch = std::move(sketch);
  out.state = SessionState::detailed_generated;
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: a directory holding session.json plus the populated artifacts in the
// standard formats. session_bytes is the same content as one deterministic string.

inline nlohmann::json session_descriptor(const GenerationSession& s) {
  nlohmann::json artifacts = nlohmann::json::object();
  if (s.rough_udf) artifacts["rough_udf"] = "rough.udfg";
  if (s.detailed_udf) artifacts["detailed_udf"] = "detailed.udfg";
  if (s.rough_sketch) artifacts["rough_sketch"] = "rough.pgm";
  if (s.edited_sketch) artifacts["edited_sketch"] = "edited.pgm";
  if (s.detailed_sketch) artifacts["detailed_sketch"] = "detailed.pgm";
  if (s.instance_mask) artifacts["instance_mask"] = "mask.pgm";
  return nlohmann::json{{"id", s.id},
                        {"canvas", {s.width, s.height}},
                        {"state", to_string(s.state)},
                        {"bbox", {s.bbox.x0, s.bbox.y0, s.bbox.x1, s.bbox.y1}},
                        {"class_tag", s.class_tag},
                        {"blank_decodes", s.blank_decodes},
                        {"artifacts", artifacts}};
}

/// Artifact name -> encoded bytes, for every populated artifact.
inline std::map<std::string, std::string> session_artifacts(const GenerationSession& s) {
  std::map<std::string, std::string> out;
  if (s.rough_udf) out["rough_udf"] = encode_udfg(*s.rough_udf);
  if (s.detailed_udf) out["detailed_udf"] = encode_udfg(*s.detailed_udf);
  if (s.rough_sketch) out["rough_sketch"] = to_p5(*s.rough_sketch);
  if (s.edited_sketch) out["edited_sketch"] = to_p5(*s.edited_sketch);
  if (s.detailed_sketch) out["detailed_sketch"] = to_p5(*s.detailed_sketch);
  if (s.instance_mask) out["instance_mask"] = to_p5(*s.instance_mask);
  return out;
}

inline std::string session_bytes(const GenerationSession& s) {
  std::string out = session_descriptor(s).dump() + "\n";
  for (const auto& [name, bytes] : session_artifacts(s)) {
    out += name + " " + std::to_string(bytes.size()) + "\n";
    out += bytes;
  }
  return out;
}

inline void save_session_dir(const std::filesystem::path& dir, const GenerationSession& s) {
  std::filesystem::create_directories(dir);
  const auto desc = session_descriptor(s);
  const auto blobs = session_artifacts(s);
  for (const auto& [name, file] : desc.at("artifacts").items()) write_file(dir / file.get<std::string>(), blobs.at(name));
  // Descriptor last: a reader never sees a state whose artifacts are missing.
  write_file(dir / "session.json", desc.dump(2) + "\n");
}

inline GenerationSession load_session_dir(const std::filesystem::path& dir) {
  try {
    const auto desc = nlohmann::json::parse(read_file(dir / "session.json"));
    GenerationSession s;
    s.id = desc.at("id").get<std::string>();
    s.width = desc.at("canvas").at(0).get<int>();
    s.height = desc.at("canvas").at(1).get<int>();
    s.state = session_state_from_string(desc.at("state").get<std::string>());
    const auto& b = desc.at("bbox");
    s.bbox = BBox{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
    s.class_tag = desc.at("class_tag").get<int>();
    s.blank_decodes = desc.at("blank_decodes").get<int>();
    const auto& a = desc.at("artifacts");
    auto file = [&](const char* key) { return read_file(dir / a.at(key).get<std::string>()); };
    if (a.contains("rough_udf")) s.rough_udf = decode_udfg(file("rough_udf"));
    if (a.contains("detailed_udf")) s.detailed_udf = decode_udfg(file("detailed_udf"));
    if (a.contains("rough_sketch")) s.rough_sketch = sketch_from_p5(file("rough_sketch"));
    if (a.contains("edited_sketch")) s.edited_sketch = sketch_from_p5(file("edited_sketch"));
    if (a.contains("detailed_sketch")) s.detailed_sketch = sketch_from_p5(file("detailed_sketch"));
    if (a.contains("instance_mask")) s.instance_mask = mask_from_p5(file("instance_mask"));
    check_session(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format_error, std::string("session descriptor: ") + e.what());
  }
}

}  // namespace udfsketch::pipeline
