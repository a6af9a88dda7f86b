#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "udfsketch/pipeline/compose.hpp"
#include "udfsketch/pipeline/session.hpp"

namespace udfsketch::pipeline {

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::state_error: return 409;
    case ErrorCode::empty_region:
    case ErrorCode::generation_error: return 422;
    default: return 400;
  }
}

struct ServiceModels {
  FieldSampler sampler;
  SketchDecoder decoder = threshold_decoder;
  MaskExtractor extractor = deterministic_extractor;
};

/// Concurrent session store with the JSON/P5 request surface. Operations on one session
/// are serialized by its own mutex; calls into the models share one mutex because
/// network instances cache activations.
class SessionService {
 public:
  SessionService(ServiceModels models, int width, int height, std::uint64_t seed = 0,
                 std::optional<std::filesystem::path> persist_root = std::nullopt)
      : models_(std::move(models)), width_(width), height_(height), seed_(seed), root_(std::move(persist_root)) {}

  std::string create(const BBox& bbox, int class_tag) {
    std::uint64_t index = 0;
    std::string id;
    {
      std::lock_guard lock(registry_mu_);
      index = next_++;
      id = "s" + std::to_string(index);
    }
    auto entry = std::make_shared<Entry>();
    entry->session = create_session(bbox, class_tag, width_, height_, id);
    entry->rng.seed(seed_ ^ (0x9E3779B97F4A7C15ull * (index + 1)));
    persist(entry->session);
    std::lock_guard lock(registry_mu_);
    sessions_[id] = std::move(entry);
    return id;
  }

  GenerationSession get(const std::string& id) const {
    auto entry = find(id);
    std::lock_guard lock(entry->mu);
    return entry->session;
  }

  GenerationSession rough(const std::string& id) {
    return apply(id, [&](const GenerationSession& s, std::mt19937_64& rng) {
      return generate_rough(s, locked_sampler(), rng, locked_decoder());
    });
  }
  GenerationSession edit(const std::string& id, const SketchBitmap& sketch) {
    return apply(id, [&](const GenerationSession& s, std::mt19937_64&) { return submit_edit(s, sketch); });
  }
  GenerationSession mask(const std::string& id) {
    return apply(id, [&](const GenerationSession& s, std::mt19937_64&) { return extract_mask(s, locked_extractor()); });
  }
  GenerationSession detail(const std::string& id) {
    return apply(id, [&](const GenerationSession& s, std::mt19937_64& rng) {
      return generate_detailed(s, locked_sampler(), rng, locked_decoder());
    });
  }

  /// Layers reference sessions in DetailedGenerated, back to front.
  SketchBitmap compose_sessions(const std::vector<std::tuple<std::string, int, int>>& layers, int width, int height) {
    CompositionCanvas canvas{width, height, {}};
    for (const auto& [id, dx, dy] : layers) {
      const GenerationSession s = get(id);
      require(s.state == SessionState::detailed_generated, ErrorCode::state_error,
              "composition needs sessions in DetailedGenerated");
      canvas.layers.push_back(Layer{*s.detailed_sketch, *s.instance_mask, dx, dy});
    }
    return compose(canvas);
  }

  /// Dispatches one request: method, path without query, body.
  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body) {
    using nlohmann::json;
    std::vector<std::string> parts;
    for (std::size_t pos = 0; pos < path.size();) {
      const auto next = path.find('/', pos);
      const auto end = next == std::string::npos ? path.size() : next;
      if (end > pos) parts.push_back(path.substr(pos, end - pos));
      pos = end + 1;
    }
    std::string session_id;
    try {
      if (parts.size() == 1 && parts[0] == "sessions" && method == "POST") {
        const json req = parse_json(body);
        const auto& b = req.at("bbox");
        const BBox box{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
        const std::string id = create(box, req.value("class_tag", 0));
        return reply(201, state_json(get(id)));
      }
      if (parts.size() == 1 && parts[0] == "compose" && method == "POST") {
        const json req = parse_json(body);
        std::vector<std::tuple<std::string, int, int>> layers;
        for (const auto& l : req.at("layers"))
          layers.emplace_back(l.at("session").get<std::string>(), l.value("dx", 0), l.value("dy", 0));
        int w = width_, h = height_;
        if (req.contains("canvas")) {
          w = req.at("canvas").at(0).get<int>();
          h = req.at("canvas").at(1).get<int>();
        }
        return ApiResponse{200, "image/x-portable-graymap", to_p5(compose_sessions(layers, w, h))};
      }
      if (parts.size() >= 2 && parts[0] == "sessions") {
        session_id = parts[1];
        if (!exists(session_id)) return error(404, "not_found", "unknown session", "");
        if (parts.size() == 2 && method == "GET") return reply(200, full_json(get(session_id)));
        if (parts.size() == 3) {
          const std::string& op = parts[2];
          if (op == "rough" && method == "POST") return reply(200, state_json(rough(session_id)));
          if (op == "edit" && method == "PUT") return reply(200, state_json(edit(session_id, sketch_from_p5(body))));
          if (op == "mask" && method == "POST") return reply(200, state_json(mask(session_id)));
          if (op == "detail" && method == "POST") return reply(200, state_json(detail(session_id)));
        }
        if (parts.size() == 4 && parts[2] == "artifacts" && method == "GET") {
          const auto blobs = session_artifacts(get(session_id));
          const auto it = blobs.find(parts[3]);
          if (it == blobs.end()) return error(404, "not_found", "artifact not present", session_id);
          const bool field = parts[3].ends_with("_udf");
          return ApiResponse{200, field ? "application/octet-stream" : "image/x-portable-graymap", it->second};
        }
      }
      return error(404, "not_found", "no such route", "");
    } catch (const Error& e) {
      return error(http_status(e.code()), std::string(to_string(e.code())), e.what(), session_id);
    } catch (const json::exception& e) {
      return error(400, "format_error", e.what(), session_id);
    }
  }

 private:
  struct Entry {
    std::mutex mu;
    GenerationSession session;
    std::mt19937_64 rng;
  };

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::lock_guard lock(registry_mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) fail(ErrorCode::parameter_error, "unknown session " + id);
    return it->second;
  }

  bool exists(const std::string& id) const {
    std::lock_guard lock(registry_mu_);
    return sessions_.contains(id);
  }

  /// Runs `op` on a copy and publishes the result only on success.
  template <class Op>
  GenerationSession apply(const std::string& id, Op&& op) {
    auto entry = find(id);
    std::lock_guard lock(entry->mu);
    std::mt19937_64 rng = entry->rng;
    GenerationSession next = op(entry->session, rng);
    check_session(next);
    persist(next);
    entry->session = next;
    entry->rng = rng;
    return next;
  }

  void persist(const GenerationSession& s) const {
    if (root_) save_session_dir(*root_ / s.id, s);
  }

  FieldSampler locked_sampler() {
    require(static_cast<bool>(models_.sampler), ErrorCode::configuration_error, "no generator model is loaded");
    return [this](const InstanceMask& m, Stage st, std::mt19937_64& rng) {
      std::lock_guard lock(model_mu_);
      return models_.sampler(m, st, rng);
    };
  }
  SketchDecoder locked_decoder() {
    return [this](const UdfGrid& f) {
      std::lock_guard lock(model_mu_);
      return models_.decoder(f);
    };
  }
  MaskExtractor locked_extractor() {
    return [this](const UdfGrid& f, const BBox& b) {
      std::lock_guard lock(model_mu_);
      return models_.extractor(f, b);
    };
  }

  static nlohmann::json parse_json(const std::string& body) {
    try {
      return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::format_error, std::string("request body: ") + e.what());
    }
  }

  static nlohmann::json state_json(const GenerationSession& s) {
    return {{"id", s.id}, {"state", to_string(s.state)}, {"blank_decodes", s.blank_decodes}};
  }

  static nlohmann::json full_json(const GenerationSession& s) {
    nlohmann::json j = session_descriptor(s);
    nlohmann::json refs = nlohmann::json::object();
    for (const auto& [name, _] : j.at("artifacts").items()) refs[name] = "/sessions/" + s.id + "/artifacts/" + name;
    j["artifacts"] = refs;
    return j;
  }

  static ApiResponse reply(int status, const nlohmann::json& j) { return ApiResponse{status, "application/json", j.dump()}; }

  ApiResponse error(int status, const std::string& code, const std::string& message, const std::string& id) const {
    nlohmann::json j{{"error", code}, {"message", message}};
    if (!id.empty() && exists(id)) j["state"] = to_string(get(id).state);
    return reply(status, j);
  }

  ServiceModels models_;
  int width_;
  int height_;
  std::uint64_t seed_;
  std::optional<std::filesystem::path> root_;
  mutable std::mutex registry_mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_ = 1;
  std::mutex model_mu_;
};

}  // namespace udfsketch::pipeline
