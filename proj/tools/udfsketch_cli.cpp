#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "udfsketch/config.hpp"
#include "udfsketch/data/engine.hpp"
#include "udfsketch/decoder/decoder.hpp"
#include "udfsketch/diffusion/generator.hpp"
#include "udfsketch/io.hpp"
#include "udfsketch/mask/head.hpp"
#include "udfsketch/nn/checkpoint.hpp"
#include "udfsketch/pipeline/compose.hpp"
#include "udfsketch/pipeline/evaluate.hpp"
#include "udfsketch/pipeline/http.hpp"
#include "udfsketch/pipeline/service.hpp"
#include "udfsketch/pipeline/session.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;
using namespace udfsketch;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::string config_file;
};

void add_seed(CLI::App* cmd, Common& c) { cmd->add_option("--seed", c.seed, "Random seed"); }

KeyValueConfig load_config(const std::string& path) {
  return path.empty() ? KeyValueConfig{} : KeyValueConfig::parse(read_file(path));
}

BBox parse_bbox(const std::vector<int>& v) {
  require(v.size() == 4, ErrorCode::parameter_error, "--bbox takes x0 y0 x1 y1");
  return BBox{v[0], v[1], v[2], v[3]};
}

// Sidecar written next to a generator checkpoint so sampling uses the training schedule.
fs::path schedule_sidecar(const fs::path& ckpt) { return fs::path(ckpt.string() + ".cfg"); }

std::string num(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::string train_config_text(const diffusion::TrainConfig& cfg) {
  KeyValueConfig kv;
  kv.set("total_steps", std::to_string(cfg.total_steps));
  kv.set("batch_size", std::to_string(cfg.batch_size));
  kv.set("initial_lr", num(cfg.initial_lr));
  kv.set("diffusion_steps", std::to_string(cfg.diffusion_steps));
  kv.set("beta_start", num(cfg.beta_start));
  kv.set("beta_end", num(cfg.beta_end));
  kv.set("seed", std::to_string(cfg.seed));
  kv.set("log_every", std::to_string(cfg.log_every));
  kv.set("ema_decay", num(cfg.ema_decay));
  kv.set("representation", cfg.representation == diffusion::Representation::udf ? "udf" : "binary");
  return kv.to_text();
}

struct Models {
  std::unique_ptr<diffusion::GeneratorNet<float>> generator;
  std::unique_ptr<decoder::DecoderNet<float>> decoder;
  std::unique_ptr<mask::MaskHeadNet<float>> mask_head;
  diffusion::NoiseSchedule schedule;

  pipeline::ServiceModels service() {
    pipeline::ServiceModels m;
    if (generator) m.sampler = pipeline::net_sampler(*generator, schedule);
    if (decoder) m.decoder = [net = decoder.get()](const UdfGrid& f) { return decoder::decode_learned_sketch(*net, f); };
    if (mask_head)
      m.extractor = [net = mask_head.get()](const UdfGrid& f, const BBox& b) {
        return mask::extract_mask_learned(*net, f, b);
      };
    return m;
  }
};

struct ModelPaths {
  std::string generator, decoder, mask_head;

  void add(CLI::App* cmd, bool generator_flag, bool others) {
    if (generator_flag) cmd->add_option("--generator", generator, "Generator checkpoint")->check(CLI::ExistingFile);
    if (others) {
      cmd->add_option("--decoder", decoder, "Learned decoder checkpoint (threshold decode when absent)")
          ->check(CLI::ExistingFile);
      cmd->add_option("--mask-head", mask_head, "Learned mask head checkpoint (deterministic when absent)")
          ->check(CLI::ExistingFile);
    }
  }

  Models load() const {
    Models m;
    if (!generator.empty()) {
      m.generator = std::make_unique<diffusion::GeneratorNet<float>>();
      nn::load_checkpoint_file(m.generator->parameters(), generator);
      diffusion::TrainConfig cfg;
      if (fs::exists(schedule_sidecar(generator)))
        cfg = diffusion::train_config_from(KeyValueConfig::parse(read_file(schedule_sidecar(generator))));
      m.schedule = cfg.schedule();
    }
    if (!decoder.empty()) {
      m.decoder = std::make_unique<decoder::DecoderNet<float>>();
      nn::load_checkpoint_file(m.decoder->parameters(), decoder);
    }
    if (!mask_head.empty()) {
      m.mask_head = std::make_unique<mask::MaskHeadNet<float>>();
      nn::load_checkpoint_file(m.mask_head->parameters(), mask_head);
    }
    return m;
  }
};

void print_state(const pipeline::GenerationSession& s) {
  std::cout << s.id << " " << pipeline::to_string(s.state) << " blank_decodes=" << s.blank_decodes << "\n";
}

std::string next_session_id(const fs::path& root) {
  for (int i = 1;; ++i) {
    const std::string id = "s" + std::to_string(i);
    if (!fs::exists(root / id)) return id;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"udfsketch: distance-field sketch generation toolkit"};
  app.require_subcommand(1);
  Common common;

  // encode
  std::string in_path, out_path;
  double time_constant = 0.0;
  auto* encode = app.add_subcommand("encode", "Encode a P5 sketch as a UDFG field");
  encode->add_option("input", in_path, "Input P5 sketch")->required()->check(CLI::ExistingFile);
  encode->add_option("output", out_path, "Output UDFG file")->required();
  encode->add_option("--time-constant", time_constant, "Time constant (default from canvas size)");
  add_seed(encode, common);

  // decode
  std::string method = "threshold";
  double level = -1.0;
  ModelPaths models;
  auto* decode = app.add_subcommand("decode", "Decode a UDFG field to a P5 sketch");
  decode->add_option("input", in_path, "Input UDFG field")->required()->check(CLI::ExistingFile);
  decode->add_option("output", out_path, "Output P5 sketch")->required();
  decode->add_option("--method", method, "Decode method")
      ->check(CLI::IsMember({"threshold", "msquares", "learned"}));
  decode->add_option("--level", level, "Threshold level (default from the time constant)");
  decode->add_option("--decoder", models.decoder, "Decoder checkpoint for --method learned")->check(CLI::ExistingFile);
  add_seed(decode, common);

  // dataset gen
  int width = 32, height = 32;
  std::size_t count = 1000;
  double min_area = 0.02;
  std::string dataset_dir;
  auto* dataset = app.add_subcommand("dataset", "Procedural dataset tools");
  dataset->require_subcommand(1);
  auto* dataset_gen = dataset->add_subcommand("gen", "Generate procedural records");
  dataset_gen->add_option("output", dataset_dir, "Output directory")->required();
  dataset_gen->add_option("--count", count, "Records before filtering");
  dataset_gen->add_option("--width", width, "Canvas width");
  dataset_gen->add_option("--height", height, "Canvas height");
  dataset_gen->add_option("--min-area", min_area, "Drop records whose mask covers less of the canvas");
  add_seed(dataset_gen, common);

  // train
  auto* train = app.add_subcommand("train", "Train a network on a dataset directory");
  train->require_subcommand(1);
  std::string ckpt_out, loss_csv;
  KeyValueConfig flag_values;
  auto add_key = [&](CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        "--" + flag, [&flag_values, key](const std::string& v) { flag_values.set(key, v); }, help);
  };
  auto add_train_common = [&](CLI::App* cmd) {
    cmd->add_option("dataset", dataset_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("output", ckpt_out, "Output checkpoint")->required();
    cmd->add_option("--config", common.config_file, "key=value config file; flags override it")
        ->check(CLI::ExistingFile);
    add_key(cmd, "batch-size", "batch_size", "Minibatch size");
    add_key(cmd, "initial-lr", "initial_lr", "Initial learning rate");
    add_seed(cmd, common);
  };
  auto* train_gen = train->add_subcommand("generator", "Train the diffusion generator");
  add_train_common(train_gen);
  add_key(train_gen, "total-steps", "total_steps", "Optimizer steps");
  add_key(train_gen, "diffusion-steps", "diffusion_steps", "Noise schedule length");
  add_key(train_gen, "beta-start", "beta_start", "First beta");
  add_key(train_gen, "beta-end", "beta_end", "Last beta");
  add_key(train_gen, "log-every", "log_every", "Loss logging interval");
  add_key(train_gen, "representation", "representation", "udf or binary");
  add_key(train_gen, "ema-decay", "ema_decay", "Weight averaging decay, 0 disables");
  train_gen->add_option("--loss-csv", loss_csv, "Write the loss curve here");
  auto* train_mask = train->add_subcommand("mask", "Train the learned mask head");
  add_train_common(train_mask);
  add_key(train_mask, "epochs", "epochs", "Training epochs");
  add_key(train_mask, "validation-fraction", "validation_fraction", "Held-out fraction");
  add_key(train_mask, "lambda-focal", "mask.lambda_focal", "Focal loss weight");
  add_key(train_mask, "lambda-dice", "mask.lambda_dice", "Dice loss weight");
  auto* train_dec = train->add_subcommand("decoder", "Train the learned decoder");
  add_train_common(train_dec);
  add_key(train_dec, "epochs", "epochs", "Training epochs");
  add_key(train_dec, "validation-fraction", "validation_fraction", "Held-out fraction");
  add_key(train_dec, "noise-std", "noise_std", "Upper bound of per-item input noise");

  // session
  std::string root = "sessions", session_id;
  std::vector<int> bbox;
  int class_tag = 0, retries = 5;
  auto* session = app.add_subcommand("session", "Progressive generation sessions stored as directories");
  session->require_subcommand(1);
  session->add_option("--root", root, "Directory holding session directories");
  auto* s_new = session->add_subcommand("new", "Create a session from a box");
  s_new->add_option("--bbox", bbox, "x0 y0 x1 y1")->required()->expected(4);
  s_new->add_option("--class-tag", class_tag, "Shape class tag");
  s_new->add_option("--width", width, "Canvas width");
  s_new->add_option("--height", height, "Canvas height");
  s_new->add_option("--id", session_id, "Session id (default: next free s<N>)");
  add_seed(s_new, common);
  std::string edit_path;
  auto* s_rough = session->add_subcommand("rough", "Generate the rough stage");
  auto* s_edit = session->add_subcommand("edit", "Replace the rough sketch with an edited P5 bitmap");
  auto* s_mask = session->add_subcommand("mask", "Extract the instance mask");
  auto* s_detail = session->add_subcommand("detail", "Generate the detailed stage");
  for (auto* cmd : {s_rough, s_edit, s_mask, s_detail}) {
    cmd->add_option("id", session_id, "Session id")->required();
    add_seed(cmd, common);
  }
  for (auto* cmd : {s_rough, s_detail}) {
    models.add(cmd, true, false);
    cmd->get_option("--generator")->required();
    cmd->add_option("--decoder", models.decoder, "Learned decoder checkpoint")->check(CLI::ExistingFile);
    cmd->add_option("--retries", retries, "Extra attempts when the decode comes out blank");
  }
  s_edit->add_option("sketch", edit_path, "Edited P5 sketch")->required()->check(CLI::ExistingFile);
  s_mask->add_option("--mask-head", models.mask_head, "Learned mask head checkpoint")->check(CLI::ExistingFile);

  // compose
  std::vector<std::string> layer_specs;
  auto* compose = app.add_subcommand("compose", "Composite finished sessions back to front");
  compose->add_option("--root", root, "Directory holding session directories");
  compose->add_option("--layer", layer_specs, "id[:dx:dy], back to front; repeat per layer")
      ->required()
      ->allow_extra_args(false);
  compose->add_option("--width", width, "Canvas width");
  compose->add_option("--height", height, "Canvas height");
  compose->add_option("output", out_path, "Output P5 sketch")->required();
  add_seed(compose, common);

  // eval
  std::vector<std::string> eval_ids;
  std::string references;
  auto* eval = app.add_subcommand("eval", "Metrics CSV over finished sessions");
  eval->add_option("--root", root, "Directory holding session directories");
  eval->add_option("ids", eval_ids, "Session ids (default: every finished session under the root)");
  eval->add_option("--references", references, "Dataset directory for nearest-sketch chamfer")
      ->check(CLI::ExistingDirectory);
  eval->add_option("--output", out_path, "CSV path (default stdout)");
  add_seed(eval, common);

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string persist;
  auto* serve = app.add_subcommand("serve", "Run the session HTTP API");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--width", width, "Canvas width");
  serve->add_option("--height", height, "Canvas height");
  serve->add_option("--persist", persist, "Save every session under this directory");
  models.add(serve, true, true);
  add_seed(serve, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*encode) {
      const SketchBitmap s = sketch_from_p5(read_file(in_path));
      const double t = time_constant > 0.0 ? time_constant : default_time_constant(s.width(), s.height());
      write_file(out_path, encode_udfg(encode_sketch(s, t)));
    } else if (*decode) {
      const UdfGrid f = decode_udfg(read_file(in_path));
      SketchBitmap s;
      if (method == "threshold") {
        s = level >= 0.0 ? decode_threshold(f, level) : decode_threshold(f);
      } else if (method == "msquares") {
        s = decoder::decode_marching_squares(f);
      } else {
        require(!models.decoder.empty(), ErrorCode::configuration_error, "--method learned needs --decoder");
        auto m = models.load();
        s = decoder::decode_learned_sketch(*m.decoder, f);
      }
      write_file(out_path, to_p5(s));
    } else if (*dataset_gen) {
      data::DatasetManifest m;
      m.width = width;
      m.height = height;
      m.time_constant = default_time_constant(width, height);
      m.seed = common.seed;
      m.min_area_fraction = min_area;
      m.records = data::filter_small(data::generate_records(common.seed, count, width, height), min_area);
      fs::create_directories(dataset_dir);
      data::save_dataset(dataset_dir, m);
      std::cout << m.records.size() << " records\n";
    } else if (*train) {
      KeyValueConfig kv = load_config(common.config_file);
      for (const auto& [k, v] : flag_values.values()) kv.set(k, v);
      if (!kv.has("seed") || train->get_subcommands().front()->count("--seed")) kv.set("seed", std::to_string(common.seed));
      const auto records = data::load_dataset(dataset_dir).records;
      if (*train_gen) {
        const auto cfg = diffusion::train_config_from(kv);
        diffusion::GeneratorNet<float> net;
        diffusion::Rng rng(cfg.seed);
        net.init(rng);
        const auto result = diffusion::train(net, data::generator_samples(records), cfg, [](const diffusion::LossPoint& p) {
          std::cout << "step " << p.step << " lr " << p.lr << " loss " << p.loss << "\n";
        });
        nn::save_checkpoint_file(net.parameters(), ckpt_out);
        write_file(schedule_sidecar(ckpt_out), train_config_text(cfg));
        if (!loss_csv.empty()) write_file(loss_csv, diffusion::loss_curve_csv(result.curve));
      } else if (*train_mask) {
        mask::MaskTrainConfig cfg;
        cfg.epochs = kv.get_long("epochs", cfg.epochs);
        cfg.batch_size = static_cast<int>(kv.get_long("batch_size", cfg.batch_size));
        cfg.initial_lr = kv.get_double("initial_lr", cfg.initial_lr);
        cfg.validation_fraction = kv.get_double("validation_fraction", cfg.validation_fraction);
        cfg.seed = static_cast<std::uint64_t>(kv.get_long("seed", 0));
        cfg.loss = mask::mask_loss_config_from(kv);
        mask::MaskHeadNet<float> net;
        std::mt19937_64 rng(cfg.seed);
        net.init(rng);
        mask::train_mask_head(net, data::mask_examples(records), cfg, [](const mask::MaskEpochReport& r) {
          std::cout << "epoch " << r.epoch << " loss " << r.train_loss << " val_iou " << r.validation_iou << "\n";
        });
        nn::save_checkpoint_file(net.parameters(), ckpt_out);
      } else {
        decoder::DecoderTrainConfig cfg;
        cfg.epochs = kv.get_long("epochs", cfg.epochs);
        cfg.batch_size = static_cast<int>(kv.get_long("batch_size", cfg.batch_size));
        cfg.initial_lr = kv.get_double("initial_lr", cfg.initial_lr);
        cfg.validation_fraction = kv.get_double("validation_fraction", cfg.validation_fraction);
        cfg.noise_std = kv.get_double("noise_std", cfg.noise_std);
        cfg.seed = static_cast<std::uint64_t>(kv.get_long("seed", 0));
        decoder::DecoderNet<float> net;
        std::mt19937_64 rng(cfg.seed);
        net.init(rng);
        decoder::train_decoder(net, data::decoder_pairs(records), cfg, [](const decoder::DecoderEpochReport& r) {
          std::cout << "epoch " << r.epoch << " loss " << r.train_loss << " val_chamfer " << r.validation_chamfer << "\n";
        });
        nn::save_checkpoint_file(net.parameters(), ckpt_out);
      }
    } else if (*session) {
      const fs::path dir = fs::path(root);
      if (*s_new) {
        if (session_id.empty()) session_id = next_session_id(dir);
        if (fs::exists(dir / session_id)) fail(ErrorCode::parameter_error, "session " + session_id + " already exists");
        const auto s = pipeline::create_session(parse_bbox(bbox), class_tag, width, height, session_id);
        pipeline::save_session_dir(dir / session_id, s);
        print_state(s);
      } else {
        auto s = pipeline::load_session_dir(dir / session_id);
        auto m = models.load();
        auto svc = m.service();
        std::mt19937_64 rng(common.seed);
        if (*s_rough || *s_detail) {
          for (int attempt = 0; attempt <= retries; ++attempt) {
            const auto before = s.state;
            s = *s_rough ? pipeline::generate_rough(s, svc.sampler, rng, svc.decoder)
                         : pipeline::generate_detailed(s, svc.sampler, rng, svc.decoder);
            if (s.state != before) break;
          }
        } else if (*s_edit) {
          s = pipeline::submit_edit(s, sketch_from_p5(read_file(edit_path)));
        } else {
          s = pipeline::extract_mask(s, svc.extractor);
        }
        pipeline::save_session_dir(dir / session_id, s);
        print_state(s);
      }
    } else if (*compose) {
      pipeline::CompositionCanvas canvas{width, height, {}};
      for (const auto& spec : layer_specs) {
        std::string id = spec;
        int dx = 0, dy = 0;
        if (const auto c1 = spec.find(':'); c1 != std::string::npos) {
          const auto c2 = spec.find(':', c1 + 1);
          require(c2 != std::string::npos, ErrorCode::parameter_error, "layer spec is id or id:dx:dy");
          id = spec.substr(0, c1);
          dx = std::stoi(spec.substr(c1 + 1, c2 - c1 - 1));
          dy = std::stoi(spec.substr(c2 + 1));
        }
        const auto s = pipeline::load_session_dir(fs::path(root) / id);
        require(s.state == pipeline::SessionState::detailed_generated, ErrorCode::state_error,
                "composition needs sessions in DetailedGenerated");
        canvas.layers.push_back({*s.detailed_sketch, *s.instance_mask, dx, dy});
      }
      write_file(out_path, to_p5(pipeline::compose(canvas)));
    } else if (*eval) {
      std::vector<pipeline::GenerationSession> sessions;
      if (eval_ids.empty()) {
        std::vector<fs::path> dirs;
        for (const auto& e : fs::directory_iterator(root))
          if (fs::exists(e.path() / "session.json")) dirs.push_back(e.path());
        std::sort(dirs.begin(), dirs.end());
        for (const auto& d : dirs) {
          auto s = pipeline::load_session_dir(d);
          if (s.state == pipeline::SessionState::detailed_generated) sessions.push_back(std::move(s));
        }
      } else {
        for (const auto& id : eval_ids) sessions.push_back(pipeline::load_session_dir(fs::path(root) / id));
      }
      std::vector<SketchBitmap> refs;
      if (!references.empty())
        for (const auto& r : data::load_dataset(references).records) refs.push_back(r.detailed);
      const std::string csv = pipeline::evaluation_csv(pipeline::evaluate(sessions, refs));
      if (out_path.empty())
        std::cout << csv;
      else
        write_file(out_path, csv);
    } else if (*serve) {
      auto m = models.load();
      std::optional<fs::path> persist_root;
      if (!persist.empty()) persist_root = persist;
      pipeline::SessionService svc(m.service(), width, height, common.seed, persist_root);
      pipeline::HttpFrontend front(svc);
      std::cout << "listening on " << host << ":" << port << std::endl;
      front.run(host, port);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
