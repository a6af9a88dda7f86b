#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "support.hpp"
#include "udfsketch/data/engine.hpp"
#include "udfsketch/decoder/decoder.hpp"
#include "udfsketch/nn/checkpoint.hpp"

using namespace udfsketch;
using namespace udfsketch::decoder;
using testing_support::code_of;

namespace {

std::vector<DecoderPair> pairs(std::uint64_t seed, std::size_t count) {
  return data::decoder_pairs(data::filter_small(data::generate_records(seed, count, 32, 32), 0.02));
}

double sketch_iou(const SketchBitmap& a, const SketchBitmap& b) {
  return mask_iou(sketch_as_mask(a), sketch_as_mask(b));
}

}  // namespace

TEST(DecoderNet, ShapePreservingForMultiplesOfFour) {
  std::mt19937_64 rng(1);
  DecoderNet<float> net;
  net.init(rng);
  for (auto [h, w] : {std::pair{32, 32}, {16, 24}, {8, 12}, {4, 4}}) {
    nn::Tensor<float> x({2, 1, h, w});
    for (auto& v : x.data) v = std::uniform_real_distribution<float>(-1, 1)(rng);
    const auto p = net.forward(x);
    EXPECT_EQ(p.shape, x.shape);
    for (float v : p.data) {
      EXPECT_GT(v, 0.0f);
      EXPECT_LT(v, 1.0f);
    }
  }
  EXPECT_EQ(code_of([&] { net.forward(nn::Tensor<float>({1, 1, 10, 12})); }), ErrorCode::shape_error);
}

TEST(DecoderNet, GrayMappingAndBinarization) {
  nn::Tensor<float> p({1, 1, 1, 3});
  p[0] = 1.0f;
  p[1] = 0.0f;
  p[2] = 0.5f;
  const GrayBitmap g = probabilities_to_gray(p);
  EXPECT_EQ(g[0], 0);
  EXPECT_EQ(g[1], 255);
  EXPECT_EQ(g[2], 128);

  GrayBitmap light(8, 8, 240);
  light.at(3, 3) = 200;
  EXPECT_TRUE(is_blank(binarize_decoded(light)));
  GrayBitmap drawn(8, 8, 250);
  drawn.at(2, 2) = drawn.at(2, 3) = 10;
  const SketchBitmap s = binarize_decoded(drawn);
  EXPECT_EQ(count_nonzero(s), 2u);
  EXPECT_EQ(s.at(2, 3), 1);
}

TEST(DecoderNet, CrossEntropyGradient) {
  std::mt19937_64 rng(2);
  nn::Tensor<float> p({1, 1, 4, 5});
  for (auto& v : p.data) v = std::uniform_real_distribution<float>(0.05f, 0.95f)(rng);
  std::vector<std::uint8_t> t(p.numel());
  for (auto& v : t) v = std::bernoulli_distribution(0.3)(rng);
  nn::Tensor<float> g(p.shape);
  const double loss = bce_with_grad(p, t, g);
  EXPECT_NEAR(loss, mask::binary_cross_entropy<float>(p.data, t), 1e-12);
  for (std::size_t i = 0; i < p.numel(); ++i) {
    const double q = p[i];
    const double want = (t[i] ? -1.0 / q : 1.0 / (1.0 - q)) / static_cast<double>(p.numel());
    EXPECT_NEAR(g[i], want, 1e-5 * std::abs(want));
  }
}

TEST(DecoderNet, ChamferOrDiagonal) {
  SketchBitmap a(3, 4), b(3, 4);
  b.at(1, 1) = 1;
  EXPECT_EQ(chamfer_or_diagonal(a, b), 5.0);
  a.at(1, 1) = 1;
  EXPECT_EQ(chamfer_or_diagonal(a, b), 0.0);
}

TEST(DecoderNet, CorruptFieldStaysInRange) {
  std::mt19937_64 rng(3);
  SketchBitmap s(16, 16);
  s.at(4, 4) = 1;
  const UdfGrid f = encode_sketch(s);
  const UdfGrid noisy = corrupt_field(f, 0.5, rng);
  EXPECT_NE(noisy, f);
  for (float v : noisy.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  EXPECT_EQ(corrupt_field(f, 0.0, rng), f);
  EXPECT_EQ(code_of([&] { corrupt_field(f, -1.0, rng); }), ErrorCode::parameter_error);
}

TEST(DecoderTraining, SeedIdenticalRunsGiveIdenticalCheckpoints) {
  const auto data = pairs(5, 12);
  auto run = [&](std::uint64_t seed) {
    std::mt19937_64 rng(4);
    DecoderNet<float> net({.widths = {4, 8, 8}, .residual_blocks = 1});
    net.init(rng);
    DecoderTrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.seed = seed;
    train_decoder(net, data, cfg);
    return nn::encode_checkpoint(net.parameters());
  };
  const std::string a = run(1);
  EXPECT_EQ(a, run(1));
  EXPECT_NE(a, run(2));
}

TEST(DecoderTraining, Rejects) {
  DecoderNet<float> net({.widths = {4, 8, 8}, .residual_blocks = 1});
  EXPECT_EQ(code_of([&] { train_decoder(net, {}, DecoderTrainConfig{}); }), ErrorCode::configuration_error);
  DecoderTrainConfig bad;
  bad.noise_std = -1;
  EXPECT_EQ(code_of([&] { train_decoder(net, pairs(6, 2), bad); }), ErrorCode::configuration_error);
}

// One trained decoder shared by the behavior checks below.
class TrainedDecoder : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    std::mt19937_64 rng(7);
    net_ = std::make_unique<DecoderNet<float>>();
    net_->init(rng);
    DecoderTrainConfig cfg;
    cfg.seed = 8;
    reports_ = train_decoder(*net_, pairs(51, 400), cfg);
  }
  static void TearDownTestSuite() { net_.reset(); }

  static std::unique_ptr<DecoderNet<float>> net_;
  static std::vector<DecoderEpochReport> reports_;
};

std::unique_ptr<DecoderNet<float>> TrainedDecoder::net_;
std::vector<DecoderEpochReport> TrainedDecoder::reports_;

TEST_F(TrainedDecoder, ValidationChamferAndLoss) {
  ASSERT_EQ(reports_.size(), 20u);
  EXPECT_LE(reports_.back().validation_chamfer, 1.0);
  EXPECT_LT(reports_.back().train_loss, reports_.front().train_loss);
  const auto held_out = pairs(52, 60);
  EXPECT_LT(decoder_loss(*net_, held_out), all_background_loss(held_out));
}

TEST_F(TrainedDecoder, RoundTripOnEncodedSketches) {
  const auto held_out = pairs(53, 60);
  double chamfer = 0, iou = 0;
  for (const auto& d : held_out) {
    const GrayBitmap g = decode_learned(*net_, d.field);
    EXPECT_EQ(g.width(), d.field.width());
    EXPECT_EQ(g.height(), d.field.height());
    const SketchBitmap s = binarize_decoded(g);
    chamfer += chamfer_or_diagonal(s, d.sketch);
    iou += sketch_iou(s, d.sketch);
  }
  EXPECT_LE(chamfer / held_out.size(), 1.0);
  EXPECT_GE(iou / held_out.size(), 0.7);
}

TEST_F(TrainedDecoder, ConstantFieldStaysBlank) {
  for (float c : {0.6f, 0.8f, 0.95f, 0.999f}) {
    const UdfGrid f(32, 32, default_time_constant(32, 32), c);
    EXPECT_LT(ink_fraction(decode_learned_sketch(*net_, f)), 0.01) << c;
  }
}

TEST_F(TrainedDecoder, ComparisonOnCleanAndNoisyFields) {
  const auto fixtures = pairs(54, 60);
  std::mt19937_64 rng(9);
  double learned_cont = 0, threshold_cont = 0;
  int n = 0;
  std::vector<DecoderComparison> rows;
  for (const auto& d : fixtures) {
    if (n == 50) break;
    const DecoderComparison clean = compare_decoders(d.field, d.sketch, *net_);
    EXPECT_EQ(clean.get(DecodeMethod::threshold).chamfer, 0.0);
    EXPECT_LE(clean.get(DecodeMethod::learned).chamfer, 1.0);
    const DecoderComparison noisy = compare_decoders(corrupt_field(d.field, 0.05, rng), d.sketch, *net_);
    for (const auto& c : {clean, noisy})
      for (const auto& m : c.methods) {
        EXPECT_TRUE(std::isfinite(m.chamfer) && m.chamfer >= 0);
        EXPECT_TRUE(std::isfinite(m.ink_fraction) && m.ink_fraction >= 0);
        EXPECT_TRUE(std::isfinite(m.continuity) && m.continuity >= 0);
      }
    learned_cont += noisy.get(DecodeMethod::learned).continuity;
    threshold_cont += noisy.get(DecodeMethod::threshold).continuity;
    rows.push_back(noisy);
    ++n;
  }
  ASSERT_EQ(n, 50);
  EXPECT_GE(learned_cont / n, threshold_cont / n);
  const std::string csv = comparison_csv(rows);
  EXPECT_EQ(csv.rfind("fixture,method,chamfer,ink_fraction,continuity\n0,learned,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 50);
}

TEST_F(TrainedDecoder, CompareRejectsBlankTruth) {
  const UdfGrid f(32, 32, 1.0, 0.5f);
  EXPECT_EQ(code_of([&] { compare_decoders(f, SketchBitmap(32, 32), *net_); }), ErrorCode::empty_ink);
}
