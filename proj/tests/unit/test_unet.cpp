#include <gtest/gtest.h>

#include <cmath>

#include "smoe/errors.hpp"
#include "smoe/random.hpp"
#include "smoe/unet.hpp"

using namespace smoe;

namespace {

ModelConfig small_config(bool smoe = true) {
  ModelConfig c;
  c.depth = 2;
  c.base_channels = 8;
  c.smoe_enabled = smoe;
  return c;
}

Image noise_image(std::size_t h, std::size_t w, std::uint64_t seed, std::size_t channels = 1) {
  Rng rng(seed);
  Image img(h, w, channels);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(UNet, ParameterCountIsFrozen) {
  // Hand count for depth 2, base 8, one input channel:
  //   enc0 1->8: 80 + 584; enc1 8->16: 1168 + 2320; bottleneck 16->32: 4640 + 9248
  //   dec1 up 32->16: 4624; sMoE(16): 2 + 2320 + 272; convs 32->16, 16->16: 4624 + 2320
  //   dec0 up 16->8: 1160; sMoE(8): 2 + 584 + 72; convs 16->8, 8->8: 1160 + 584
  //   head 8->1: 9; fuzzy head 4 rules x 7: 28
  EXPECT_EQ(expected_parameter_count(small_config()), 35801u);
  EXPECT_EQ(Model(small_config(), 0).parameter_count(), 35801u);
  // Without sMoE: minus (2 + 2320 + 272) and (2 + 584 + 72).
  EXPECT_EQ(Model(small_config(false), 0).parameter_count(), 32549u);
}

TEST(UNet, ParameterCountMatchesTensorsForOtherConfigs) {
  for (std::size_t depth : {1u, 3u}) {
    for (std::size_t base : {2u, 5u}) {
      for (bool smoe : {true, false}) {
        ModelConfig c;
        c.depth = depth;
        c.base_channels = base;
        c.smoe_enabled = smoe;
        c.input_channels = 3;
        const Model m(c, 1);
        std::size_t n = 0;
        for (const auto& p : m.parameters()) n += p.tensor.numel();
        EXPECT_EQ(n, expected_parameter_count(c));
      }
    }
  }
}

TEST(UNet, SameSeedGivesIdenticalParameters) {
  const Model a(small_config(), 5), b(small_config(), 5), c(small_config(), 6);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_EQ(values(pa[i].tensor), values(pb[i].tensor));
    differs |= values(pa[i].tensor) != values(pc[i].tensor);
  }
  EXPECT_TRUE(differs);
}

TEST(UNet, OutputShapesAt64) {
  const Model m(small_config(), 0);
  const auto out = forward(m, noise_image(64, 64, 1));
  EXPECT_EQ(out.logits.shape(), (Shape{1, 1, 64, 64}));
  EXPECT_EQ(out.tsk_output.shape(), (Shape{1, 1, 64, 64}));
  EXPECT_EQ(out.firing_maps.shape(), (Shape{1, 4, 64, 64}));
  ASSERT_EQ(out.gate_maps.size(), 2u);
  EXPECT_EQ(out.gate_maps[0].level, 0u);
  EXPECT_EQ(out.gate_maps[0].values.shape(), (Shape{1, 1, 64, 64}));
  EXPECT_EQ(out.gate_maps[1].values.shape(), (Shape{1, 1, 32, 32}));
}

TEST(UNet, ArbitrarySizesAreCroppedBack) {
  const Model m(small_config(), 0);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{9, 13}, {8, 8}, {11, 8}, {17, 10}}) {
    const auto out = forward(m, noise_image(h, w, h * w));
    EXPECT_EQ(out.logits.shape(), (Shape{1, 1, h, w}));
    EXPECT_EQ(out.firing_maps.shape(), (Shape{1, 4, h, w}));
    EXPECT_EQ(out.guidance.shape(), (Shape{1, 1, h, w}));
  }
}

TEST(UNet, BundleInvariants) {
  const Model m(small_config(), 3);
  const auto out = forward(m, noise_image(16, 16, 4));
  for (std::size_t i = 0; i < out.logits.numel(); ++i) {
    const double s = out.semantic_confidence.data()[i];
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_DOUBLE_EQ(s, 1.0 / (1.0 + std::exp(-out.logits.data()[i])));
  }
  for (double v : out.firing_maps.data()) EXPECT_GE(v, 0.0);
  for (double v : out.guidance.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(UNet, ConstantImageGivesConstantGates) {
  const Model m(small_config(), 2);
  const auto out = forward(m, Image(16, 16, 1, 0.4));
  for (std::size_t l = 0; l < out.gate_maps.size(); ++l) {
    const double b = m.decoder()[l].smoe.gate.bias.data()[0];
    for (double g : out.gate_maps[l].values.data()) EXPECT_NEAR(g, 1.0 / (1.0 + std::exp(-b)), 1e-15);
  }
}

TEST(UNet, ForwardIsDeterministic) {
  const Model m(small_config(), 2);
  const Image img = noise_image(12, 12, 9);
  const auto a = forward(m, img), b = forward(m, img);
  EXPECT_EQ(values(a.logits), values(b.logits));
  EXPECT_EQ(values(a.tsk_output), values(b.tsk_output));
  EXPECT_EQ(values(a.gate_maps[1].values), values(b.gate_maps[1].values));
}

TEST(UNet, BatchedForwardEqualsSingleForwards) {
  const Model m(small_config(), 2);
  const Image a = noise_image(8, 8, 1), b = noise_image(8, 8, 2);
  const auto batch = forward(m, std::vector<Image>{a, b});
  const auto fb = forward(m, b);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(batch.logits.data()[64 + i], fb.logits.data()[i]);
}

TEST(UNet, AblationDropsGatesAndParameters) {
  const Model with(small_config(true), 0), without(small_config(false), 0);
  EXPECT_LT(without.parameter_count(), with.parameter_count());
  EXPECT_TRUE(forward(without, noise_image(8, 8, 1)).gate_maps.empty());
}

TEST(UNet, RgbInputsAreAccepted) {
  ModelConfig c = small_config();
  c.input_channels = 3;
  const Model m(c, 0);
  EXPECT_EQ(forward(m, noise_image(8, 8, 1, 3)).logits.shape(), (Shape{1, 1, 8, 8}));
}

TEST(UNet, ConfigValidationAndDiff) {
  ModelConfig c = small_config();
  c.depth = 0;
  EXPECT_THROW(c.validate(), Error);
  c.depth = 2;
  c.input_channels = 2;
  EXPECT_THROW(c.validate(), Error);
  ModelConfig d = small_config();
  d.depth = 4;
  EXPECT_NE(small_config().diff(d).find("depth"), std::string::npos);
  EXPECT_TRUE(small_config().diff(small_config()).empty());
}

TEST(UNet, BadInputsAreRejected) {
  const Model m(small_config(), 0);
  Image img = noise_image(8, 8, 1);
  img.data[5] = NAN;
  EXPECT_THROW(forward(m, img), NumericError);
  EXPECT_THROW(forward(m, std::vector<Image>{noise_image(8, 8, 1), noise_image(8, 9, 1)}), ShapeError);
  EXPECT_THROW(forward(m, std::vector<Image>{}), ShapeError);
}

TEST(UNet, DecoderSemanticTapIsConfigurable) {
  ModelConfig c = small_config();
  c.semantic_tap = SemanticTap::decoder_features;
  const Model m(c, 0);
  const auto out = forward(m, noise_image(8, 8, 3));
  for (double s : out.semantic_confidence.data()) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}
