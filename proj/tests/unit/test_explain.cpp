#include <gtest/gtest.h>

#include "json.hpp"
#include "smoe/errors.hpp"
#include "smoe/explain.hpp"
#include "smoe/random.hpp"
#include "test_support.hpp"

using namespace smoe;

namespace {

ModelConfig small_config(bool smoe = true) {
  ModelConfig c;
  c.depth = 2;
  c.base_channels = 4;
  c.smoe_enabled = smoe;
  return c;
}

FuzzyRuleParams random_rules(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::array<double, 7>> rows(4);
  for (auto& r : rows) {
    r = {rng.uniform(), rng.uniform(), rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5), rng.normal(), rng.normal(),
         rng.normal()};
  }
  return FuzzyRuleParams::from_rows(rows);
}

}  // namespace

TEST(Explain, LinguisticLabels) {
  EXPECT_EQ(linguistic_label(0.2), "LOW");
  EXPECT_EQ(linguistic_label(0.5), "MEDIUM");
  EXPECT_EQ(linguistic_label(0.51), "HIGH");
  EXPECT_EQ(rule_antecedent(0.9, 0.1), "IF x1 is HIGH AND x2 is LOW");
}

TEST(Explain, RulebaseJsonRoundTripIsBitExact) {
  const auto p = random_rules(1);
  const auto q = rulebase_from_json(rulebase_to_json(p));
  EXPECT_EQ(q.rows(), p.rows());
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const double x1 = rng.uniform(), x2 = rng.uniform();
    EXPECT_EQ(tsk_scalar(x1, x2, p), tsk_scalar(x1, x2, q));
  }
}

TEST(Explain, RulebaseJsonContent) {
  const auto p = FuzzyRuleParams::from_rows({{0.8, 0.2, 0.3, 0.3, -1.5, 2.0, 0.5}});
  const auto j = nlohmann::json::parse(rulebase_to_json(p));
  const auto& r = j.at("rules").at(0);
  EXPECT_EQ(r.at("rule"), 1);
  EXPECT_EQ(r.at("antecedent"), "IF x1 is HIGH AND x2 is LOW");
  EXPECT_EQ(r.at("constant_term_sign"), "negative");
  EXPECT_EQ(r.at("consequent").at(1).get<double>(), 2.0);
}

TEST(Explain, MalformedRulebaseIsADataError) {
  EXPECT_THROW(rulebase_from_json("[]"), DataError);
  EXPECT_THROW(rulebase_from_json("{\"rules\": []}"), DataError);
  EXPECT_THROW(rulebase_from_json("{\"rules\": [{\"center\": [0.1]}]}"), DataError);
}

TEST(Explain, MembershipCurvesCsv) {
  const auto p = FuzzyRuleParams::from_rows({{0.0, 1.0, 0.5, 0.5, 0, 0, 0}, {0.5, 0.5, 0.1, 0.1, 0, 0, 0}});
  const auto csv = mf_curves_csv(p, 3);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,rule1_x1,rule1_x2,rule2_x1,rule2_x2");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("\n0.5,"), std::string::npos);
  EXPECT_THROW(mf_curves_csv(p, 1), Error);
}

TEST(Explain, FiringMapsAreNormalisedAndArgmaxUsesPalette) {
  const Model m(small_config(), 3);
  Rng rng(4);
  Image img(8, 8);
  for (double& v : img.data) v = rng.uniform();
  const auto bundle = forward(m, img);
  const auto maps = rule_firing_maps(bundle);
  ASSERT_EQ(maps.size(), 4u);
  for (std::size_t i = 0; i < 64; ++i) {
    double total = 0.0;
    std::size_t best = 0;
    for (std::size_t r = 0; r < 4; ++r) {
      total += maps[r].data[i];
      if (maps[r].data[i] > maps[best].data[i]) best = r;
    }
    EXPECT_LE(total, 1.0 + 1e-12);
    const Image argmax = dominant_rule_map(maps);
    EXPECT_DOUBLE_EQ(argmax.data[i * 3], kRulePalette[best][0] / 255.0);
  }
}

TEST(Explain, StrategyMapsAreUniformForConstantImages) {
  const Model m(small_config(), 5);
  const auto maps = strategy_maps(forward(m, Image(16, 12, 1, 0.3)));
  ASSERT_EQ(maps.size(), 2u);
  for (const auto& g : maps) {
    EXPECT_EQ(g.height, 16u);
    EXPECT_EQ(g.width, 12u);
    for (double v : g.data) EXPECT_EQ(v, g.data[0]);
  }
}

TEST(Explain, ArtifactsAreCountedByContract) {
  smoe::testing::TempDir dir("explain");
  const Model m(small_config(), 6);
  Image img(16, 16);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = (i % 16) < 8 ? 0.1 : 0.9;
  const auto files = write_explain_artifacts(m, img, dir.path());
  std::size_t gates = 0, firing = 0, argmax = 0;
  for (const auto& f : files) {
    ASSERT_TRUE(std::filesystem::exists(f)) << f;
    const auto name = f.filename().string();
    gates += name.rfind("strategy_level", 0) == 0;
    firing += name.rfind("firing_rule", 0) == 0;
    argmax += name == "firing_argmax.png";
  }
  EXPECT_EQ(gates, 2u);
  EXPECT_EQ(firing, 4u);
  EXPECT_EQ(argmax, 1u);
  const auto rules = rulebase_from_json(smoe::testing::read_text(dir / "rulebase.json"));
  EXPECT_EQ(rules.rows(), m.tsk().rows());
  EXPECT_TRUE(std::filesystem::exists(dir / "rulebase_mf_curves.csv"));
}

TEST(Explain, ModelsWithoutSmoeHaveNoStrategyMaps) {
  smoe::testing::TempDir dir("explain_plain");
  const Model m(small_config(false), 6);
  EXPECT_THROW(write_explain_artifacts(m, Image(8, 8), dir.path()), Error);
}
