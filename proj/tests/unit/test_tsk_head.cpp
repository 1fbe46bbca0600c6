#include <gtest/gtest.h>

#include <cmath>

#include "smoe/errors.hpp"
#include "smoe/random.hpp"
#include "smoe/tsk_head.hpp"

using namespace smoe;

namespace {

// Independent crisp TSK evaluation with plain left-to-right sums.
double reference_tsk(double x1, double x2, const std::vector<std::array<double, 7>>& rows) {
  double num = 0.0, den = 0.0;
  for (const auto& r : rows) {
    const double m1 = std::exp(-0.5 * std::pow((x1 - r[0]) / r[2], 2));
    const double m2 = std::exp(-0.5 * std::pow((x2 - r[1]) / r[3], 2));
    const double w = m1 * m2;
    num += w * (r[4] + r[5] * x1 + r[6] * x2);
    den += w;
  }
  return num / (den + 1e-9);
}

std::vector<std::array<double, 7>> random_rows(Rng& rng, std::size_t rules) {
  std::vector<std::array<double, 7>> rows(rules);
  for (auto& r : rows) {
    r = {rng.uniform(), rng.uniform(), rng.uniform(0.05, 0.6), rng.uniform(0.05, 0.6),
         rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
  }
  return rows;
}

Tensor map_of(const std::vector<double>& v, std::size_t h, std::size_t w) {
  return Tensor::from_data({1, 1, h, w}, v);
}

}  // namespace

TEST(TskHead, MembershipAnalyticValues) {
  EXPECT_EQ(membership(0.3, 0.3, 0.2), 1.0);
  EXPECT_NEAR(membership(0.5, 0.3, 0.2), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(membership(0.1, 0.3, 0.2), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(membership(0.7, 0.3, 0.2), std::exp(-2.0), 1e-15);
}

TEST(TskHead, NormalizedFiringDeficitIsBounded) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto rows = random_rows(rng, 4);
    const auto p = FuzzyRuleParams::from_rows(rows);
    const double x1 = rng.uniform(-1, 2), x2 = rng.uniform(-1, 2);
    const auto w = firing_strengths(x1, x2, p);
    const auto nw = normalized_firing(w);
    double total = 0.0, sum_nw = 0.0;
    for (double v : w) total += v;
    for (double v : nw) sum_nw += v;
    EXPECT_LE(sum_nw, 1.0 + 1e-15);
    EXPECT_LE(1.0 - sum_nw, kDefuzzEps / (total + kDefuzzEps) + 1e-15);
  }
}

TEST(TskHead, AllRulesSilentGivesZeroOutput) {
  const auto p = FuzzyRuleParams::from_rows({{0.0, 0.0, 1e-3, 1e-3, 5.0, 1.0, 1.0}});
  EXPECT_EQ(tsk_scalar(1.0, 1.0, p), 0.0);
}

TEST(TskHead, ScalarMatchesReferenceOnRandomCases) {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto rows = random_rows(rng, 1 + rng.below(6));
    const auto p = FuzzyRuleParams::from_rows(rows);
    const double x1 = rng.uniform(), x2 = rng.uniform();
    EXPECT_NEAR(tsk_scalar(x1, x2, p), reference_tsk(x1, x2, rows), 1e-12);
  }
}

TEST(TskHead, TensorForwardMatchesReferenceOnRandomCases) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rows = random_rows(rng, 4);
    const auto p = FuzzyRuleParams::from_rows(rows);
    std::vector<double> a(20), b(20);
    for (auto& v : a) v = rng.uniform();
    for (auto& v : b) v = rng.uniform();
    const auto out = tsk_forward(map_of(a, 4, 5), map_of(b, 4, 5), p);
    ASSERT_EQ(out.firing.dim(1), 4u);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(out.y.data()[i], reference_tsk(a[i], b[i], rows), 1e-12);
  }
}

TEST(TskHead, RulePermutationIsExactlyEquivariant) {
  Rng rng(4);
  const auto p = FuzzyRuleParams::from_rows(random_rows(rng, 5));
  const std::vector<std::size_t> order{4, 2, 0, 3, 1};
  const auto q = p.permuted(order);
  std::vector<double> a(30), b(30);
  for (auto& v : a) v = rng.uniform();
  for (auto& v : b) v = rng.uniform();
  const auto op = tsk_forward(map_of(a, 5, 6), map_of(b, 5, 6), p);
  const auto oq = tsk_forward(map_of(a, 5, 6), map_of(b, 5, 6), q);
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(op.y.data()[i], oq.y.data()[i]);
    for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(oq.firing.data()[r * 30 + i], op.firing.data()[order[r] * 30 + i]);
  }
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(tsk_scalar(a[i], b[i], p), tsk_scalar(a[i], b[i], q));
  }
}

TEST(TskHead, InitialRulesCoverTheQuadrants) {
  Rng rng(0);
  const auto p = FuzzyRuleParams::init(4, rng);
  const std::vector<std::array<double, 2>> expected{{1, 1}, {0, 1}, {0, 0}, {1, 0}};
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(p.c(r, 0), expected[r][0]);
    EXPECT_EQ(p.c(r, 1), expected[r][1]);
    EXPECT_EQ(p.sigma(r, 0), 0.25);
    EXPECT_EQ(p.a(r, 0), 0.0);
  }
  EXPECT_THROW(FuzzyRuleParams::init(0, rng), Error);
}

TEST(TskHead, RowsRoundTripAndCloneIsDeep) {
  Rng rng(5);
  const auto rows = random_rows(rng, 3);
  const auto p = FuzzyRuleParams::from_rows(rows);
  EXPECT_EQ(p.rows(), rows);
  auto q = p.clone();
  q.center[0].mutable_data()[0] = 42.0;
  EXPECT_EQ(p.c(0, 0), rows[0][0]);
}

TEST(TskHead, ClampWidthsFloorsSigma) {
  auto p = FuzzyRuleParams::from_rows({{0.5, 0.5, -1.0, 1e-6, 0, 0, 0}, {0.5, 0.5, 0.3, 0.2, 0, 0, 0}});
  p.clamp_widths();
  EXPECT_EQ(p.sigma(0, 0), kSigmaMin);
  EXPECT_EQ(p.sigma(0, 1), kSigmaMin);
  EXPECT_EQ(p.sigma(1, 0), 0.3);
}

TEST(TskHead, ShapeMismatchIsRejected) {
  Rng rng(0);
  const auto p = FuzzyRuleParams::init(4, rng);
  EXPECT_THROW(tsk_forward(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 2, 3}), p), ShapeError);
}
