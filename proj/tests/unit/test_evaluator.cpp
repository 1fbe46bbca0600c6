#include <gtest/gtest.h>

#include <cmath>

#include "matching_oracle.hpp"
#include "smoe/errors.hpp"
#include "smoe/evaluator.hpp"
#include "smoe/random.hpp"

using namespace smoe;
using smoe::testing::brute_force_max_matching;
using smoe::testing::for_each_sparse_map;

namespace {

BoundaryMap from_rows(const std::vector<std::string>& rows) {
  BoundaryMap m(rows.size(), rows[0].size());
  for (std::size_t y = 0; y < rows.size(); ++y)
    for (std::size_t x = 0; x < rows[y].size(); ++x) m.set(y, x, rows[y][x] == '#');
  return m;
}

bool has_full_2x2(const BoundaryMap& m) {
  for (std::size_t y = 0; y + 1 < m.height; ++y)
    for (std::size_t x = 0; x + 1 < m.width; ++x)
      if (m.at(y, x) && m.at(y, x + 1) && m.at(y + 1, x) && m.at(y + 1, x + 1)) return true;
  return false;
}

// Number of 8-connected foreground components, by flood fill.
std::size_t components(const BoundaryMap& m) {
  std::vector<int> label(m.on.size(), 0);
  std::size_t count = 0;
  for (std::size_t s = 0; s < m.on.size(); ++s) {
    if (!m.on[s] || label[s]) continue;
    ++count;
    std::vector<std::size_t> stack{s};
    label[s] = 1;
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      const long y = static_cast<long>(i / m.width), x = static_cast<long>(i % m.width);
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          const long ny = y + dy, nx = x + dx;
          if (ny < 0 || nx < 0 || ny >= static_cast<long>(m.height) || nx >= static_cast<long>(m.width)) continue;
          const auto j = static_cast<std::size_t>(ny) * m.width + static_cast<std::size_t>(nx);
          if (m.on[j] && !label[j]) {
            label[j] = 1;
            stack.push_back(j);
          }
        }
    }
  }
  return count;
}

// Every pixel of every remaining full 2×2 block must be a cut pixel: removing
// it changes the number of components.
bool blocks_are_all_cut_pixels(const BoundaryMap& m) {
  const auto base = components(m);
  for (std::size_t y = 0; y + 1 < m.height; ++y)
    for (std::size_t x = 0; x + 1 < m.width; ++x) {
      if (!(m.at(y, x) && m.at(y, x + 1) && m.at(y + 1, x) && m.at(y + 1, x + 1))) continue;
      for (auto [py, px] : {std::pair{y, x}, {y, x + 1}, {y + 1, x}, {y + 1, x + 1}}) {
        BoundaryMap r = m;
        r.set(py, px, false);
        if (components(r) == base) return false;
      }
    }
  return true;
}

BoundaryMap random_blob_map(Rng& rng, std::size_t h, std::size_t w) {
  // Thresholded sum of random bumps: thick, smooth shapes.
  std::vector<std::array<double, 3>> bumps(3);
  for (auto& b : bumps) b = {rng.uniform(0, static_cast<double>(h)), rng.uniform(0, static_cast<double>(w)), rng.uniform(1.5, 4)};
  BoundaryMap m(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double v = 0;
      for (auto& b : bumps) v += std::exp(-(std::pow(y - b[0], 2) + std::pow(x - b[1], 2)) / (2 * b[2] * b[2]));
      m.set(y, x, v > 0.5);
    }
  return m;
}

}  // namespace

TEST(Thin, SinglePixelLinesAreUnchanged) {
  for (const auto& rows : std::vector<std::vector<std::string>>{
           {".......", ".#####.", "......."},
           {"#......", ".#.....", "..#....", "...###."},
           {"..#..", "..#..", "..#..", "..#.."},
           {"#####", ".....", "#####"}}) {
    const auto m = from_rows(rows);
    EXPECT_TRUE(thin(m).same_pixels(m));
  }
}

TEST(Thin, ThickBarBecomesItsCentreline) {
  const auto bar = from_rows({".........", ".#######.", ".#######.", ".#######.", "........."});
  // Parallel peeling removes the bar's corners together with the end pixels of
  // the middle row, leaving the centre row without its two end pixels.
  const auto expected = from_rows({".........", ".........", "..#####..", ".........", "........."});
  EXPECT_TRUE(thin(bar).same_pixels(expected));
}

TEST(Thin, TwoPixelBandsKeepLeftColumnAndBottomRow) {
  const auto vertical = from_rows({"...##...", "...##...", "...##...", "...##...", "...##..."});
  EXPECT_TRUE(thin(vertical).same_pixels(from_rows({"...#....", "...#....", "...#....", "...#....", "...#...."})));
  const auto horizontal = from_rows({".....", "#####", "#####", "....."});
  EXPECT_TRUE(thin(horizontal).same_pixels(from_rows({".....", ".....", "#####", "....."})));
}

TEST(Thin, PreservesComponentCount) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_blob_map(rng, 6 + rng.below(10), 6 + rng.below(10));
    const auto t = thin(m);
    EXPECT_EQ(components(t), components(m));
    for (std::size_t i = 0; i < m.on.size(); ++i) EXPECT_LE(t.on[i], m.on[i]);
  }
}

TEST(Thin, IsIdempotent) {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    BoundaryMap m(3 + rng.below(10), 3 + rng.below(10));
    const double density = rng.uniform(0.2, 0.9);
    for (auto& v : m.on) v = rng.uniform() < density;
    const auto t = thin(m);
    EXPECT_TRUE(thin(t).same_pixels(t));
  }
}

TEST(Thin, RemainingBlocksAreNeededForConnectivity) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    BoundaryMap m(3 + rng.below(10), 3 + rng.below(10));
    const double density = rng.uniform(0.3, 0.9);
    for (auto& v : m.on) v = rng.uniform() < density;
    const auto t = thin(m);
    EXPECT_TRUE(blocks_are_all_cut_pixels(t));
  }
}

TEST(Thin, SolidShapesLoseEveryBlock) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) EXPECT_FALSE(has_full_2x2(thin(random_blob_map(rng, 12, 14))));
  EXPECT_FALSE(has_full_2x2(thin(from_rows({"####", "####", "####", "####"}))));
}

TEST(Thin, EmptyAndFullFrames) {
  EXPECT_EQ(thin(BoundaryMap(5, 5)).count(), 0u);
  BoundaryMap full(6, 6);
  for (auto& v : full.on) v = 1;
  const auto t = thin(full);
  EXPECT_GT(t.count(), 0u);
  EXPECT_EQ(components(t), 1u);
  EXPECT_FALSE(has_full_2x2(t));
}

TEST(Match, IdenticalMapsMatchFully) {
  const auto m = from_rows({"#..#", ".#..", "...#"});
  EXPECT_EQ(match_boundaries(m, m, 1.0), (MatchCounts{4, 0, 0}));
}

TEST(Match, OnePixelShiftWithinTolerance) {
  const auto gt = from_rows({".#...", ".#...", ".#...", ".#...", ".#..."});
  const auto pred = from_rows({"..#..", "..#..", "..#..", "..#..", "..#.."});
  EXPECT_EQ(match_boundaries(pred, gt, 2.0), (MatchCounts{5, 0, 0}));
  EXPECT_EQ(match_boundaries(pred, gt, 0.5), (MatchCounts{0, 5, 5}));
}

TEST(Match, EmptySides) {
  const auto gt = from_rows({"#.#", "..."});
  EXPECT_EQ(match_boundaries(BoundaryMap(2, 3), gt, 1.0), (MatchCounts{0, 0, 2}));
  EXPECT_EQ(match_boundaries(gt, BoundaryMap(2, 3), 1.0), (MatchCounts{0, 2, 0}));
}

TEST(Match, InvalidArguments) {
  EXPECT_THROW(match_boundaries(BoundaryMap(2, 3), BoundaryMap(3, 2), 1.0), ShapeError);
  EXPECT_THROW(match_boundaries(BoundaryMap(2, 2), BoundaryMap(2, 2), 0.0), Error);
}

TEST(Match, PlainGreedyCanFallShortOfTheMaximum) {
  // Greedy takes the distance-1 pair (0,1)-(0,0) first; (1,0) then has no
  // partner left although (0,1)-(0,2) and (1,0)-(0,0) match both.
  const auto pred = from_rows({".#.", "#..", "..."});
  const auto gt = from_rows({"#.#", "...", "..."});
  EXPECT_EQ(match_boundaries(pred, gt, 1.0, MatchStrategy::greedy).tp, 1u);
  EXPECT_EQ(match_boundaries(pred, gt, 1.0).tp, 2u);
  EXPECT_EQ(brute_force_max_matching(pred, gt, 1.0), 2u);
}

TEST(Match, GreedyTieBreakIsRowMajor) {
  const auto pred = from_rows({".#."});
  const auto gt = from_rows({"#.#"});
  const auto r = match_boundaries_detailed(pred, gt, 1.0, MatchStrategy::greedy);
  EXPECT_EQ(r.gt_matched, (std::vector<std::uint8_t>{1, 0, 0}));
}

TEST(Match, EqualsMaximumMatchingOnAll3x3SparseMaps) {
  for (double tol : {0.5, 1.0, 1.5, 2.0}) {
    for_each_sparse_map(3, 3, 3, [&](const BoundaryMap& p) {
      for_each_sparse_map(3, 3, 3, [&](const BoundaryMap& g) {
        ASSERT_EQ(match_boundaries(p, g, tol).tp, brute_force_max_matching(p, g, tol));
      });
    });
  }
}

TEST(Match, SwappingSidesSwapsFalsePositivesAndNegatives) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    BoundaryMap a(8, 8), b(8, 8);
    for (auto& v : a.on) v = rng.uniform() < 0.2;
    for (auto& v : b.on) v = rng.uniform() < 0.2;
    const double tol = rng.uniform(0.5, 3.0);
    const auto ab = match_boundaries(a, b, tol), ba = match_boundaries(b, a, tol);
    EXPECT_EQ(ab.tp, ba.tp);
    EXPECT_EQ(ab.fp, ba.fn);
    EXPECT_EQ(ab.fn, ba.fp);
  }
}

TEST(Match, DetailedFlagsAgreeWithCounts) {
  Rng rng(6);
  BoundaryMap a(10, 10), b(10, 10);
  for (auto& v : a.on) v = rng.uniform() < 0.3;
  for (auto& v : b.on) v = rng.uniform() < 0.3;
  const auto r = match_boundaries_detailed(a, b, 1.5);
  std::size_t mp = 0, mg = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    mp += r.pred_matched[i];
    mg += r.gt_matched[i];
    EXPECT_LE(r.pred_matched[i], a.on[i]);
    EXPECT_LE(r.gt_matched[i], b.on[i]);
  }
  EXPECT_EQ(mp, r.counts.tp);
  EXPECT_EQ(mg, r.counts.tp);
  EXPECT_EQ(r.counts.fp, a.count() - mp);
}

TEST(Sweep, DefaultThresholdsAndTolerance) {
  const auto t = default_thresholds();
  ASSERT_EQ(t.size(), 33u);
  EXPECT_DOUBLE_EQ(t.front(), 1.0 / 34.0);
  EXPECT_DOUBLE_EQ(t.back(), 33.0 / 34.0);
  EXPECT_DOUBLE_EQ(default_tolerance(3, 4), 0.0375);
}

TEST(Sweep, FMeasureConventions) {
  EXPECT_EQ(f_measure(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(f_measure(0.5, 1.0), 2.0 / 3.0);
  const SweepCounts none{};
  EXPECT_EQ(none.precision(), 0.0);
  EXPECT_EQ(none.recall(), 0.0);
  EXPECT_EQ(none.f(), 0.0);
}

TEST(Sweep, ZeroProbabilityGivesNoDetections) {
  const auto gt = from_rows({"#...", ".#..", "..#.", "...#"});
  const auto s = pr_sweep(Image(4, 4), {gt}, default_thresholds(5), 1.0);
  for (const auto& c : s.counts) {
    EXPECT_EQ(c.total_pred, 0u);
    EXPECT_EQ(c.matched_gt, 0u);
    EXPECT_EQ(c.total_gt, 4u);
    EXPECT_EQ(c.recall(), 0.0);
  }
}

TEST(Sweep, PerfectPredictionHasUnitPrecisionAndRecall) {
  const auto gt = from_rows({"..#...", "..#...", "...##.", "......"});
  ASSERT_TRUE(thin(gt).same_pixels(gt));
  const auto s = pr_sweep(boundary_to_image(gt), {gt}, default_thresholds(), 0.5);
  for (const auto& c : s.counts) {
    EXPECT_EQ(c.precision(), 1.0);
    EXPECT_EQ(c.recall(), 1.0);
  }
}

TEST(Sweep, MatchesExhaustiveReferenceOn6x6) {
  // Isolated pixels at distinct strengths stay untouched by thinning, so the
  // reference is binarisation followed by brute-force maximum matching.
  Image prob(6, 6);
  prob.at(0, 0) = 0.9;
  prob.at(0, 3) = 0.6;
  prob.at(2, 1) = 0.3;
  prob.at(2, 5) = 0.8;
  prob.at(4, 2) = 0.55;
  prob.at(5, 5) = 0.2;
  const auto gt = from_rows({".#....", "......", "....#.", "......", "..#.#.", "#....."});
  const std::vector<double> thresholds{0.25, 0.5, 0.7};
  const double tol = 1.5;
  const auto sweep = pr_sweep(prob, {gt}, thresholds, tol);
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    const auto b = binarize(prob, thresholds[k]);
    ASSERT_TRUE(thin(b).same_pixels(b));
    const std::size_t tp = brute_force_max_matching(b, gt, tol);
    EXPECT_EQ(sweep.counts[k].matched_gt, tp);
    EXPECT_EQ(sweep.counts[k].matched_pred, tp);
    EXPECT_EQ(sweep.counts[k].total_pred, b.count());
    EXPECT_EQ(sweep.counts[k].total_gt, 5u);
  }
}

TEST(Sweep, MultipleAnnotatorsSumRecallAndShareCorrectPredictions) {
  const auto a = from_rows({"#...", "...."});
  const auto b = from_rows({"...#", "...."});
  const auto pred = from_rows({"#...", "...."});
  const auto s = sweep_boundaries([&](double) { return pred; }, {a, b}, {0.5}, 0.5);
  EXPECT_EQ(s.counts[0].matched_gt, 1u);
  EXPECT_EQ(s.counts[0].total_gt, 2u);
  EXPECT_EQ(s.counts[0].matched_pred, 1u);
  EXPECT_EQ(s.counts[0].total_pred, 1u);
}

TEST(Sweep, RaisingTheThresholdNeverRaisesTruePositivesBeforeThinning) {
  Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    Image prob(16, 16);
    const double cy = rng.uniform(4, 12), cx = rng.uniform(4, 12), r = rng.uniform(3, 6);
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) {
        const double d = std::hypot(y - cy, x - cx) - r;
        prob.at(y, x) = std::exp(-d * d / 2.0) * rng.uniform(0.7, 1.0);
      }
    BoundaryMap gt(16, 16);
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) gt.set(y, x, std::abs(std::hypot(y - cy, x - cx) - r) < 0.5);
    const auto s = sweep_boundaries([&](double t) { return binarize(prob, t); }, {gt}, default_thresholds(), 1.5);
    for (std::size_t k = 1; k < s.counts.size(); ++k) EXPECT_LE(s.counts[k].tp(), s.counts[k - 1].tp());
  }
}

TEST(Sweep, ThinningCanRaiseTruePositivesWithTheThreshold) {
  // A filled disk at the low threshold thins to a point; its bright rim,
  // alone at the high threshold, stays a full ring.
  Image prob(11, 11);
  BoundaryMap gt(11, 11);
  for (std::size_t y = 0; y < 11; ++y)
    for (std::size_t x = 0; x < 11; ++x) {
      const double d = std::hypot(static_cast<double>(y) - 5.0, static_cast<double>(x) - 5.0);
      if (d <= 4.5) prob.at(y, x) = 0.3;
      if (std::abs(d - 4.0) < 0.5) {
        prob.at(y, x) = 0.9;
        gt.set(y, x);
      }
    }
  const auto s = pr_sweep(prob, {gt}, {0.2, 0.8}, 1.0);
  EXPECT_LT(s.counts[0].tp(), s.counts[1].tp());
}

TEST(Sweep, ThresholdsMustBeIncreasingInsideUnitInterval) {
  const BoundaryMap gt(4, 4);
  EXPECT_THROW(pr_sweep(Image(4, 4), {gt}, {0.5, 0.4}, 1.0), Error);
  EXPECT_THROW(pr_sweep(Image(4, 4), {gt}, {0.0, 0.4}, 1.0), Error);
  EXPECT_THROW(pr_sweep(Image(4, 4), {gt}, {0.5, 1.0}, 1.0), Error);
}

TEST(Summary, HandBuiltTwoImageSet) {
  const std::vector<double> t{0.25, 0.5};
  const ImageSweep a{"a", {{4, 5, 4, 8}, {2, 5, 2, 2}}};
  const ImageSweep b{"b", {{3, 4, 3, 6}, {1, 4, 1, 1}}};
  const auto r = summarize({a, b}, t, "toy");
  // Threshold 0.25 pools P = 7/14 and R = 7/9, F = 14/23; threshold 0.5 has F = 0.5.
  EXPECT_EQ(r.ods_index, 0u);
  EXPECT_NEAR(r.ods_f, 14.0 / 23.0, 1e-15);
  // Both images peak at 0.25 (F 8/13 and 0.6), so OIS pools the same counts.
  EXPECT_NEAR(r.ois_f, 14.0 / 23.0, 1e-15);
  EXPECT_EQ(r.per_image_best[0].threshold_index, 0u);
  EXPECT_NEAR(r.per_image_best[0].f, 8.0 / 13.0, 1e-15);
  // Points (1/3, 1) and (7/9, 1/2) plus the leading (0, 1): 1/3 + (4/9)(3/4) = 2/3.
  EXPECT_NEAR(r.ap, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(r.per_threshold[1].counts.matched_gt, 3u);
  EXPECT_EQ(r.method, "toy");
}

TEST(Summary, SingleImageOisEqualsOds) {
  const auto r = summarize({{"x", {{3, 4, 3, 7}, {2, 4, 2, 3}, {1, 4, 1, 1}}}}, {0.2, 0.5, 0.8});
  EXPECT_DOUBLE_EQ(r.ois_f, r.ods_f);
}

TEST(Summary, PerfectSetScoresOne) {
  const std::vector<double> t{0.3, 0.6};
  const auto r = summarize({{"a", {{5, 5, 5, 5}, {5, 5, 5, 5}}}, {"b", {{2, 2, 2, 2}, {2, 2, 2, 2}}}}, t);
  EXPECT_EQ(r.ods_f, 1.0);
  EXPECT_EQ(r.ois_f, 1.0);
  EXPECT_EQ(r.ap, 1.0);
}

TEST(Summary, OisCanFallBelowOdsWithPooledCounts) {
  // Image a peaks at the high threshold, image b at the low one; pooling the
  // per-image optima gives F = 0.5 while the shared high threshold gives 2/3.
  const std::vector<double> t{0.3, 0.6};
  const ImageSweep a{"a", {{1, 1, 1, 3}, {1, 1, 1, 1}}};
  const ImageSweep b{"b", {{1, 1, 1, 5}, {0, 1, 0, 0}}};
  const auto r = summarize({a, b}, t);
  EXPECT_NEAR(r.ods_f, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.ois_f, 0.5, 1e-15);
}

TEST(Summary, EmptyPredictionsScoreZero) {
  const auto r = summarize({{"a", {{0, 3, 0, 0}, {0, 3, 0, 0}}}}, {0.3, 0.6});
  EXPECT_EQ(r.ods_f, 0.0);
  EXPECT_EQ(r.ap, 0.0);
  for (const auto& rec : r.per_threshold) EXPECT_EQ(rec.recall, 0.0);
}

TEST(Summary, RejectsInconsistentInput) {
  EXPECT_THROW(summarize({}, {0.5}), Error);
  EXPECT_THROW(summarize({{"a", {{0, 1, 0, 0}}}}, {0.3, 0.6}), Error);
}

TEST(BoundaryMap, ImageConversions) {
  Image img(1, 4);
  img.data = {0.0, 0.49, 0.5, 1.0};
  const auto m = boundary_from_image(img);
  EXPECT_EQ(m.on, (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_EQ(binarize(img, 0.4).count(), 3u);
  EXPECT_EQ(boundary_to_image(m).data, (std::vector<double>{0, 0, 1, 1}));
}
