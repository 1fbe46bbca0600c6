#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "smoe/image.hpp"

namespace smoe {

// H×W boolean boundary map plus where it came from.
struct BoundaryMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> on;  // 0 or 1, row-major
  std::string method;
  double threshold = 0.0;

  BoundaryMap() = default;
  BoundaryMap(std::size_t h, std::size_t w) : height(h), width(w), on(h * w, 0) {}

  bool at(std::size_t y, std::size_t x) const { return on[y * width + x] != 0; }
  void set(std::size_t y, std::size_t x, bool v = true) { on[y * width + x] = v ? 1 : 0; }
  std::size_t count() const;
  bool same_pixels(const BoundaryMap& other) const {
    return height == other.height && width == other.width && on == other.on;
  }
};

// Pixels with value >= threshold. Multi-channel images are converted to luma.
BoundaryMap binarize(const Image& prob, double threshold);
// Pixels with value >= 0.5; the usual way to ingest an annotator PNG.
BoundaryMap boundary_from_image(const Image& image);
Image boundary_to_image(const BoundaryMap& map);

// Two-subiteration parallel thinning (the Guo-Hall rules, as in MATLAB's
// bwmorph 'thin') repeated to a fixpoint, followed by removal of simple
// pixels from any remaining 2×2 block. The frame is mirror-padded. Preserves
// 8-connectivity; a 2×2 block survives only where every one of its pixels is
// needed for connectivity.
BoundaryMap thin(const BoundaryMap& binary);

struct MatchCounts {
  std::size_t tp = 0;  // matched pairs
  std::size_t fp = 0;  // unmatched prediction pixels
  std::size_t fn = 0;  // unmatched ground-truth pixels
  bool operator==(const MatchCounts&) const = default;
};

enum class MatchStrategy {
  // Distance-sorted greedy pass only. Can fall short of the maximum matching
  // once the tolerance admits competing pairs at distance >= 1.
  greedy,
  // Greedy pass followed by augmenting-path repair; always reaches the
  // maximum number of matched pairs.
  greedy_repaired,
};

struct MatchResult {
  MatchCounts counts;
  std::vector<std::uint8_t> pred_matched;  // per pixel, row-major
  std::vector<std::uint8_t> gt_matched;
};

// One-to-one matching of prediction pixels to ground-truth pixels within
// Euclidean distance tol_px. Candidate pairs are visited by distance, then
// prediction index, then ground-truth index (row-major).
MatchResult match_boundaries_detailed(const BoundaryMap& pred, const BoundaryMap& gt, double tol_px,
                                      MatchStrategy strategy = MatchStrategy::greedy_repaired);
MatchCounts match_boundaries(const BoundaryMap& pred, const BoundaryMap& gt, double tol_px,
                             MatchStrategy strategy = MatchStrategy::greedy_repaired);

// Multi-annotator counts at one threshold. Recall counts matches against every
// annotator separately and sums them; a prediction pixel counts as correct
// when at least one annotator matches it.
struct SweepCounts {
  std::size_t matched_gt = 0;
  std::size_t total_gt = 0;
  std::size_t matched_pred = 0;
  std::size_t total_pred = 0;

  std::size_t tp() const { return matched_gt; }
  std::size_t fp() const { return total_pred - matched_pred; }
  std::size_t fn() const { return total_gt - matched_gt; }
  // 0 when the denominator is 0.
  double precision() const;
  double recall() const;
  double f() const;

  SweepCounts& operator+=(const SweepCounts& o);
  bool operator==(const SweepCounts&) const = default;
};

double f_measure(double precision, double recall);

// n thresholds evenly spaced strictly inside (0,1): k/(n+1) for k = 1..n.
std::vector<double> default_thresholds(std::size_t n = 33);
// 0.0075 of the image diagonal.
double default_tolerance(std::size_t height, std::size_t width);

struct ImageSweep {
  std::string id;
  std::vector<SweepCounts> counts;  // one entry per threshold
};

// Produces the (already thinned) boundary map for one threshold.
using BoundaryAtThreshold = std::function<BoundaryMap(double threshold)>;

ImageSweep sweep_boundaries(const BoundaryAtThreshold& boundary_at, const std::vector<BoundaryMap>& gts,
                            const std::vector<double>& thresholds, double tol_px);

// Binarize at each threshold, thin, and match against every annotator map.
// Thresholds must be strictly increasing inside (0,1).
ImageSweep pr_sweep(const Image& prob, const std::vector<BoundaryMap>& gts, const std::vector<double>& thresholds,
                    double tol_px);

struct ThresholdRecord {
  double threshold = 0.0;
  SweepCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

struct ImageBest {
  std::string id;
  std::size_t threshold_index = 0;
  double threshold = 0.0;
  SweepCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

struct EvalReport {
  std::string method;
  std::vector<double> thresholds;
  std::vector<ThresholdRecord> per_threshold;     // counts aggregated over images
  std::vector<ImageSweep> per_image;              // raw counts, for reproducing the summary
  std::vector<ImageBest> per_image_best;
  std::size_t ods_index = 0;
  double ods_threshold = 0.0;
  double ods_f = 0.0;
  double ois_f = 0.0;
  double ap = 0.0;
};

// ODS: best F of the dataset-aggregated counts over one shared threshold.
// OIS: F of the counts aggregated after taking each image's best threshold.
// AP: trapezoidal area under the recall-sorted precision/recall points, with
// a leading point at recall 0 carrying the precision of the lowest-recall
// point. Thresholds at which nothing was predicted have no precision and are
// left out of AP. Ties in F resolve to the lowest threshold.
EvalReport summarize(const std::vector<ImageSweep>& per_image, const std::vector<double>& thresholds,
                     std::string method = {});

}  // namespace smoe
