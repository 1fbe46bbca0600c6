#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "smoe/evaluator.hpp"
#include "smoe/image.hpp"

namespace smoe {

// One evaluation image with its annotator boundary maps.
struct EvalSample {
  std::string id;
  Image image;
  std::vector<BoundaryMap> gts;
};

struct EvalOptions {
  std::vector<double> thresholds = default_thresholds();
  // Matching radius in pixels; 0 selects default_tolerance() per image.
  double tolerance_px = 0.0;
  // Worker cap; 0 defers to SMOE_THREADS / hardware concurrency.
  std::size_t threads = 0;

  double tolerance_for(std::size_t height, std::size_t width) const;
};

std::vector<double> default_canny_sigmas();

// Images from `image_dir` (may be empty to load ground truth only) paired
// with `<gt_dir>/<stem>_<k>.png` annotator maps. Stems come from `stem_dir`.
// Throws DataError when a stem has no ground truth or no image.
std::vector<EvalSample> load_eval_set(const std::filesystem::path& stem_dir, const std::filesystem::path& image_dir,
                                      const std::filesystem::path& gt_dir);

// `probs[i]` is the boundary probability map for `samples[i]`.
EvalReport evaluate_probability_maps(const std::vector<EvalSample>& samples, const std::vector<Image>& probs,
                                     const EvalOptions& options, std::string method = "pred");
// Sweeps the threshold of sobel_baseline().
EvalReport evaluate_sobel(const std::vector<EvalSample>& samples, const EvalOptions& options);
// Sweeps the high threshold (low = kCannyLowRatio * high) for each sigma and
// returns the report of the sigma with the best ODS (first on ties).
EvalReport evaluate_canny(const std::vector<EvalSample>& samples, const EvalOptions& options,
                          const std::vector<double>& sigmas = default_canny_sigmas());

}  // namespace smoe
