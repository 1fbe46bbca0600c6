#include "smoe/eval_suite.hpp"

#include <functional>
#include <memory>
#include <sstream>

#include "smoe/baselines.hpp"
#include "smoe/dataset.hpp"
#include "smoe/errors.hpp"
#include "smoe/parallel.hpp"

namespace smoe {

double EvalOptions::tolerance_for(std::size_t height, std::size_t width) const {
  return tolerance_px > 0.0 ? tolerance_px : default_tolerance(height, width);
}

std::vector<double> default_canny_sigmas() { return {1.0, 1.5, 2.0, 2.5, 3.0}; }

std::vector<EvalSample> load_eval_set(const std::filesystem::path& stem_dir, const std::filesystem::path& image_dir,
                                      const std::filesystem::path& gt_dir) {
  if (!std::filesystem::is_directory(gt_dir)) throw DataError("ground-truth directory not found: " + gt_dir.string());
  const auto stems = png_stems(stem_dir);
  if (stems.empty()) throw DataError("no PNG files in " + stem_dir.string());
  std::vector<EvalSample> samples;
  for (const auto& stem : stems) {
    EvalSample s;
    s.id = stem;
    if (!image_dir.empty()) {
      const auto path = image_dir / (stem + ".png");
      if (!std::filesystem::exists(path)) throw DataError("no image for '" + stem + "' in " + image_dir.string());
      s.image = read_png(path);
    }
    for (const auto& map : load_annotator_maps(gt_dir, stem)) {
      if (!s.image.empty() && (map.height != s.image.height || map.width != s.image.width)) {
        throw DataError("ground truth for '" + stem + "' does not match its image size");
      }
      s.gts.push_back(boundary_from_image(map));
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

namespace {

EvalReport run_sweeps(const std::vector<EvalSample>& samples, const EvalOptions& options, const std::string& method,
                      const std::function<BoundaryAtThreshold(std::size_t)>& make_boundary) {
  if (samples.empty()) throw DataError("evaluation set is empty");
  std::vector<ImageSweep> sweeps(samples.size());
  parallel_for(
      samples.size(),
      [&](std::size_t i) {
        const auto& s = samples[i];
        if (s.gts.empty()) throw DataError("no ground truth for '" + s.id + "'");
        sweeps[i] = sweep_boundaries(make_boundary(i), s.gts, options.thresholds,
                                     options.tolerance_for(s.gts[0].height, s.gts[0].width));
        sweeps[i].id = s.id;
      },
      options.threads);
  return summarize(sweeps, options.thresholds, method);
}

}  // namespace

EvalReport evaluate_probability_maps(const std::vector<EvalSample>& samples, const std::vector<Image>& probs,
                                     const EvalOptions& options, std::string method) {
  if (probs.size() != samples.size()) throw DataError("one probability map per sample is required");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (const auto& gt : samples[i].gts) {
      if (gt.height != probs[i].height || gt.width != probs[i].width) {
        throw DataError("prediction for '" + samples[i].id + "' does not match its ground-truth size");
      }
    }
  }
  return run_sweeps(samples, options, method, [&](std::size_t i) -> BoundaryAtThreshold {
    auto gray = std::make_shared<Image>(to_luma(probs[i]));
    return [gray](double t) { return thin(binarize(*gray, t)); };
  });
}

EvalReport evaluate_sobel(const std::vector<EvalSample>& samples, const EvalOptions& options) {
  return run_sweeps(samples, options, "sobel", [&](std::size_t i) -> BoundaryAtThreshold {
    const Image* image = &samples[i].image;
    return [image](double t) { return sobel_baseline(*image, t); };
  });
}

EvalReport evaluate_canny(const std::vector<EvalSample>& samples, const EvalOptions& options,
                          const std::vector<double>& sigmas) {
  if (sigmas.empty()) throw Error("evaluate_canny needs at least one sigma");
  EvalReport best;
  bool have_best = false;
  for (double sigma : sigmas) {
    std::ostringstream name;
    name << "canny(sigma=" << sigma << ")";
    auto report = run_sweeps(samples, options, name.str(), [&](std::size_t i) -> BoundaryAtThreshold {
      auto response = std::make_shared<CannyResponse>(canny_response(samples[i].image, sigma));
      return [response](double t) { return thin(hysteresis(*response, kCannyLowRatio * t, t)); };
    });
    if (!have_best || report.ods_f > best.ods_f) {
      best = std::move(report);
      have_best = true;
    }
  }
  return best;
}

}  // namespace smoe
