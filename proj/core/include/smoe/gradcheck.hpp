#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "smoe/tensor.hpp"

namespace smoe {

struct GradcheckOptions {
  double step = 1e-5;
  double rtol = 1e-4;
  // Denominator floor for the relative error, so gradients that are
  // numerically zero are compared on an absolute scale.
  double scale_floor = 1e-3;
  // Check at most this many coordinates per point (0 = all). Coordinates are
  // taken at an even stride so the whole tensor is covered.
  std::size_t max_coords = 0;
  // One-sided slopes differing by more than this fraction of their scale
  // mark a kink within the step; the step is then halved up to
  // `kink_halvings` times. A gap that shrinks in proportion to the step is
  // curvature and is compared normally. A kink that persists is skipped when
  // the analytic value lies between the one-sided slopes.
  double kink_tol = 5e-5;
  std::size_t kink_halvings = 6;
  // At most this fraction of the checked coordinates (and at least one) may
  // be skipped as kinks before the check fails.
  double max_kink_fraction = 0.05;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_point = 0;  // index into the checked point list
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
  std::size_t kinks_skipped = 0;
  std::optional<std::size_t> non_finite_coord;  // set when f was not finite there
  bool passed = false;

  std::string summary() const;
};

using ScalarFn = std::function<Tensor()>;

// Compares the analytic gradient of f() with respect to every tensor in
// `points` against central differences. f must rebuild its graph from the
// current contents of the points on each call and return a scalar.
GradcheckReport finite_diff_gradcheck(const ScalarFn& f, std::vector<Tensor> points,
                                      GradcheckOptions options = {});

// Single-point convenience form: f receives the point tensor.
GradcheckReport finite_diff_gradcheck(const std::function<Tensor(const Tensor&)>& f, Tensor point,
                                      GradcheckOptions options = {});

}  // namespace smoe
