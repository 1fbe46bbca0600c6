#include "smoe/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace smoe {

std::string GradcheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "pass" : "FAIL") << " max_rel_error=" << max_rel_error << " coords=" << coords_checked;
  if (kinks_skipped) os << " kinks=" << kinks_skipped;
  if (non_finite_coord) {
    os << " non-finite f at point " << worst_point << " coord " << *non_finite_coord;
  } else if (coords_checked) {
    os << " worst(point " << worst_point << ", coord " << worst_coord << ": analytic " << worst_analytic
       << ", numeric " << worst_numeric << ")";
  }
  return os.str();
}

GradcheckReport finite_diff_gradcheck(const ScalarFn& f, std::vector<Tensor> points, GradcheckOptions opt) {
  if (opt.step <= 0.0) throw Error("gradcheck step must be positive");
  GradcheckReport report;
  for (auto& p : points) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  Tensor loss = f();
  if (loss.numel() != 1) throw ShapeError("gradcheck function must return a scalar, got " + shape_str(loss.shape()));
  if (!std::isfinite(loss.item())) {
    report.non_finite_coord = 0;
    return report;
  }
  const double f0 = loss.item();
  backward(loss);

  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    Tensor& p = points[pi];
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    auto values = p.mutable_data();
    const std::size_t n = values.size();
    const std::size_t stride = (opt.max_coords == 0 || n <= opt.max_coords) ? 1 : (n + opt.max_coords - 1) / opt.max_coords;
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = values[i];
      values[i] = orig + opt.step;
      const double fp = f().item();
      values[i] = orig - opt.step;
      const double fm = f().item();
      values[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        report.worst_point = pi;
        report.non_finite_coord = i;
        report.passed = false;
        return report;
      }
      double numeric = (fp - fm) / (2.0 * opt.step);
      const double a = analytic[i];
      ++report.coords_checked;
      // One-sided slopes that disagree mean a kink (a ReLU or max-pool
      // switch) or strong curvature within the step. The step is halved until
      // they agree. A gap that halves along with the step twice in a row is
      // curvature: a single kink cannot do that, since the second halving
      // would leave it outside the window. A kink that survives every halving
      // is skipped when the analytic value lies between the slopes.
      double h = opt.step, ahead = (fp - f0) / h, behind = (f0 - fm) / h;
      double slope_scale = std::max({std::abs(ahead), std::abs(behind), opt.scale_floor});
      double gap = std::abs(ahead - behind);
      bool kink = gap > opt.kink_tol * slope_scale;
      std::size_t halving_streak = 0;
      for (std::size_t k = 0; kink && k < opt.kink_halvings; ++k) {
        h *= 0.5;
        values[i] = orig + h;
        const double fph = f().item();
        values[i] = orig - h;
        const double fmh = f().item();
        values[i] = orig;
        ahead = (fph - f0) / h;
        behind = (f0 - fmh) / h;
        slope_scale = std::max({std::abs(ahead), std::abs(behind), opt.scale_floor});
        const double next_gap = std::abs(ahead - behind);
        const double ratio = next_gap / gap;
        halving_streak = ratio > 0.4 && ratio < 0.6 ? halving_streak + 1 : 0;
        gap = next_gap;
        kink = gap > opt.kink_tol * slope_scale && halving_streak < 2;
        numeric = (fph - fmh) / (2.0 * h);
      }
      if (kink) {
        const double slack = opt.rtol * slope_scale;
        if (a >= std::min(ahead, behind) - slack && a <= std::max(ahead, behind) + slack) {
          ++report.kinks_skipped;
          continue;
        }
      }
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.scale_floor});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_error || report.coords_checked == 1) {
        report.max_rel_error = std::max(rel, report.max_rel_error);
        if (rel >= report.max_rel_error) {
          report.worst_point = pi;
          report.worst_coord = i;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  const double kink_budget =
      std::max(1.0, opt.max_kink_fraction * static_cast<double>(report.coords_checked));
  report.passed = report.max_rel_error < opt.rtol && static_cast<double>(report.kinks_skipped) <= kink_budget;
  return report;
}

GradcheckReport finite_diff_gradcheck(const std::function<Tensor(const Tensor&)>& f, Tensor point,
                                      GradcheckOptions options) {
  Tensor p = point;
  return finite_diff_gradcheck([&f, p]() { return f(p); }, std::vector<Tensor>{point}, options);
}

}  // namespace smoe
