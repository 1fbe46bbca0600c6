#include "smoe/losses.hpp"

#include <cmath>

namespace smoe {

void LossConfig::validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0 || lambda > 1.0) throw Error("loss lambda must lie in [0,1]");
  if (!std::isfinite(dice_eps) || dice_eps <= 0.0) throw Error("dice_eps must be positive");
  if (!std::isfinite(distill_weight) || distill_weight < 0.0) throw Error("distill_weight must be >= 0");
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

double sigmoid_scalar(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Tensor bce_with_logits(const Tensor& logits, const Tensor& target) {
  require_same_shape(logits, target, "bce_with_logits");
  const auto z = logits.data(), t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!(t[i] >= 0.0 && t[i] <= 1.0)) throw DataError("bce_with_logits: target outside [0,1]");
    acc += std::max(z[i], 0.0) - z[i] * t[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  const double n = static_cast<double>(z.size());
  return make_result({}, {acc / n}, {logits, target}, [logits, target, n](std::span<const double> g, ParentGrads& pg) {
    const auto z = logits.data(), t = target.data();
    const double scale = g[0] / n;
    if (pg[0]) {
      auto& gz = *pg[0];
      for (std::size_t i = 0; i < z.size(); ++i) gz[i] += scale * (sigmoid_scalar(z[i]) - t[i]);
    }
    if (pg[1]) {
      // d/dt = -z / n (log-sum-exp form is linear in t)
      auto& gt = *pg[1];
      for (std::size_t i = 0; i < z.size(); ++i) gt[i] -= scale * z[i];
    }
  });
}

Tensor dice_loss(const Tensor& probs, const Tensor& target, double eps) {
  require_same_shape(probs, target, "dice_loss");
  Tensor inter = sum(mul(probs, target));
  Tensor numer = add_scalar(scale(inter, 2.0), eps);
  Tensor denom = add_scalar(add(sum(probs), sum(target)), eps);
  return sub(Tensor::scalar(1.0), div(numer, denom));
}

Tensor composite_loss(const Tensor& logits, const Tensor& bce_target, const Tensor& dice_target,
                      const LossConfig& cfg) {
  cfg.validate();
  Tensor bce = bce_with_logits(logits, bce_target);
  Tensor dice = dice_loss(sigmoid(logits), dice_target, cfg.dice_eps);
  return add(scale(bce, cfg.lambda), scale(dice, 1.0 - cfg.lambda));
}

Tensor distill_mse(const Tensor& tsk_output, const Tensor& unet_logits) {
  require_same_shape(tsk_output, unet_logits, "distill_mse");
  return mean(square(sub(tsk_output, unet_logits.detach())));
}

Tensor binarize_target(const Tensor& target, double threshold) {
  std::vector<double> out(target.numel());
  const auto t = target.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t[i] >= threshold ? 1.0 : 0.0;
  return Tensor::from_data(target.shape(), std::move(out));
}

}  // namespace smoe
