#pragma once

#include "smoe/tensor.hpp"

namespace smoe {

struct LossConfig {
  double lambda = 0.5;          // BCE weight in the composite loss
  double dice_eps = 1.0;
  double distill_weight = 1.0;  // weight of the fuzzy-head MSE term

  void validate() const;
};

// Mean over pixels of -[t log s(z) + (1-t) log(1-s(z))], evaluated as
// max(z,0) - z t + log1p(exp(-|z|)). Targets must lie in [0,1].
Tensor bce_with_logits(const Tensor& logits, const Tensor& target);

// 1 - (2 sum(p t) + eps) / (sum p + sum t + eps), summed over the whole batch.
Tensor dice_loss(const Tensor& probs, const Tensor& target, double eps = 1.0);

// lambda * BCE(logits, bce_target) + (1 - lambda) * Dice(sigmoid(logits), dice_target)
Tensor composite_loss(const Tensor& logits, const Tensor& bce_target, const Tensor& dice_target,
                      const LossConfig& cfg);
inline Tensor composite_loss(const Tensor& logits, const Tensor& target, const LossConfig& cfg) {
  return composite_loss(logits, target, target, cfg);
}

// Mean squared difference against the detached main-head logits.
Tensor distill_mse(const Tensor& tsk_output, const Tensor& unet_logits);

// Values >= 0.5 become 1, everything else 0.
Tensor binarize_target(const Tensor& target, double threshold = 0.5);

}  // namespace smoe
