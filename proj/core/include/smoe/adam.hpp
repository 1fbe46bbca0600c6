#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "smoe/layers.hpp"

namespace smoe {

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m, v;  // mirror the parameter list

  // Allocates zero moments matching `params`.
  void reset(const std::vector<NamedParam>& params);
  bool matches(const std::vector<NamedParam>& params) const;
};

// One bias-corrected Adam update over `params` using their accumulated
// gradients (a missing gradient counts as zero). All gradients are checked
// before anything is modified; a non-finite one aborts the step with a
// NumericError naming the parameter. `post_step` runs after the update.
void adam_step(const std::vector<NamedParam>& params, AdamState& state,
               const std::function<void()>& post_step = {});

void zero_grads(const std::vector<NamedParam>& params);

}  // namespace smoe
