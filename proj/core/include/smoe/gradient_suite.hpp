#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "smoe/gradcheck.hpp"

namespace smoe {

struct SuiteCase {
  std::string name;
  std::uint64_t seed = 0;
  GradcheckReport report;
};

struct SuiteOptions {
  std::uint64_t first_seed = 0;
  std::size_t seeds = 20;
  GradcheckOptions check;
  // Coordinates checked per parameter tensor in the end-to-end model cases
  // (evenly strided); 0 checks all of them.
  std::size_t model_coords_per_tensor = 64;
};

// Names of the cases run for every seed: each primitive op (and its
// variants), the sMoE block, the TSK head, every loss and the end-to-end
// depth-2 model on an 8×8 input.
std::vector<std::string> gradient_suite_case_names();

// Runs every case for seeds first_seed .. first_seed + seeds - 1. `progress`
// is called after each case.
std::vector<SuiteCase> run_gradient_suite(const SuiteOptions& options,
                                          const std::function<void(const SuiteCase&)>& progress = {});

}  // namespace smoe
