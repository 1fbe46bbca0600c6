#pragma once

#include <vector>

#include "smoe/image.hpp"
#include "smoe/unet.hpp"

namespace smoe {

enum class OutputHead {
  fuzzy,  // sigmoid of the TSK head output
  unet    // sigmoid of the main head logits
};

// Boundary probability map with the input's height and width, computed
// without recording a graph.
Image edge_probability(const Model& model, const Image& image, OutputHead head = OutputHead::fuzzy);

// One map per image; images may differ in size.
std::vector<Image> edge_probabilities(const Model& model, const std::vector<Image>& images,
                                      OutputHead head = OutputHead::fuzzy);

}  // namespace smoe
