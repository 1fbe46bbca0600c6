#include "smoe/inference.hpp"

#include <cmath>

#include "smoe/tensor.hpp"

namespace smoe {

Image edge_probability(const Model& model, const Image& image, OutputHead head) {
  NoGradGuard no_grad;
  const ForwardBundle out = forward(model, image);
  const Tensor& z = head == OutputHead::fuzzy ? out.tsk_output : out.logits;
  Image prob(image.height, image.width, 1);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) prob.at(y, x) = 1.0 / (1.0 + std::exp(-z.at(0, 0, y, x)));
  }
  return prob;
}

std::vector<Image> edge_probabilities(const Model& model, const std::vector<Image>& images, OutputHead head) {
  std::vector<Image> maps;
  maps.reserve(images.size());
  for (const auto& img : images) maps.push_back(edge_probability(model, img, head));
  return maps;
}

}  // namespace smoe
