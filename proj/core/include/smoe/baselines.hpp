#pragma once

#include <cstddef>
#include <vector>

#include "smoe/evaluator.hpp"
#include "smoe/image.hpp"

namespace smoe {

// Hysteresis runs with low = kCannyLowRatio * high during threshold sweeps.
inline constexpr double kCannyLowRatio = 0.4;

// Gaussian smoothing with a kernel truncated at ceil(3 sigma) and replicate
// borders. sigma <= 0 returns the (luma) image unchanged.
Image gaussian_blur(const Image& image, double sigma);

// Gradient magnitude after non-maximum suppression, divided by the image's
// peak magnitude. Directions are quantised into four sectors; a pixel
// survives when it is strictly above its neighbour on the negative side of
// the gradient axis and at least equal to the one on the positive side
// (x to the right, y upwards), so a symmetric ridge keeps exactly one pixel.
struct CannyResponse {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> suppressed;
};
CannyResponse canny_response(const Image& image, double sigma);

// Pixels >= high seed 8-connected growth through pixels >= low.
BoundaryMap hysteresis(const CannyResponse& response, double low, double high);

// Requires 0 < low < high <= 1.
BoundaryMap canny(const Image& image, double sigma, double low, double high);

// Thinned set of pixels whose normalised Sobel magnitude is >= threshold.
BoundaryMap sobel_baseline(const Image& image, double threshold);

}  // namespace smoe
