#pragma once

#include <cstddef>
#include <vector>

#include "smoe/image.hpp"
#include "smoe/tensor.hpp"

namespace smoe {

// Normalised gradient-magnitude map in [0,1]. This is the guidance signal
// fed to every sMoE gate and the x1 input of the fuzzy head.
struct GuidanceMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  bool operator==(const GuidanceMap&) const = default;
};

struct SobelResponse {
  std::vector<double> gx, gy, magnitude;  // unnormalised
};

// Raw 3×3 Sobel responses with replicate border padding. Multi-channel images
// are converted to luma first.
SobelResponse sobel_response(const Image& image);

// sqrt(gx²+gy²) divided by the per-image maximum; all zeros when that
// maximum is below 1e-12.
GuidanceMap sobel_magnitude(const Image& image);

// Bilinear resampling with half-pixel centres (align_corners = false).
GuidanceMap resize_bilinear(const GuidanceMap& map, std::size_t out_h, std::size_t out_w);

// Stacks maps of identical size into a constant [N,1,H,W] tensor.
Tensor guidance_tensor(const std::vector<GuidanceMap>& maps);
GuidanceMap guidance_from_tensor(const Tensor& t, std::size_t batch_index);

}  // namespace smoe
