#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "smoe/layers.hpp"
#include "smoe/tensor.hpp"

namespace smoe {

// Spatially-adaptive mixture of two experts on one skip connection:
//   y = G(E) * boundary(x) + (1 - G(E)) * context(x)
// with G a sigmoid of a 1x1 convolution of the guidance map E.
struct SmoeParams {
  ConvParams gate;      // 1 -> 1, 1x1
  ConvParams context;   // C -> C, 3x3, dilation 2, padding 2
  ConvParams boundary;  // C -> C, 1x1

  std::size_t channels() const { return context.out_channels(); }
  std::size_t numel() const { return gate.numel() + context.numel() + boundary.numel(); }

  // He-uniform expert and gate weights; every bias (including the gate's) is 0.
  static SmoeParams init(std::size_t channels, Rng& rng);
};

void append_params(std::vector<NamedParam>& out, const std::string& prefix, const SmoeParams& params);

struct GateMap {
  Tensor values;  // [N,1,H,W], in (0,1)
  std::size_t level = 0;
};

struct SmoeOutput {
  Tensor y;
  GateMap gate;
};

Tensor expert_context(const Tensor& x, const SmoeParams& params);
Tensor expert_boundary(const Tensor& x, const SmoeParams& params);
Tensor gate_network(const Tensor& guidance, const SmoeParams& params);

// `guidance` is [N,1,H,W] at the spatial size of `x`.
SmoeOutput smoe_forward(const Tensor& x, const Tensor& guidance, const SmoeParams& params, std::size_t level = 0);

}  // namespace smoe
