#pragma once

#include <string>
#include <vector>

#include "smoe/random.hpp"
#include "smoe/tensor.hpp"

namespace smoe {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

// Convolution weights [Cout, Cin, k, k] plus bias [Cout].
struct ConvParams {
  Tensor weight;
  Tensor bias;

  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t kernel() const { return weight.dim(2); }
  std::size_t numel() const { return weight.numel() + bias.numel(); }

  // He-uniform weights (bound sqrt(6 / fan_in)), zero bias.
  static ConvParams he_uniform(std::size_t cout, std::size_t cin, std::size_t k, Rng& rng);
  static ConvParams zeros(std::size_t cout, std::size_t cin, std::size_t k);
};

void append_params(std::vector<NamedParam>& out, const std::string& prefix, const ConvParams& conv);

Tensor apply_conv(const Tensor& x, const ConvParams& conv, Conv2dOptions options = {});


}  // namespace smoe
