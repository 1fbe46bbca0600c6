#include "smoe/layers.hpp"

#include <cmath>

namespace smoe {

ConvParams ConvParams::he_uniform(std::size_t cout, std::size_t cin, std::size_t k, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(cin * k * k));
  std::vector<double> w(cout * cin * k * k);
  for (double& v : w) v = rng.uniform(-bound, bound);
  return {Tensor::from_data({cout, cin, k, k}, std::move(w), true), Tensor::zeros({cout}, true)};
}

ConvParams ConvParams::zeros(std::size_t cout, std::size_t cin, std::size_t k) {
  return {Tensor::zeros({cout, cin, k, k}, true), Tensor::zeros({cout}, true)};
}

void append_params(std::vector<NamedParam>& out, const std::string& prefix, const ConvParams& conv) {
  out.push_back({prefix + ".weight", conv.weight});
  out.push_back({prefix + ".bias", conv.bias});
}

Tensor apply_conv(const Tensor& x, const ConvParams& conv, Conv2dOptions options) {
  return conv2d(x, conv.weight, conv.bias, options);
}

}  // namespace smoe
