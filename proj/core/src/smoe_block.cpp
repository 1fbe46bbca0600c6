#include "smoe/smoe_block.hpp"

namespace smoe {

SmoeParams SmoeParams::init(std::size_t channels, Rng& rng) {
  SmoeParams p;
  p.gate = ConvParams::he_uniform(1, 1, 1, rng);
  p.context = ConvParams::he_uniform(channels, channels, 3, rng);
  p.boundary = ConvParams::he_uniform(channels, channels, 1, rng);
  return p;
}

void append_params(std::vector<NamedParam>& out, const std::string& prefix, const SmoeParams& params) {
  append_params(out, prefix + ".gate", params.gate);
  append_params(out, prefix + ".context", params.context);
  append_params(out, prefix + ".boundary", params.boundary);
}

Tensor expert_context(const Tensor& x, const SmoeParams& params) {
  return relu(apply_conv(x, params.context, {.stride = 1, .padding = 2, .dilation = 2}));
}

Tensor expert_boundary(const Tensor& x, const SmoeParams& params) { return relu(apply_conv(x, params.boundary)); }

Tensor gate_network(const Tensor& guidance, const SmoeParams& params) {
  return sigmoid(apply_conv(guidance, params.gate));
}

SmoeOutput smoe_forward(const Tensor& x, const Tensor& guidance, const SmoeParams& params, std::size_t level) {
  if (x.rank() != 4 || guidance.rank() != 4 || guidance.dim(1) != 1 || x.dim(0) != guidance.dim(0) ||
      x.dim(2) != guidance.dim(2) || x.dim(3) != guidance.dim(3)) {
    throw ShapeError("smoe_forward: guidance " + shape_str(guidance.shape()) + " does not match features " +
                     shape_str(x.shape()) + " (resize the guidance first)");
  }
  Tensor gate = gate_network(guidance, params);
  Tensor sharp = expert_boundary(x, params);
  Tensor smooth = expert_context(x, params);
  // Two products, so gate 0 or 1 reproduces one expert bit-exactly.
  Tensor one_minus = sub(Tensor::scalar(1.0), gate);
  Tensor y = add(mul(gate, sharp), mul(one_minus, smooth));
  return {y, GateMap{gate, level}};
}

}  // namespace smoe
