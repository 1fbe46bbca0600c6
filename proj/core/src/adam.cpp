#include "smoe/adam.hpp"

#include <cmath>

namespace smoe {

void AdamState::reset(const std::vector<NamedParam>& params) {
  step = 0;
  m.clear();
  v.clear();
  for (const auto& p : params) {
    m.emplace_back(p.tensor.numel(), 0.0);
    v.emplace_back(p.tensor.numel(), 0.0);
  }
}

bool AdamState::matches(const std::vector<NamedParam>& params) const {
  if (m.size() != params.size() || v.size() != params.size()) return false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (m[i].size() != params[i].tensor.numel() || v[i].size() != params[i].tensor.numel()) return false;
  }
  return true;
}

void adam_step(const std::vector<NamedParam>& params, AdamState& state, const std::function<void()>& post_step) {
  if (!state.matches(params)) throw Error("Adam state does not match the parameter list");
  for (const auto& p : params) {
    if (p.tensor.has_grad() && !all_finite(p.tensor.grad())) {
      throw NumericError("non-finite gradient in parameter " + p.name + "; step aborted");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor param = params[i].tensor;
    if (!param.has_grad()) continue;
    auto g = param.grad();
    auto x = param.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < x.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      x[k] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
  if (post_step) post_step();
}

void zero_grads(const std::vector<NamedParam>& params) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

}  // namespace smoe
