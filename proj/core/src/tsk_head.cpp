#include "smoe/tsk_head.hpp"

#include <algorithm>
#include <cmath>

namespace smoe {

namespace {

Tensor rule_tensor(std::vector<double> values) {
  const auto r = values.size();
  return Tensor::from_data({1, r, 1, 1}, std::move(values), true);
}

}  // namespace

FuzzyRuleParams FuzzyRuleParams::init(std::size_t rules, Rng& rng) {
  if (rules == 0) throw Error("the rule base needs at least one rule");
  static constexpr std::array<std::array<double, 2>, 4> kQuadrants{{{1.0, 1.0}, {0.0, 1.0}, {0.0, 0.0}, {1.0, 0.0}}};
  std::vector<std::array<double, 7>> rows(rules);
  for (std::size_t i = 0; i < rules; ++i) {
    double c1, c2;
    if (i < kQuadrants.size()) {
      c1 = kQuadrants[i][0];
      c2 = kQuadrants[i][1];
    } else {
      c1 = rng.uniform();
      c2 = rng.uniform();
    }
    rows[i] = {c1, c2, 0.25, 0.25, 0.0, 0.0, 0.0};
  }
  return from_rows(rows);
}

FuzzyRuleParams FuzzyRuleParams::from_rows(const std::vector<std::array<double, 7>>& rows) {
  if (rows.empty()) throw Error("the rule base needs at least one rule");
  FuzzyRuleParams p;
  for (std::size_t k = 0; k < 7; ++k) {
    std::vector<double> col(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) col[i] = rows[i][k];
    if (k < 2) p.center[k] = rule_tensor(std::move(col));
    else if (k < 4) p.width[k - 2] = rule_tensor(std::move(col));
    else p.consequent[k - 4] = rule_tensor(std::move(col));
  }
  return p;
}

std::vector<std::array<double, 7>> FuzzyRuleParams::rows() const {
  std::vector<std::array<double, 7>> out(rules());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {c(i, 0), c(i, 1), sigma(i, 0), sigma(i, 1), a(i, 0), a(i, 1), a(i, 2)};
  }
  return out;
}

FuzzyRuleParams FuzzyRuleParams::permuted(const std::vector<std::size_t>& order) const {
  auto src = rows();
  if (order.size() != src.size()) throw Error("permutation size does not match the rule count");
  std::vector<std::array<double, 7>> dst(src.size());
  for (std::size_t i = 0; i < order.size(); ++i) dst[i] = src.at(order[i]);
  return from_rows(dst);
}

FuzzyRuleParams FuzzyRuleParams::clone() const { return from_rows(rows()); }

void FuzzyRuleParams::clamp_widths(double sigma_min) {
  for (auto& w : width) {
    for (double& v : w.mutable_data()) v = std::max(v, sigma_min);
  }
}

void append_params(std::vector<NamedParam>& out, const std::string& prefix, const FuzzyRuleParams& params) {
  out.push_back({prefix + ".center_x1", params.center[0]});
  out.push_back({prefix + ".center_x2", params.center[1]});
  out.push_back({prefix + ".width_x1", params.width[0]});
  out.push_back({prefix + ".width_x2", params.width[1]});
  out.push_back({prefix + ".consequent_a0", params.consequent[0]});
  out.push_back({prefix + ".consequent_a1", params.consequent[1]});
  out.push_back({prefix + ".consequent_a2", params.consequent[2]});
}

double membership(double x, double c, double sigma) {
  const double d = x - c;
  return std::exp(-(d * d) / (2.0 * (sigma * sigma)));
}

std::vector<double> firing_strengths(double x1, double x2, const FuzzyRuleParams& params) {
  std::vector<double> w(params.rules());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = membership(x1, params.c(i, 0), params.sigma(i, 0)) * membership(x2, params.c(i, 1), params.sigma(i, 1));
  }
  return w;
}

std::vector<double> normalized_firing(const std::vector<double>& w, double eps) {
  std::vector<double> sorted = w;
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (double v : sorted) total += v;
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] / (total + eps);
  return out;
}

double tsk_scalar(double x1, double x2, const FuzzyRuleParams& params) {
  auto w = firing_strengths(x1, x2, params);
  std::vector<double> terms(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    terms[i] = w[i] * (params.a(i, 0) + params.a(i, 1) * x1 + params.a(i, 2) * x2);
  }
  // Sorted sums make the result independent of rule order.
  std::sort(terms.begin(), terms.end());
  std::sort(w.begin(), w.end());
  double num = 0.0, den = 0.0;
  for (double t : terms) num += t;
  for (double v : w) den += v;
  return num / (den + kDefuzzEps);
}

TskOutput tsk_forward(const Tensor& x1, const Tensor& x2, const FuzzyRuleParams& params) {
  if (x1.rank() != 4 || x1.shape() != x2.shape() || x1.dim(1) != 1) {
    throw ShapeError("tsk_forward: inputs must be matching [N,1,H,W] maps, got " + shape_str(x1.shape()) + " and " +
                     shape_str(x2.shape()));
  }
  auto member = [](const Tensor& x, const Tensor& c, const Tensor& sigma) {
    Tensor z = div(square(sub(x, c)), scale(square(sigma), 2.0));
    return exp(neg(z));
  };
  Tensor w = mul(member(x1, params.center[0], params.width[0]), member(x2, params.center[1], params.width[1]));
  Tensor rule_out = add(add(params.consequent[0], mul(params.consequent[1], x1)), mul(params.consequent[2], x2));
  Tensor num = sum_channels(mul(w, rule_out), true);
  Tensor den = add_scalar(sum_channels(w, true), kDefuzzEps);
  return {div(num, den), w};
}

}  // namespace smoe
