#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "smoe/layers.hpp"
#include "smoe/tensor.hpp"

namespace smoe {

inline constexpr double kSigmaMin = 1e-3;
inline constexpr double kDefuzzEps = 1e-9;

// First-order TSK rule base over two inputs (x1 = edge strength, x2 =
// semantic confidence):
//   rule i: IF x1 is A_i1 AND x2 is A_i2 THEN y_i = a_i0 + a_i1 x1 + a_i2 x2
// Every field is a [1,R,1,1] tensor so it broadcasts over NCHW maps.
struct FuzzyRuleParams {
  std::array<Tensor, 2> center;
  std::array<Tensor, 2> width;
  std::array<Tensor, 3> consequent;

  std::size_t rules() const { return center[0].numel(); }

  double c(std::size_t rule, std::size_t input) const { return center[input].data()[rule]; }
  double sigma(std::size_t rule, std::size_t input) const { return width[input].data()[rule]; }
  double a(std::size_t rule, std::size_t k) const { return consequent[k].data()[rule]; }

  // Rule order follows the quadrant roles HH, LH, LL, HL; rules beyond the
  // fourth get centres drawn from `rng`. sigma = 0.25, consequents 0.
  static FuzzyRuleParams init(std::size_t rules, Rng& rng);
  // rows: {c1, c2, s1, s2, a0, a1, a2} per rule
  static FuzzyRuleParams from_rows(const std::vector<std::array<double, 7>>& rows);
  std::vector<std::array<double, 7>> rows() const;

  FuzzyRuleParams permuted(const std::vector<std::size_t>& order) const;
  FuzzyRuleParams clone() const;

  // Clamp widths to >= sigma_min in place.
  void clamp_widths(double sigma_min = kSigmaMin);
};

void append_params(std::vector<NamedParam>& out, const std::string& prefix, const FuzzyRuleParams& params);

// exp(-(x - c)^2 / (2 sigma^2))
double membership(double x, double c, double sigma);

std::vector<double> firing_strengths(double x1, double x2, const FuzzyRuleParams& params);

// w_i / (sum w + eps), summed in sorted order so rule order cannot matter.
std::vector<double> normalized_firing(const std::vector<double>& w, double eps = kDefuzzEps);

// Crisp per-pixel output for one (x1, x2) pair.
double tsk_scalar(double x1, double x2, const FuzzyRuleParams& params);

struct TskOutput {
  Tensor y;       // [N,1,H,W], logit-like
  Tensor firing;  // [N,R,H,W], raw w_i
};

TskOutput tsk_forward(const Tensor& x1, const Tensor& x2, const FuzzyRuleParams& params);

}  // namespace smoe
