#include "smoe/gradient_suite.hpp"

#include <cmath>
#include <utility>

#include "smoe/losses.hpp"
#include "smoe/random.hpp"
#include "smoe/smoe_block.hpp"
#include "smoe/tsk_head.hpp"
#include "smoe/unet.hpp"

namespace smoe {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0, bool grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = scale * rng.normal();
  return Tensor::from_data(std::move(shape), std::move(v), grad);
}

// Values bounded away from zero, for relu kinks and divisors.
Tensor away_from_zero(Shape shape, Rng& rng, double margin) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) {
    const double m = margin + std::abs(rng.normal());
    x = rng.uniform() < 0.5 ? -m : m;
  }
  return Tensor::from_data(std::move(shape), std::move(v), true);
}

// Distinct values at least 0.05 apart in random order, so no pooling window
// has a tie within the finite-difference step.
Tensor distinct_values(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.05 * static_cast<double>(i) - 1.0;
  rng.shuffle(v);
  return Tensor::from_data(std::move(shape), std::move(v), true);
}

Tensor uniform_tensor(Shape shape, Rng& rng, double lo, double hi, bool grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(v), grad);
}

// Projects y onto a fixed random direction so every output element gets a
// distinct upstream gradient.
Tensor project(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed ^ 0xA5A5A5A5ULL);
  return sum(mul(y, random_tensor(y.shape(), rng, 1.0, false)));
}

struct Case {
  std::string name;
  std::function<GradcheckReport(std::uint64_t seed, const SuiteOptions&)> run;
};

GradcheckReport check(const ScalarFn& f, std::vector<Tensor> points, GradcheckOptions opt) {
  return finite_diff_gradcheck(f, std::move(points), opt);
}

std::vector<NamedParam> select(const std::vector<NamedParam>& params, bool tsk) {
  std::vector<NamedParam> out;
  for (const auto& p : params) {
    if ((p.name.rfind("tsk.", 0) == 0) == tsk) out.push_back(p);
  }
  return out;
}

GradcheckReport model_case(std::uint64_t seed, const SuiteOptions& opt, bool tsk_part) {
  ModelConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 4;
  Model model(cfg, seed);
  Rng rng(seed + 17);
  // Zero biases leave ReLU inputs of all-zero feature pixels exactly on the
  // kink, so the biases are moved off zero first.
  for (auto& p : model.parameters()) {
    if (p.name.size() > 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0) {
      for (double& v : p.tensor.mutable_data()) v += 0.05 * rng.normal();
    }
  }
  Image img(8, 8, 1);
  for (double& v : img.data) v = rng.uniform();
  std::vector<double> gt(64);
  for (double& v : gt) v = rng.uniform() < 0.2 ? 1.0 : 0.0;
  const Tensor target = Tensor::from_data({1, 1, 8, 8}, gt);
  const LossConfig lc;
  // U-Net parameters see the composite loss; the fuzzy head sees the
  // distillation loss. Its target is detached, so a finite difference
  // through the joint loss would not match the analytic gradient.
  ScalarFn f = [&] {
    const auto out = forward(model, img);
    return tsk_part ? distill_mse(out.tsk_output, out.logits) : composite_loss(out.logits, target, lc);
  };
  std::vector<Tensor> points;
  for (const auto& p : select(model.parameters(), tsk_part)) points.push_back(p.tensor);
  GradcheckOptions o = opt.check;
  o.max_coords = opt.model_coords_per_tensor;
  return check(f, points, o);
}

std::vector<Case> make_cases() {
  std::vector<Case> cases;
  auto conv_case = [](std::string name, Conv2dOptions co, std::size_t k) {
    return Case{std::move(name), [co, k](std::uint64_t seed, const SuiteOptions& opt) {
                  Rng rng(seed);
                  Tensor x = random_tensor({2, 3, 7, 6}, rng);
                  Tensor w = random_tensor({4, 3, k, k}, rng, 0.5);
                  Tensor b = random_tensor({4}, rng);
                  return check([&] { return project(conv2d(x, w, b, co), seed); }, {x, w, b}, opt.check);
                }};
  };
  cases.push_back(conv_case("conv2d", {1, 1, 1}, 3));
  cases.push_back(conv_case("conv2d_stride2", {2, 0, 1}, 3));
  cases.push_back(conv_case("conv2d_dilated", {1, 2, 2}, 3));
  cases.push_back(conv_case("conv2d_pointwise", {1, 0, 1}, 1));
  cases.push_back({"max_pool2d", [](std::uint64_t seed, const SuiteOptions& opt) {
                     Rng rng(seed);
                     Tensor x = distinct_values({2, 2, 4, 6}, rng);
                     return check([&] { return project(max_pool2d(x), seed); }, {x}, opt.check);
                   }});
  cases.push_back({"upsample2x", [](std::uint64_t seed, const SuiteOptions& opt) {
                     Rng rng(seed);
                     Tensor x = random_tensor({2, 2, 3, 4}, rng);
                     return check([&] { return project(upsample2x(x), seed); }, {x}, opt.check);
                   }});
  cases.push_back({"concat_channels", [](std::uint64_t seed, const SuiteOptions& opt) {
                     Rng rng(seed);
                     Tensor a = random_tensor({2, 2, 3, 3}, rng), b = random_tensor({2, 3, 3, 3}, rng);
                     return check([&] { return project(concat_channels(a, b), seed); }, {a, b}, opt.check);
                   }});
  cases.push_back({"slice_channels", [](std::uint64_t seed, const SuiteOptions& opt) {
                     Rng rng(seed);
                     Tensor x = random_tensor({2, 5, 3, 3}, rng);
                     return check([&] { return project(slice_channels(x, 1, 3), seed); }, {x}, opt.check);
                   }});
  cases.push_back({"crop2d", [](std::uint64_t seed, const SuiteOptions& opt) {
                     Rng rng(seed);
                     Tensor x = random_tensor({1, 2, 6, 5}, rng);
                     return check([&] { return project(crop2d(x, 1, 2, 4, 3), seed); }, {x}, opt.check);
                   }});
  const std::pair<const char*, UnaryOp> unary[] = {{"sigmoid", UnaryOp::sigmoid},
                                                   {"exp", UnaryOp::exp},
                                                   {"neg", UnaryOp::neg},
                                                   {"square", UnaryOp::square},
                                                   {"relu", UnaryOp::relu}};
  for (const auto& [name, op] : unary) {
    cases.push_back({std::string("map_unary.") + name, [op = op](std::uint64_t seed, const SuiteOptions& opt) {
                       Rng rng(seed);
                       Tensor x = away_from_zero({2, 3, 4}, rng, 0.01);
                       return check([&] { return project(map_unary(x, op), seed); }, {x}, opt.check);
                     }});
  }
  const std::pair<const char*, BinaryOp> binary[] = {
      {"add", BinaryOp::add}, {"sub", BinaryOp::sub}, {"mul", BinaryOp::mul}, {"div", BinaryOp::div}};
  for (const auto& [name, op] : binary) {
    cases.push_back({std::string("zip_binary.") + name, [op = op](std::uint64_t seed, const SuiteOptions& opt) {
                       Rng rng(seed);
                       Tensor a = random_tensor({2, 3, 4, 5}, rng);
                       Tensor b = away_from_zero({2, 3, 4, 5}, rng, 0.5);
                       return check([&] { return project(zip_binary(a, b, op), seed); }, {a, b}, opt.check);
                     }});
    cases.push_back({std::string("zip_binary.") + name + "_broadcast",
                     [op = op](std::uint64_t seed, const SuiteOptions& opt) {
                       Rng rng(seed);
                       Tensor a = random_tensor({2, 3, 4, 5}, rng);
                       Tensor b = away_from_zero({1, 3, 1, 1}, rng, 0.5);
                       Tensor s = away_from_zero({1}, rng, 0.5);
                       return check([&] { return project(zip_binary(zip_binary(a, b, op), s, op), seed); }, {a, b, s},
                                    opt.check);
                     }});
  }
  cases.push_back({"reduce.sum", [](std::uint64_t seed, const SuiteOptions& opt) {
                     Rng rng(seed);
                     Tensor x = random_tensor({3, 4}, rng);
                     return check([&] { return square(sum(x)); }, {x}, opt.check);
                   }});
  cases.push_back({"reduce.mean", [](std::uint64_t seed, const SuiteOptions& opt) {
                     Rng rng(seed);
                     Tensor x = random_tensor({3, 4}, rng);
                     return check([&] { return square(mean(x)); }, {x}, opt.check);
                   }});
  for (bool sorted : {false, true}) {
    cases.push_back({sorted ? "sum_channels.order_invariant" : "sum_channels",
                     [sorted](std::uint64_t seed, const SuiteOptions& opt) {
                       Rng rng(seed);
                       Tensor x = random_tensor({2, 4, 3, 3}, rng);
                       return check([&] { return project(sum_channels(x, sorted), seed); }, {x}, opt.check);
                     }});
  }
  cases.push_back({"scale_add_scalar", [](std::uint64_t seed, const SuiteOptions& opt) {
                     Rng rng(seed);
                     Tensor x = random_tensor({2, 5}, rng);
                     return check([&] { return project(add_scalar(scale(x, -1.7), 0.3), seed); }, {x}, opt.check);
                   }});
  cases.push_back({"smoe_block", [](std::uint64_t seed, const SuiteOptions& opt) {
                     Rng rng(seed);
                     auto params = SmoeParams::init(3, rng);
                     Tensor x = random_tensor({2, 3, 6, 6}, rng);
                     Tensor e = uniform_tensor({2, 1, 6, 6}, rng, 0.0, 1.0, true);
                     std::vector<Tensor> pts{x, e};
                     for (const auto* c : {&params.gate, &params.context, &params.boundary}) {
                       pts.push_back(c->weight);
                       pts.push_back(c->bias);
                     }
                     return check([&] { return project(smoe_forward(x, e, params).y, seed); }, pts, opt.check);
                   }});
  cases.push_back({"tsk_head", [](std::uint64_t seed, const SuiteOptions& opt) {
                     Rng rng(seed);
                     auto params = FuzzyRuleParams::init(4, rng);
                     for (auto& a : params.consequent)
                       for (double& v : a.mutable_data()) v = rng.normal();
                     for (auto& c : params.center)
                       for (double& v : c.mutable_data()) v += 0.1 * rng.normal();
                     Tensor x1 = uniform_tensor({2, 1, 4, 4}, rng, 0.0, 1.0, true);
                     Tensor x2 = uniform_tensor({2, 1, 4, 4}, rng, 0.0, 1.0, true);
                     std::vector<Tensor> pts{x1, x2};
                     for (const auto& t : params.center) pts.push_back(t);
                     for (const auto& t : params.width) pts.push_back(t);
                     for (const auto& t : params.consequent) pts.push_back(t);
                     return check([&] { return project(tsk_forward(x1, x2, params).y, seed); }, pts, opt.check);
                   }});
  cases.push_back({"loss.bce_with_logits", [](std::uint64_t seed, const SuiteOptions& opt) {
                     Rng rng(seed);
                     Tensor z = random_tensor({2, 1, 4, 4}, rng, 2.0);
                     Tensor t = uniform_tensor({2, 1, 4, 4}, rng, 0.0, 1.0);
                     return check([&] { return bce_with_logits(z, t); }, {z}, opt.check);
                   }});
  cases.push_back({"loss.dice", [](std::uint64_t seed, const SuiteOptions& opt) {
                     Rng rng(seed);
                     Tensor p = uniform_tensor({2, 1, 4, 4}, rng, 0.0, 1.0, true);
                     Tensor t = binarize_target(uniform_tensor({2, 1, 4, 4}, rng, 0.0, 1.0));
                     return check([&] { return dice_loss(p, t); }, {p}, opt.check);
                   }});
  cases.push_back({"loss.composite", [](std::uint64_t seed, const SuiteOptions& opt) {
                     Rng rng(seed);
                     Tensor z = random_tensor({2, 1, 4, 4}, rng, 2.0);
                     Tensor t = uniform_tensor({2, 1, 4, 4}, rng, 0.0, 1.0);
                     LossConfig lc;
                     lc.lambda = rng.uniform();
                     return check([&] { return composite_loss(z, t, binarize_target(t), lc); }, {z}, opt.check);
                   }});
  cases.push_back({"loss.distill_mse", [](std::uint64_t seed, const SuiteOptions& opt) {
                     Rng rng(seed);
                     Tensor y = random_tensor({2, 1, 4, 4}, rng);
                     Tensor z = random_tensor({2, 1, 4, 4}, rng, 1.0, false);
                     return check([&] { return distill_mse(y, z); }, {y}, opt.check);
                   }});
  cases.push_back({"model.unet_composite", [](std::uint64_t seed, const SuiteOptions& opt) {
                     return model_case(seed, opt, false);
                   }});
  cases.push_back({"model.tsk_distill", [](std::uint64_t seed, const SuiteOptions& opt) {
                     return model_case(seed, opt, true);
                   }});
  return cases;
}

}  // namespace

std::vector<std::string> gradient_suite_case_names() {
  std::vector<std::string> names;
  for (const auto& c : make_cases()) names.push_back(c.name);
  return names;
}

std::vector<SuiteCase> run_gradient_suite(const SuiteOptions& options,
                                          const std::function<void(const SuiteCase&)>& progress) {
  std::vector<SuiteCase> results;
  const auto cases = make_cases();
  for (std::size_t s = 0; s < options.seeds; ++s) {
    const std::uint64_t seed = options.first_seed + s;
    for (const auto& c : cases) {
      SuiteCase r{c.name, seed, c.run(seed, options)};
      if (progress) progress(r);
      results.push_back(std::move(r));
    }
  }
  return results;
}

}  // namespace smoe
