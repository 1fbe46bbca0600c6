#include "smoe/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "smoe/errors.hpp"

namespace smoe {

using nlohmann::json;

std::vector<Image> strategy_maps(const ForwardBundle& bundle, std::size_t batch_index) {
  if (bundle.gate_maps.empty()) {
    throw Error("no strategy maps: the model was built without the sMoE block; rerun with sMoE enabled");
  }
  const auto h = bundle.logits.dim(2), w = bundle.logits.dim(3);
  std::vector<Image> maps;
  for (const auto& gate : bundle.gate_maps) {
    const Tensor& g = gate.values;
    if (batch_index >= g.dim(0)) throw ShapeError("strategy_maps: batch index out of range");
    const std::size_t factor = std::size_t{1} << gate.level;
    Image img(h, w, 1);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const auto gy = std::min(y / factor, g.dim(2) - 1), gx = std::min(x / factor, g.dim(3) - 1);
        img.at(y, x) = g.at(batch_index, 0, gy, gx);
      }
    }
    maps.push_back(std::move(img));
  }
  return maps;
}

std::vector<Image> rule_firing_maps(const ForwardBundle& bundle, std::size_t batch_index) {
  const Tensor& f = bundle.firing_maps;
  if (batch_index >= f.dim(0)) throw ShapeError("rule_firing_maps: batch index out of range");
  const auto rules = f.dim(1), h = f.dim(2), w = f.dim(3);
  std::vector<Image> maps(rules, Image(h, w, 1));
  std::vector<double> sorted(rules);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t r = 0; r < rules; ++r) sorted[r] = f.at(batch_index, r, y, x);
      std::sort(sorted.begin(), sorted.end());
      double total = 0.0;
      for (double v : sorted) total += v;
      for (std::size_t r = 0; r < rules; ++r) maps[r].at(y, x) = f.at(batch_index, r, y, x) / (total + kDefuzzEps);
    }
  }
  return maps;
}

Image dominant_rule_map(const std::vector<Image>& firing) {
  if (firing.empty()) throw Error("dominant_rule_map: no firing maps");
  const auto h = firing[0].height, w = firing[0].width;
  Image out(h, w, 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t best = 0;
      for (std::size_t r = 1; r < firing.size(); ++r) {
        if (firing[r].at(y, x) > firing[best].at(y, x)) best = r;
      }
      const auto& colour = kRulePalette[best % kRulePalette.size()];
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = colour[c] / 255.0;
    }
  }
  return out;
}

std::string linguistic_label(double center) {
  if (center == 0.5) return "MEDIUM";
  return center < 0.5 ? "LOW" : "HIGH";
}

std::string rule_antecedent(double c1, double c2) {
  return "IF x1 is " + linguistic_label(c1) + " AND x2 is " + linguistic_label(c2);
}

namespace {

std::string sign_name(double v) {
  if (v > 0.0) return "positive";
  if (v < 0.0) return "negative";
  return "zero";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

std::string rulebase_to_json(const FuzzyRuleParams& p) {
  json rules = json::array();
  for (std::size_t r = 0; r < p.rules(); ++r) {
    rules.push_back({{"rule", r + 1},
                     {"antecedent", rule_antecedent(p.c(r, 0), p.c(r, 1))},
                     {"labels", {linguistic_label(p.c(r, 0)), linguistic_label(p.c(r, 1))}},
                     {"center", {p.c(r, 0), p.c(r, 1)}},
                     {"width", {p.sigma(r, 0), p.sigma(r, 1)}},
                     {"consequent", {p.a(r, 0), p.a(r, 1), p.a(r, 2)}},
                     {"constant_term_sign", sign_name(p.a(r, 0))}});
  }
  json j;
  j["inputs"] = {"x1: normalised Sobel edge strength", "x2: semantic confidence from the main head"};
  j["consequent_form"] = "y = a0 + a1*x1 + a2*x2";
  j["rules"] = std::move(rules);
  return j.dump(2) + "\n";
}

FuzzyRuleParams rulebase_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    std::vector<std::array<double, 7>> rows;
    for (const auto& r : j.at("rules")) {
      const auto c = r.at("center").get<std::vector<double>>();
      const auto s = r.at("width").get<std::vector<double>>();
      const auto a = r.at("consequent").get<std::vector<double>>();
      if (c.size() != 2 || s.size() != 2 || a.size() != 3) throw DataError("rule entry has the wrong arity");
      rows.push_back({c[0], c[1], s[0], s[1], a[0], a[1], a[2]});
    }
    if (rows.empty()) throw DataError("rule base has no rules");
    return FuzzyRuleParams::from_rows(rows);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed rule base: ") + e.what());
  }
}

std::string mf_curves_csv(const FuzzyRuleParams& p, std::size_t samples) {
  if (samples < 2) throw Error("mf_curves_csv needs at least 2 samples");
  std::string out = "x";
  for (std::size_t r = 0; r < p.rules(); ++r) {
    out += ",rule" + std::to_string(r + 1) + "_x1";
    out += ",rule" + std::to_string(r + 1) + "_x2";
  }
  out += "\n";
  char buf[40];
  for (std::size_t k = 0; k < samples; ++k) {
    const double x = static_cast<double>(k) / static_cast<double>(samples - 1);
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out += buf;
    for (std::size_t r = 0; r < p.rules(); ++r) {
      for (std::size_t i = 0; i < 2; ++i) {
        std::snprintf(buf, sizeof buf, ",%.17g", membership(x, p.c(r, i), p.sigma(r, i)));
        out += buf;
      }
    }
    out += "\n";
  }
  return out;
}

std::vector<std::filesystem::path> export_rulebase(const FuzzyRuleParams& params,
                                                   const std::filesystem::path& json_path) {
  auto csv_path = json_path;
  csv_path.replace_filename(json_path.stem().string() + "_mf_curves.csv");
  write_text(json_path, rulebase_to_json(params));
  write_text(csv_path, mf_curves_csv(params));
  return {json_path, csv_path};
}

std::vector<std::filesystem::path> write_explain_artifacts(const Model& model, const Image& image,
                                                           const std::filesystem::path& out_dir) {
  if (!model.config().smoe_enabled) {
    throw Error("explain needs strategy maps but this checkpoint was trained without the sMoE block; "
                "retrain without --no-smoe");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());

  const ForwardBundle bundle = forward(model, image);
  std::vector<std::filesystem::path> written;
  const auto gates = strategy_maps(bundle);
  for (std::size_t l = 0; l < gates.size(); ++l) {
    written.push_back(out_dir / ("strategy_level" + std::to_string(l) + ".png"));
    write_png(written.back(), gates[l]);
  }
  const auto firing = rule_firing_maps(bundle);
  for (std::size_t r = 0; r < firing.size(); ++r) {
    written.push_back(out_dir / ("firing_rule" + std::to_string(r + 1) + ".png"));
    write_png(written.back(), firing[r]);
  }
  written.push_back(out_dir / "firing_argmax.png");
  write_png(written.back(), dominant_rule_map(firing));
  for (auto& p : export_rulebase(model.tsk(), out_dir / "rulebase.json")) written.push_back(std::move(p));
  return written;
}

}  // namespace smoe
