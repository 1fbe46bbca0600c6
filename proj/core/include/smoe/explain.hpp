#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smoe/image.hpp"
#include "smoe/tsk_head.hpp"
#include "smoe/unet.hpp"

namespace smoe {

// Colours of the dominant-rule map, by rule index modulo 4:
// rule 1 red, rule 2 green, rule 3 blue, rule 4 yellow.
inline constexpr std::array<std::array<std::uint8_t, 3>, 4> kRulePalette{{
    {{230, 25, 75}}, {{60, 180, 75}}, {{0, 130, 200}}, {{255, 225, 25}}}};

// Gate value per skip level (0 = context expert, 1 = boundary expert),
// nearest-upsampled to the input resolution. Level l is element l. Throws
// Error when the model ran without the sMoE block.
std::vector<Image> strategy_maps(const ForwardBundle& bundle, std::size_t batch_index = 0);

// Normalised firing w_i / (sum_j w_j + eps) per rule. The per-pixel sum is
// taken in sorted order, so permuting rules permutes the maps exactly.
std::vector<Image> rule_firing_maps(const ForwardBundle& bundle, std::size_t batch_index = 0);

// RGB map colouring each pixel by its most strongly firing rule (lowest
// index on ties) with kRulePalette.
Image dominant_rule_map(const std::vector<Image>& firing_maps);

// LOW below 0.5, HIGH above, MEDIUM at exactly 0.5.
std::string linguistic_label(double center);
// "IF x1 is HIGH AND x2 is LOW"
std::string rule_antecedent(double c1, double c2);

// JSON rule base: per rule the centres, widths, consequents, antecedent label
// and the sign of the constant consequent term. Doubles are written in
// shortest round-trip form, so reloading is bit-exact.
std::string rulebase_to_json(const FuzzyRuleParams& params);
FuzzyRuleParams rulebase_from_json(const std::string& text);

// Header `x,rule1_x1,rule1_x2,rule2_x1,...`; `samples` rows of mu over
// x = k/(samples-1), k = 0..samples-1.
std::string mf_curves_csv(const FuzzyRuleParams& params, std::size_t samples = 256);

// Writes the rule base JSON to `json_path` and the membership curves next to
// it as `<stem>_mf_curves.csv`. Returns both paths.
std::vector<std::filesystem::path> export_rulebase(const FuzzyRuleParams& params, const std::filesystem::path& json_path);

// Runs the model on one image and writes into `out_dir`:
//   strategy_level<l>.png   l = 0..depth-1, gate mapped linearly to 0..255
//   firing_rule<i>.png      i = 1..R, normalised firing mapped to 0..255
//   firing_argmax.png       dominant rule in kRulePalette colours
//   rulebase.json, rulebase_mf_curves.csv
// Returns the written paths in that order.
std::vector<std::filesystem::path> write_explain_artifacts(const Model& model, const Image& image,
                                                           const std::filesystem::path& out_dir);

}  // namespace smoe
