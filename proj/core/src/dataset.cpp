#include "smoe/dataset.hpp"

#include <algorithm>

#include "smoe/errors.hpp"

namespace smoe {

const char* split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw Error("unknown split '" + name + "' (expected train, val or test)");
}

std::vector<std::string> png_stems(const std::filesystem::path& dir) {
  std::vector<std::string> stems;
  if (!std::filesystem::is_directory(dir)) return stems;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") stems.push_back(entry.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir, Split split) {
  const auto root = dir / split_name(split);
  std::vector<Sample> samples;
  for (const auto& stem : png_stems(root / "images")) {
    const auto gt_path = root / "gt" / (stem + ".png");
    if (!std::filesystem::exists(gt_path)) throw DataError("missing ground truth for image '" + stem + "'");
    Sample s;
    s.id = stem;
    s.image = read_png(root / "images" / (stem + ".png"));
    s.ground_truth = to_luma(read_png(gt_path));
    if (s.ground_truth.height != s.image.height || s.ground_truth.width != s.image.width) {
      throw DataError("ground truth for '" + stem + "' does not match the image size");
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

Sample augment(const Sample& sample, Rotation rotation) {
  return {rotate(sample.image, rotation), rotate(sample.ground_truth, rotation), sample.id};
}

Image consensus_map(const std::vector<Image>& maps) {
  if (maps.empty()) throw DataError("consensus_map: no annotator maps");
  Image out(maps[0].height, maps[0].width, 1, 0.0);
  for (const auto& m : maps) {
    if (m.height != out.height || m.width != out.width) throw DataError("consensus_map: annotator maps differ in size");
    const Image g = to_luma(m);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += g.data[i] >= 0.5 ? 1.0 : 0.0;
  }
  for (double& v : out.data) v /= static_cast<double>(maps.size());
  return out;
}

std::vector<Image> load_annotator_maps(const std::filesystem::path& gt_dir, const std::string& stem) {
  std::vector<Image> maps;
  for (std::size_t k = 0;; ++k) {
    const auto p = gt_dir / (stem + "_" + std::to_string(k) + ".png");
    if (!std::filesystem::exists(p)) break;
    maps.push_back(to_luma(read_png(p)));
  }
  if (maps.empty()) {
    const auto single = gt_dir / (stem + ".png");
    if (std::filesystem::exists(single)) maps.push_back(to_luma(read_png(single)));
  }
  if (maps.empty()) throw DataError("no ground truth found for '" + stem + "' in " + gt_dir.string());
  return maps;
}

}  // namespace smoe
