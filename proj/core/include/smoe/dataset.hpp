#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "smoe/image.hpp"

namespace smoe {

struct Sample {
  Image image;         // H x W x C in [0,1]
  Image ground_truth;  // H x W consensus boundary strength in [0,1]
  std::string id;
};

enum class Split { train, val, test };
const char* split_name(Split split);
Split parse_split(const std::string& name);

// Reads `<dir>/<split>/images/*.png` with ground truth `<dir>/<split>/gt/<stem>.png`
// (8-bit grayscale, value/255 = consensus strength). Samples come back sorted
// by stem. A missing split directory yields an empty list.
std::vector<Sample> load_dataset(const std::filesystem::path& dir, Split split);

// Rotates image and ground truth together (counter-clockwise).
Sample augment(const Sample& sample, Rotation rotation);

// Offline converter contract for multi-annotator ground truth: the mean of
// the annotators' binary boundary maps.
Image consensus_map(const std::vector<Image>& annotator_maps);

// Annotator maps for evaluation: `<gt_dir>/<stem>_<k>.png`, k = 0, 1, ...;
// a single `<gt_dir>/<stem>.png` is accepted as a one-annotator set.
std::vector<Image> load_annotator_maps(const std::filesystem::path& gt_dir, const std::string& stem);

// Sorted stems of the PNG files in a directory.
std::vector<std::string> png_stems(const std::filesystem::path& dir);

}  // namespace smoe
