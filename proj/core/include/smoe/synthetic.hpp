#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smoe/image.hpp"

namespace smoe {

struct SyntheticOptions {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t min_shapes = 1;
  std::size_t max_shapes = 3;
  double texture_amplitude = 0.12;  // peak of the per-region sinusoidal texture
  double noise_sigma = 0.03;        // i.i.d. Gaussian pixel noise
  double min_contrast = 0.3;        // between a polygon and what it covers
  std::size_t supersample = 4;      // per-axis anti-aliasing samples
};

struct SyntheticScene {
  Image image;         // grayscale
  Image boundary;      // 1-pixel binary boundary map
  std::string id;
};

// Anti-aliased random convex polygons over a textured background. The
// ground truth marks every pixel whose right or upper neighbour belongs to a
// different region, thinned so that it is its own evaluation fixpoint.
SyntheticScene make_synthetic_scene(std::uint64_t seed, const SyntheticOptions& options = {});

// Writes `<dir>/<split>/images/<id>.png` and `<dir>/<split>/gt/<id>.png`.
void write_synthetic_split(const std::filesystem::path& dir, const std::string& split, std::size_t count,
                           std::uint64_t seed, const SyntheticOptions& options = {});

}  // namespace smoe
