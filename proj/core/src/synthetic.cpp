#include "smoe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "smoe/errors.hpp"
#include "smoe/evaluator.hpp"
#include "smoe/random.hpp"

namespace smoe {

namespace {

struct Polygon {
  std::vector<std::pair<double, double>> vertices;  // (y, x), counter-clockwise in image coordinates
  double intensity = 0.0;

  bool contains(double y, double x) const {
    const auto n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto [y0, x0] = vertices[i];
      const auto [y1, x1] = vertices[(i + 1) % n];
      if ((x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) < 0.0) return false;
    }
    return true;
  }
};

struct Texture {
  double fy, fx, phase, amplitude;
  double at(double y, double x) const { return amplitude * std::sin(fy * y + fx * x + phase); }
};

Texture random_texture(Rng& rng, double amplitude) {
  const double freq = rng.uniform(0.6, 1.6);
  const double angle = rng.uniform(0.0, M_PI);
  return {freq * std::sin(angle), freq * std::cos(angle), rng.uniform(0.0, 2.0 * M_PI), amplitude * rng.uniform(0.5, 1.0)};
}

}  // namespace

SyntheticScene make_synthetic_scene(std::uint64_t seed, const SyntheticOptions& opt) {
  if (opt.height < 8 || opt.width < 8) throw Error("synthetic scenes need at least 8x8 pixels");
  Rng rng(seed);
  const auto h = opt.height, w = opt.width;
  const double background = rng.uniform(0.2, 0.8);

  std::vector<Polygon> polys;
  const auto count = opt.min_shapes + rng.below(opt.max_shapes - opt.min_shapes + 1);
  const double extent = static_cast<double>(std::min(h, w));
  for (std::size_t k = 0; k < count; ++k) {
    Polygon p;
    const double cy = rng.uniform(0.25, 0.75) * static_cast<double>(h);
    const double cx = rng.uniform(0.25, 0.75) * static_cast<double>(w);
    const double radius = rng.uniform(0.15, 0.3) * extent;
    const auto sides = 3 + rng.below(4);
    std::vector<double> angles(sides);
    for (auto& a : angles) a = rng.uniform(0.0, 2.0 * M_PI);
    std::sort(angles.begin(), angles.end());
    for (double a : angles) {
      const double r = radius * rng.uniform(0.75, 1.0);
      p.vertices.emplace_back(cy + r * std::sin(a), cx + r * std::cos(a));
    }
    // Angles ascend, so the vertices run counter-clockwise in (x, y) with y down.
    const double below = k == 0 ? background : polys.back().intensity;
    double v;
    do {
      v = rng.uniform(0.05, 0.95);
    } while (std::abs(v - below) < opt.min_contrast || std::abs(v - background) < opt.min_contrast * 0.5);
    p.intensity = v;
    polys.push_back(std::move(p));
  }

  std::vector<Texture> textures;
  for (std::size_t k = 0; k <= polys.size(); ++k) textures.push_back(random_texture(rng, opt.texture_amplitude));

  auto label_at = [&](double y, double x) {
    int label = 0;
    for (std::size_t k = 0; k < polys.size(); ++k)
      if (polys[k].contains(y, x)) label = static_cast<int>(k + 1);
    return label;
  };

  SyntheticScene scene;
  scene.image = Image(h, w, 1);
  scene.boundary = Image(h, w, 1);
  std::vector<int> labels(h * w);
  const auto ss = std::max<std::size_t>(1, opt.supersample);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::size_t sy = 0; sy < ss; ++sy) {
        for (std::size_t sx = 0; sx < ss; ++sx) {
          const double py = static_cast<double>(y) + (static_cast<double>(sy) + 0.5) / static_cast<double>(ss);
          const double px = static_cast<double>(x) + (static_cast<double>(sx) + 0.5) / static_cast<double>(ss);
          const int label = label_at(py, px);
          const double base = label == 0 ? background : polys[static_cast<std::size_t>(label - 1)].intensity;
          acc += base + textures[static_cast<std::size_t>(label)].at(py, px);
        }
      }
      const double value = acc / static_cast<double>(ss * ss) + opt.noise_sigma * rng.normal();
      scene.image.at(y, x) = std::clamp(value, 0.0, 1.0);
      labels[y * w + x] = label_at(static_cast<double>(y) + 0.5, static_cast<double>(x) + 0.5);
    }
  }
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const int l = labels[y * w + x];
      const bool edge = (x + 1 < w && labels[y * w + x + 1] != l) || (y > 0 && labels[(y - 1) * w + x] != l);
      scene.boundary.at(y, x) = edge ? 1.0 : 0.0;
    }
  }
  scene.boundary = boundary_to_image(thin(boundary_from_image(scene.boundary)));
  char id[32];
  std::snprintf(id, sizeof(id), "synth_%06llu", static_cast<unsigned long long>(seed));
  scene.id = id;
  return scene;
}

void write_synthetic_split(const std::filesystem::path& dir, const std::string& split, std::size_t count,
                           std::uint64_t seed, const SyntheticOptions& options) {
  const auto images = dir / split / "images";
  const auto gt = dir / split / "gt";
  std::filesystem::create_directories(images);
  std::filesystem::create_directories(gt);
  for (std::size_t i = 0; i < count; ++i) {
    const auto scene = make_synthetic_scene(seed + i, options);
    write_png(images / (scene.id + ".png"), scene.image);
    write_png(gt / (scene.id + ".png"), scene.boundary);
  }
}

}  // namespace smoe
