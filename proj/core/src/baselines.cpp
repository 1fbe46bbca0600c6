#include "smoe/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "smoe/errors.hpp"
#include "smoe/sobel.hpp"

namespace smoe {

Image gaussian_blur(const Image& input, double sigma) {
  Image image = to_luma(input);
  if (!(sigma > 0.0)) return image;
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : kernel) v /= total;

  const auto h = static_cast<std::ptrdiff_t>(image.height), w = static_cast<std::ptrdiff_t>(image.width);
  auto pass = [&](const std::vector<double>& src, bool horizontal) {
    std::vector<double> dst(src.size());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
          const auto yy = horizontal ? y : std::clamp<std::ptrdiff_t>(y + k, 0, h - 1);
          const auto xx = horizontal ? std::clamp<std::ptrdiff_t>(x + k, 0, w - 1) : x;
          acc += kernel[static_cast<std::size_t>(k + radius)] * src[static_cast<std::size_t>(yy * w + xx)];
        }
        dst[static_cast<std::size_t>(y * w + x)] = acc;
      }
    }
    return dst;
  };
  image.data = pass(pass(image.data, true), false);
  return image;
}

CannyResponse canny_response(const Image& image, double sigma) {
  const Image smooth = gaussian_blur(image, sigma);
  const SobelResponse g = sobel_response(smooth);
  const auto h = smooth.height, w = smooth.width;
  CannyResponse out{h, w, std::vector<double>(h * w, 0.0)};
  const double peak = *std::max_element(g.magnitude.begin(), g.magnitude.end());
  if (peak < 1e-12) return out;

  auto mag = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(h) || x >= static_cast<std::ptrdiff_t>(w)) return 0.0;
    return g.magnitude[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  const double pi = std::acos(-1.0);
  for (std::size_t yy = 0; yy < h; ++yy) {
    for (std::size_t xx = 0; xx < w; ++xx) {
      const auto i = yy * w + xx;
      const double m = g.magnitude[i];
      if (m <= 0.0) continue;
      // Angle of the gradient with y pointing up, folded into [0, 180).
      double deg = std::atan2(-g.gy[i], g.gx[i]) * 180.0 / pi;
      if (deg < 0.0) deg += 180.0;
      if (deg >= 180.0) deg -= 180.0;
      // Positive-side step in image coordinates (dy grows downwards).
      int dx = 1, dy = 0;
      if (deg >= 22.5 && deg < 67.5) {
        dx = 1;
        dy = -1;
      } else if (deg >= 67.5 && deg < 112.5) {
        dx = 0;
        dy = -1;
      } else if (deg >= 112.5 && deg < 157.5) {
        dx = -1;
        dy = -1;
      }
      const auto y = static_cast<std::ptrdiff_t>(yy), x = static_cast<std::ptrdiff_t>(xx);
      if (m > mag(y - dy, x - dx) && m >= mag(y + dy, x + dx)) out.suppressed[i] = m / peak;
    }
  }
  return out;
}

BoundaryMap hysteresis(const CannyResponse& r, double low, double high) {
  const auto h = r.height, w = r.width;
  BoundaryMap out(h, w);
  std::vector<std::size_t> frontier;
  for (std::size_t i = 0; i < h * w; ++i) {
    if (r.suppressed[i] > 0.0 && r.suppressed[i] >= high) {
      out.on[i] = 1;
      frontier.push_back(i);
    }
  }
  while (!frontier.empty()) {
    const auto i = frontier.back();
    frontier.pop_back();
    const auto y = static_cast<std::ptrdiff_t>(i / w), x = static_cast<std::ptrdiff_t>(i % w);
    for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
      for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
        const auto ny = y + dy, nx = x + dx;
        if (ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(h) || nx >= static_cast<std::ptrdiff_t>(w)) continue;
        const auto j = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
        if (!out.on[j] && r.suppressed[j] > 0.0 && r.suppressed[j] >= low) {
          out.on[j] = 1;
          frontier.push_back(j);
        }
      }
    }
  }
  out.method = "canny";
  out.threshold = high;
  return out;
}

BoundaryMap canny(const Image& image, double sigma, double low, double high) {
  if (!(low > 0.0 && low < high && high <= 1.0)) throw Error("canny requires 0 < low < high <= 1");
  return hysteresis(canny_response(image, sigma), low, high);
}

BoundaryMap sobel_baseline(const Image& image, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error("sobel_baseline threshold must lie inside (0,1)");
  const GuidanceMap mag = sobel_magnitude(image);
  BoundaryMap raw(mag.height, mag.width);
  for (std::size_t i = 0; i < mag.values.size(); ++i) raw.on[i] = mag.values[i] >= threshold ? 1 : 0;
  BoundaryMap out = thin(raw);
  out.method = "sobel";
  out.threshold = threshold;
  return out;
}

}  // namespace smoe
