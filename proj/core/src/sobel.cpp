#include "smoe/sobel.hpp"

#include <algorithm>
#include <cmath>

#include "smoe/errors.hpp"

namespace smoe {

SobelResponse sobel_response(const Image& input) {
  const Image image = to_luma(input);
  const auto h = image.height, w = image.width;
  if (h < 3 || w < 3) {
    throw ShapeError("image " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than the 3x3 Sobel kernel");
  }
  auto px = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(h) - 1);
    x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(w) - 1);
    return image.data[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  SobelResponse r;
  r.gx.resize(h * w);
  r.gy.resize(h * w);
  r.magnitude.resize(h * w);
  for (std::size_t yy = 0; yy < h; ++yy) {
    for (std::size_t xx = 0; xx < w; ++xx) {
      const auto y = static_cast<std::ptrdiff_t>(yy), x = static_cast<std::ptrdiff_t>(xx);
      // (a + c) + 2b keeps each triple symmetric, which makes the response
      // exactly covariant under 90 degree rotations.
      auto tri = [](double a, double b, double c) { return (a + c) + 2.0 * b; };
      const double gx = tri(px(y - 1, x + 1), px(y, x + 1), px(y + 1, x + 1)) -
                        tri(px(y - 1, x - 1), px(y, x - 1), px(y + 1, x - 1));
      const double gy = tri(px(y + 1, x - 1), px(y + 1, x), px(y + 1, x + 1)) -
                        tri(px(y - 1, x - 1), px(y - 1, x), px(y - 1, x + 1));
      const auto i = yy * w + xx;
      r.gx[i] = gx;
      r.gy[i] = gy;
      r.magnitude[i] = std::sqrt(gx * gx + gy * gy);
    }
  }
  return r;
}

GuidanceMap sobel_magnitude(const Image& image) {
  auto r = sobel_response(image);
  GuidanceMap map{image.height, image.width, std::move(r.magnitude)};
  const double peak = *std::max_element(map.values.begin(), map.values.end());
  if (peak < 1e-12) {
    std::fill(map.values.begin(), map.values.end(), 0.0);
  } else {
    for (double& v : map.values) v = std::min(1.0, v / peak);
  }
  return map;
}

GuidanceMap resize_bilinear(const GuidanceMap& map, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_bilinear target must be at least 1x1");
  if (out_h == map.height && out_w == map.width) return map;
  GuidanceMap out{out_h, out_w, std::vector<double>(out_h * out_w)};
  const double sy = static_cast<double>(map.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(map.width) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::max(0.0, (static_cast<double>(y) + 0.5) * sy - 0.5);
    const auto y0 = std::min(static_cast<std::size_t>(fy), map.height - 1);
    const auto y1 = std::min(y0 + 1, map.height - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::max(0.0, (static_cast<double>(x) + 0.5) * sx - 0.5);
      const auto x0 = std::min(static_cast<std::size_t>(fx), map.width - 1);
      const auto x1 = std::min(x0 + 1, map.width - 1);
      const double tx = fx - static_cast<double>(x0);
      const double top = map.at(y0, x0) * (1.0 - tx) + map.at(y0, x1) * tx;
      const double bot = map.at(y1, x0) * (1.0 - tx) + map.at(y1, x1) * tx;
      out.values[y * out_w + x] = std::clamp(top * (1.0 - ty) + bot * ty, 0.0, 1.0);
    }
  }
  return out;
}

Tensor guidance_tensor(const std::vector<GuidanceMap>& maps) {
  if (maps.empty()) throw ShapeError("guidance_tensor: no maps");
  const auto h = maps[0].height, w = maps[0].width;
  std::vector<double> data;
  data.reserve(maps.size() * h * w);
  for (const auto& m : maps) {
    if (m.height != h || m.width != w) throw ShapeError("guidance_tensor: maps differ in size");
    data.insert(data.end(), m.values.begin(), m.values.end());
  }
  return Tensor::from_data({maps.size(), 1, h, w}, std::move(data));
}

GuidanceMap guidance_from_tensor(const Tensor& t, std::size_t n) {
  if (t.rank() != 4 || t.dim(1) != 1) throw ShapeError("expected [N,1,H,W], got " + shape_str(t.shape()));
  const auto h = t.dim(2), w = t.dim(3);
  auto d = t.data().subspan(n * h * w, h * w);
  return GuidanceMap{h, w, std::vector<double>(d.begin(), d.end())};
}

}  // namespace smoe
