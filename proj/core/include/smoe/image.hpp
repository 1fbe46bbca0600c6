#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace smoe {

// Interleaved H×W×C float image, values nominally in [0,1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c = 1, double fill = 0.0)
      : height(h), width(w), channels(c), data(h * w * c, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c = 0) { return data[(y * width + x) * channels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c = 0) const { return data[(y * width + x) * channels + c]; }
  bool empty() const { return data.empty(); }
  bool operator==(const Image&) const = default;
};

// 0.299R + 0.587G + 0.114B; single-channel inputs are returned unchanged.
// An alpha channel (C = 2 or 4) is ignored.
Image to_luma(const Image& image);

enum class Rotation { rot0, rot90, rot180, rot270 };

// Counter-clockwise rotation: under rot90 pixel (r, c) moves to (W-1-c, r).
Image rotate(const Image& image, Rotation rotation);
Image transpose(const Image& image);

// Reflect padding on the bottom/right edges (mirror without repeating the edge pixel).
Image pad_reflect(const Image& image, std::size_t pad_bottom, std::size_t pad_right);
Image crop(const Image& image, std::size_t top, std::size_t left, std::size_t height, std::size_t width);
// Centre crop or zero-pad to the requested size.
Image center_fit(const Image& image, std::size_t height, std::size_t width);

// PNG I/O. Reads 8/16-bit gray, gray+alpha, RGB and RGBA; writes 8-bit.
Image read_png(const std::filesystem::path& path);
// Values are clamped to [0,1] and quantised with round-half-up of v*255.
void write_png(const std::filesystem::path& path, const Image& image);
void write_png_u8(const std::filesystem::path& path, std::size_t height, std::size_t width, std::size_t channels,
                  std::span<const std::uint8_t> pixels);

std::uint8_t quantize_u8(double v);

}  // namespace smoe
