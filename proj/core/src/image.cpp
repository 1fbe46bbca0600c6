#include "smoe/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "smoe/errors.hpp"

namespace smoe {

Image to_luma(const Image& image) {
  if (image.channels == 1) return image;
  Image out(image.height, image.width, 1);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      if (image.channels >= 3) {
        out.at(y, x) = 0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) + 0.114 * image.at(y, x, 2);
      } else {
        out.at(y, x) = image.at(y, x, 0);
      }
    }
  }
  return out;
}

Image rotate(const Image& image, Rotation rotation) {
  const auto h = image.height, w = image.width, ch = image.channels;
  switch (rotation) {
    case Rotation::rot0:
      return image;
    case Rotation::rot90: {
      Image out(w, h, ch);
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
          for (std::size_t k = 0; k < ch; ++k) out.at(w - 1 - c, r, k) = image.at(r, c, k);
      return out;
    }
    case Rotation::rot180: {
      Image out(h, w, ch);
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
          for (std::size_t k = 0; k < ch; ++k) out.at(h - 1 - r, w - 1 - c, k) = image.at(r, c, k);
      return out;
    }
    case Rotation::rot270: {
      Image out(w, h, ch);
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
          for (std::size_t k = 0; k < ch; ++k) out.at(c, h - 1 - r, k) = image.at(r, c, k);
      return out;
    }
  }
  return image;
}

Image transpose(const Image& image) {
  Image out(image.width, image.height, image.channels);
  for (std::size_t r = 0; r < image.height; ++r)
    for (std::size_t c = 0; c < image.width; ++c)
      for (std::size_t k = 0; k < image.channels; ++k) out.at(c, r, k) = image.at(r, c, k);
  return out;
}

namespace {

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

Image pad_reflect(const Image& image, std::size_t pad_bottom, std::size_t pad_right) {
  if (pad_bottom == 0 && pad_right == 0) return image;
  Image out(image.height + pad_bottom, image.width + pad_right, image.channels);
  for (std::size_t y = 0; y < out.height; ++y) {
    const auto sy = reflect_index(static_cast<std::ptrdiff_t>(y), image.height);
    for (std::size_t x = 0; x < out.width; ++x) {
      const auto sx = reflect_index(static_cast<std::ptrdiff_t>(x), image.width);
      for (std::size_t k = 0; k < image.channels; ++k) out.at(y, x, k) = image.at(sy, sx, k);
    }
  }
  return out;
}

Image crop(const Image& image, std::size_t top, std::size_t left, std::size_t height, std::size_t width) {
  if (top + height > image.height || left + width > image.width) throw ShapeError("image crop out of bounds");
  Image out(height, width, image.channels);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t k = 0; k < image.channels; ++k) out.at(y, x, k) = image.at(top + y, left + x, k);
  return out;
}

Image center_fit(const Image& image, std::size_t height, std::size_t width) {
  Image out(height, width, image.channels, 0.0);
  // Offsets of the overlap in source and destination along each axis.
  auto axis = [](std::size_t src, std::size_t dst) {
    if (src >= dst) return std::tuple<std::size_t, std::size_t, std::size_t>{(src - dst) / 2, 0, dst};
    return std::tuple<std::size_t, std::size_t, std::size_t>{0, (dst - src) / 2, src};
  };
  auto [sy, dy, ny] = axis(image.height, height);
  auto [sx, dx, nx] = axis(image.width, width);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t k = 0; k < image.channels; ++k) out.at(dy + y, dx + x, k) = image.at(sy + y, sx + x, k);
  return out;
}

std::uint8_t quantize_u8(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open image " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError("not a PNG file: " + path.string());
  }
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialisation failed");
  }
  Image out;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("unreadable PNG " + path.string() + ": " + err);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_strip_16(png);
  png_read_update_info(png, info);
  const auto channels = static_cast<std::size_t>(png_get_channels(png, info));
  const auto rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * height);
  rows.resize(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  out = Image(height, width, channels);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = buffer[i] / 255.0;
  return out;
}

void write_png_u8(const std::filesystem::path& path, std::size_t height, std::size_t width, std::size_t channels,
                  std::span<const std::uint8_t> pixels) {
  if (pixels.size() != height * width * channels) throw ShapeError("write_png: pixel buffer size mismatch");
  if (channels != 1 && channels != 3 && channels != 4) throw ShapeError("write_png: unsupported channel count");
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot write " + path.string());
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing PNG " + path.string() + ": " + err);
  }
  png_init_io(png, file.get());
  const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_RGBA;
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(pixels.data() + y * width * channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_png(const std::filesystem::path& path, const Image& image) {
  std::vector<std::uint8_t> px(image.data.size());
  std::transform(image.data.begin(), image.data.end(), px.begin(), quantize_u8);
  write_png_u8(path, image.height, image.width, image.channels, px);
}

}  // namespace smoe
