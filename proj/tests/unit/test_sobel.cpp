#include <gtest/gtest.h>

#include <cmath>

#include "smoe/errors.hpp"
#include "smoe/sobel.hpp"

using namespace smoe;

namespace {

Image vertical_step(std::size_t h, std::size_t w) {
  Image img(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = w / 2; x < w; ++x) img.at(y, x) = 1.0;
  return img;
}

}  // namespace

TEST(Sobel, StepResponseValues) {
  const auto r = sobel_response(vertical_step(5, 6));
  // Columns 2 and 3 straddle the step: gx = 4 there, 0 elsewhere.
  for (std::size_t y = 0; y < 5; ++y) {
    for (std::size_t x = 0; x < 6; ++x) {
      const double expect = (x == 2 || x == 3) ? 4.0 : 0.0;
      EXPECT_EQ(r.gx[y * 6 + x], expect);
      EXPECT_EQ(r.gy[y * 6 + x], 0.0);
    }
  }
}

TEST(Sobel, MagnitudeIsNormalisedToPeak) {
  Image img = vertical_step(5, 6);
  for (double& v : img.data) v *= 0.2;
  const auto m = sobel_magnitude(img);
  EXPECT_EQ(m.at(2, 2), 1.0);
  EXPECT_EQ(m.at(2, 0), 0.0);
}

TEST(Sobel, ConstantImageGivesZeros) {
  const auto m = sobel_magnitude(Image(4, 4, 1, 0.7));
  for (double v : m.values) EXPECT_EQ(v, 0.0);
}

TEST(Sobel, RotationCovariance) {
  Image img(6, 7);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = std::fmod(0.37 * static_cast<double>(i * i), 1.0);
  const auto m = sobel_magnitude(img);
  const auto mr = sobel_magnitude(rotate(img, Rotation::rot90));
  Image mi(6, 7);
  mi.data = m.values;
  EXPECT_EQ(rotate(mi, Rotation::rot90).data, mr.values);
}

TEST(Sobel, TooSmallImageIsRejected) { EXPECT_THROW(sobel_response(Image(2, 5)), ShapeError); }

TEST(Sobel, BilinearResizeOfConstantIsConstant) {
  GuidanceMap m{4, 6, std::vector<double>(24, 0.25)};
  const auto r = resize_bilinear(m, 2, 3);
  for (double v : r.values) EXPECT_DOUBLE_EQ(v, 0.25);
  EXPECT_EQ(resize_bilinear(m, 4, 6), m);
}

TEST(Sobel, BilinearDownsampleAveragesPairs) {
  GuidanceMap m{1, 4, {0.0, 0.2, 0.4, 0.6}};
  const auto r = resize_bilinear(m, 1, 2);
  EXPECT_DOUBLE_EQ(r.values[0], 0.1);
  EXPECT_DOUBLE_EQ(r.values[1], 0.5);
}

TEST(Sobel, GuidanceTensorRoundTrip) {
  const GuidanceMap a{2, 2, {0.1, 0.2, 0.3, 0.4}}, b{2, 2, {0.5, 0.6, 0.7, 0.8}};
  const Tensor t = guidance_tensor({a, b});
  EXPECT_EQ(t.shape(), (Shape{2, 1, 2, 2}));
  EXPECT_EQ(guidance_from_tensor(t, 1), b);
  EXPECT_THROW(guidance_tensor({a, GuidanceMap{1, 2, {0, 0}}}), ShapeError);
}
