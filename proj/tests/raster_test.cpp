#include "size2depth/raster.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_support.hpp"

namespace size2depth {
namespace {

using testing::encode_rgb8;
using testing::solid_png;

TEST(LoadAndResize, DefaultWorkingResolutionHas5292Pixels) {
  const auto png = testing::textured_png(320, 240);
  const Raster r = load_and_resize(png);
  EXPECT_EQ(r.width, 84);
  EXPECT_EQ(r.height, 63);
  EXPECT_EQ(r.rgb.size(), 5292u);
  EXPECT_EQ(r.intensity.size(), 5292u);
}

TEST(LoadAndResize, UniformImageStaysUniform) {
  const Raster r = load_and_resize(solid_png(100, 100, {128, 128, 128}), 10, 10);
  for (const auto& c : r.rgb) {
    for (double v : c) EXPECT_NEAR(v, 128.0 / 255.0, 1e-12);
  }
}

TEST(LoadAndResize, HalfBlackHalfWhiteToTwoByTwo) {
  std::vector<std::array<int, 3>> px;
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) px.push_back(x < 2 ? std::array<int, 3>{0, 0, 0} : std::array<int, 3>{255, 255, 255});
  }
  const Raster r = load_and_resize(encode_rgb8(4, 4, px), 2, 2);
  for (int y = 0; y < 2; ++y) {
    EXPECT_EQ(r.rgb[r.index(0, y)], (Rgb{0.0, 0.0, 0.0}));
    EXPECT_EQ(r.rgb[r.index(1, y)], (Rgb{1.0, 1.0, 1.0}));
  }
}

TEST(LoadAndResize, DecodesJpeg) {
  const auto jpg = encode_rgb8(16, 16, std::vector<std::array<int, 3>>(256, {200, 100, 50}), ".jpg");
  const Raster r = load_and_resize(jpg, 4, 4);
  EXPECT_NEAR(r.rgb[0][0], 200.0 / 255.0, 0.03);
  EXPECT_NEAR(r.rgb[0][1], 100.0 / 255.0, 0.03);
  EXPECT_NEAR(r.rgb[0][2], 50.0 / 255.0, 0.03);
}

TEST(LoadAndResize, SixteenBitPngScalesBy65535) {
  cv::Mat img(4, 4, CV_16UC3, cv::Scalar(65535, 0, 32768));  // BGR
  std::vector<std::uint8_t> buf;
  cv::imencode(".png", img, buf);
  const Raster r = decode_image(buf);
  EXPECT_DOUBLE_EQ(r.rgb[0][0], 32768.0 / 65535.0);
  EXPECT_DOUBLE_EQ(r.rgb[0][1], 0.0);
  EXPECT_DOUBLE_EQ(r.rgb[0][2], 1.0);
}

TEST(LoadAndResize, RejectsUndecodableInput) {
  const std::vector<std::uint8_t> garbage{'h', 'e', 'l', 'l', 'o'};
  try {
    load_and_resize(garbage);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::decode);
  }
  auto png = solid_png(8, 8, {1, 2, 3});
  png.resize(png.size() / 2);
  EXPECT_THROW(load_and_resize(png), Error);

  cv::Mat img(4, 4, CV_8UC3, cv::Scalar(1, 2, 3));
  std::vector<std::uint8_t> bmp;
  cv::imencode(".bmp", img, bmp);
  try {
    load_and_resize(bmp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::decode);
  }
}

TEST(LoadAndResize, RejectsTargetBelowTwo) {
  const auto png = solid_png(8, 8, {1, 2, 3});
  for (auto [w, h] : {std::pair{1, 5}, std::pair{5, 1}, std::pair{0, 0}}) {
    try {
      load_and_resize(png, w, h);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::dimension);
    }
  }
}

TEST(ComputeIntensity, Rec601Weights) {
  EXPECT_EQ(luma({0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(luma({1, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(luma({1, 0, 0}), 0.299);
  const Raster r = make_raster(2, 2, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}});
  EXPECT_DOUBLE_EQ(r.intensity[0], 0.299);
  EXPECT_DOUBLE_EQ(r.intensity[1], 0.587);
  EXPECT_DOUBLE_EQ(r.intensity[2], 0.114);
  EXPECT_LE(r.intensity[3], 1.0);
}

TEST(ComputeIntensity, IsConvexCombinationOfChannels) {
  std::mt19937_64 rng(3);
  const Raster r = testing::random_raster(rng, 17, 11);
  for (std::size_t i = 0; i < r.rgb.size(); ++i) {
    const auto [lo, hi] = std::minmax({r.rgb[i][0], r.rgb[i][1], r.rgb[i][2]});
    EXPECT_GE(r.intensity[i], lo - 1e-15);
    EXPECT_LE(r.intensity[i], hi + 1e-15);
  }
}

TEST(ResizeArea, SameSizeIsIdentity) {
  std::mt19937_64 rng(1);
  const Raster r = testing::random_raster(rng, 7, 5);
  const Raster s = resize_area(r, 7, 5);
  EXPECT_EQ(s.rgb, r.rgb);
  EXPECT_EQ(s.intensity, r.intensity);
}

TEST(ResizeArea, PreservesMeanForIntegerFactors) {
  std::mt19937_64 rng(2);
  const Raster r = testing::random_raster(rng, 12, 9);
  const Raster s = resize_area(r, 4, 3);
  for (int k = 0; k < 3; ++k) {
    double a = 0.0, b = 0.0;
    for (const auto& c : r.rgb) a += c[k];
    for (const auto& c : s.rgb) b += c[k];
    EXPECT_NEAR(a / r.rgb.size(), b / s.rgb.size(), 1e-6);
  }
}

TEST(ResizeArea, FractionalCoverageMatchesHandComputedAverage) {
  // 3 -> 2 columns: output 0 covers source [0, 1.5), output 1 covers [1.5, 3).
  const Raster r = make_gray_raster(3, 2, std::vector<double>{0.0, 0.3, 0.9, 0.0, 0.3, 0.9});
  const Raster s = resize_area(r, 2, 2);
  EXPECT_NEAR(s.rgb[0][0], (0.0 + 0.5 * 0.3) / 1.5, 1e-15);
  EXPECT_NEAR(s.rgb[1][0], (0.5 * 0.3 + 0.9) / 1.5, 1e-15);
}

TEST(ResizeArea, UpsamplingReplicates) {
  const Raster r = make_gray_raster(2, 2, std::vector<double>{0.1, 0.2, 0.3, 0.4});
  const Raster s = resize_area(r, 4, 4);
  EXPECT_DOUBLE_EQ(s.rgb[s.index(0, 0)][0], 0.1);
  EXPECT_DOUBLE_EQ(s.rgb[s.index(3, 0)][0], 0.2);
  EXPECT_DOUBLE_EQ(s.rgb[s.index(1, 3)][0], 0.3);
}

TEST(MakeRaster, RejectsOutOfRangeChannels) {
  EXPECT_THROW(make_raster(2, 2, {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {1.5, 0, 0}}), Error);
  EXPECT_THROW(make_raster(2, 2, {{0, 0, 0}}), Error);
}

}  // namespace
}  // namespace size2depth
