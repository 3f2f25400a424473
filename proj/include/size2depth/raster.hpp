#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "size2depth/error.hpp"

namespace size2depth {

inline constexpr int kDefaultWorkingWidth = 84;
inline constexpr int kDefaultWorkingHeight = 63;

using Rgb = std::array<double, 3>;

/// Image at working resolution. Pixels are stored row-major, index y * width + x.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<Rgb> rgb;
  std::vector<double> intensity;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

/// Rec. 601 luma of [0,1] channels.
inline double luma(const Rgb& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

inline void check_raster_dimensions(int width, int height) {
  if (width < 2 || height < 2) {
    throw Error(ErrorKind::dimension, "raster must be at least 2x2, got " + std::to_string(width) +
                                          "x" + std::to_string(height));
  }
}

/// Fills `intensity` from `rgb`.
inline Raster compute_intensity(Raster raster) {
  raster.intensity.resize(raster.rgb.size());
  std::transform(raster.rgb.begin(), raster.rgb.end(), raster.intensity.begin(), [](const Rgb& c) {
    return std::clamp(luma(c), 0.0, 1.0);
  });
  return raster;
}

inline Raster make_raster(int width, int height, std::vector<Rgb> rgb) {
  check_raster_dimensions(width, height);
  if (rgb.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorKind::dimension, "rgb buffer length does not match " + std::to_string(width) +
                                          "x" + std::to_string(height));
  }
  for (const auto& c : rgb) {
    for (double v : c) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::domain, "rgb channel outside [0,1]");
    }
  }
  Raster r;
  r.width = width;
  r.height = height;
  r.rgb = std::move(rgb);
  return compute_intensity(std::move(r));
}

/// Grayscale raster whose rgb triples all equal the given intensity.
inline Raster make_gray_raster(int width, int height, std::span<const double> intensity) {
  std::vector<Rgb> rgb;
  rgb.reserve(intensity.size());
  for (double v : intensity) rgb.push_back({v, v, v});
  Raster r = make_raster(width, height, std::move(rgb));
  r.intensity.assign(intensity.begin(), intensity.end());
  return r;
}

namespace detail {

struct Tap {
  int source;
  double weight;
};

// Area-averaging taps along one axis. Positions are kept in units of
// 1/(src*dst) so overlaps are exact integers.
inline std::vector<std::vector<Tap>> area_taps(int src, int dst) {
  std::vector<std::vector<Tap>> taps(dst);
  const std::int64_t s = src;
  const std::int64_t d = dst;
  for (std::int64_t i = 0; i < d; ++i) {
    const std::int64_t lo = i * s;
    const std::int64_t hi = (i + 1) * s;
    for (std::int64_t j = lo / d; j < s && j * d < hi; ++j) {
      const std::int64_t overlap = std::min(hi, (j + 1) * d) - std::max(lo, j * d);
      if (overlap > 0) {
        taps[i].push_back({static_cast<int>(j), static_cast<double>(overlap) / static_cast<double>(s)});
      }
    }
  }
  return taps;
}

inline bool starts_with(std::span<const std::uint8_t> bytes, std::initializer_list<std::uint8_t> magic) {
  return bytes.size() >= magic.size() && std::equal(magic.begin(), magic.end(), bytes.begin());
}

}  // namespace detail

/// Area-averaging resample: each output pixel is the mean of the source area
/// it covers, so constant images stay constant and same-size input is unchanged.
inline Raster resize_area(const Raster& src, int target_width, int target_height) {
  check_raster_dimensions(target_width, target_height);
  const auto xt = detail::area_taps(src.width, target_width);
  const auto yt = detail::area_taps(src.height, target_height);

  std::vector<Rgb> rows(static_cast<std::size_t>(src.height) * target_width);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < target_width; ++x) {
      Rgb acc{0.0, 0.0, 0.0};
      for (const auto& t : xt[x]) {
        const Rgb& c = src.rgb[src.index(t.source, y)];
        for (int k = 0; k < 3; ++k) acc[k] += t.weight * c[k];
      }
      rows[static_cast<std::size_t>(y) * target_width + x] = acc;
    }
  }

  std::vector<Rgb> out(static_cast<std::size_t>(target_height) * target_width);
  for (int y = 0; y < target_height; ++y) {
    for (int x = 0; x < target_width; ++x) {
      Rgb acc{0.0, 0.0, 0.0};
      for (const auto& t : yt[y]) {
        const Rgb& c = rows[static_cast<std::size_t>(t.source) * target_width + x];
        for (int k = 0; k < 3; ++k) acc[k] += t.weight * c[k];
      }
      for (double& v : acc) v = std::clamp(v, 0.0, 1.0);
      out[static_cast<std::size_t>(y) * target_width + x] = acc;
    }
  }

  Raster r;
  r.width = target_width;
  r.height = target_height;
  r.rgb = std::move(out);
  return compute_intensity(std::move(r));
}

/// Decodes a PNG or JPEG into a full-resolution raster with channels in [0,1].
/// Alpha is dropped; 16-bit PNGs are scaled by 1/65535.
inline Raster decode_image(std::span<const std::uint8_t> bytes) {
  const bool png = detail::starts_with(bytes, {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a});
  const bool jpeg = detail::starts_with(bytes, {0xff, 0xd8, 0xff});
  if (!png && !jpeg) throw Error(ErrorKind::decode, "input is neither PNG nor JPEG");

  cv::Mat mat;
  try {
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    mat = cv::imdecode(buf, cv::IMREAD_COLOR | cv::IMREAD_ANYDEPTH);
  } catch (const cv::Exception& e) {
    throw Error(ErrorKind::decode, e.what());
  }
  if (mat.empty()) throw Error(ErrorKind::decode, "image data could not be decoded");

  const double scale = mat.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
  cv::Mat f;
  mat.convertTo(f, CV_64FC3, scale);

  std::vector<Rgb> rgb(static_cast<std::size_t>(f.rows) * f.cols);
  for (int y = 0; y < f.rows; ++y) {
    const auto* row = f.ptr<cv::Vec3d>(y);
    for (int x = 0; x < f.cols; ++x) {
      // OpenCV decodes to BGR.
      rgb[static_cast<std::size_t>(y) * f.cols + x] = {row[x][2], row[x][1], row[x][0]};
    }
  }
  Raster r;
  r.width = f.cols;
  r.height = f.rows;
  r.rgb = std::move(rgb);
  return compute_intensity(std::move(r));
}

inline Raster load_and_resize(std::span<const std::uint8_t> image_bytes,
                              int target_width = kDefaultWorkingWidth,
                              int target_height = kDefaultWorkingHeight) {
  check_raster_dimensions(target_width, target_height);
  return resize_area(decode_image(image_bytes), target_width, target_height);
}

}  // namespace size2depth
