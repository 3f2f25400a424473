#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "size2depth/annotation.hpp"
#include "size2depth/crf.hpp"
#include "size2depth/raster.hpp"

namespace size2depth::testing {

/// Encodes an 8-bit RGB buffer (row-major, values 0..255) as PNG or JPEG.
inline std::vector<std::uint8_t> encode_rgb8(int width, int height, const std::vector<std::array<int, 3>>& rgb,
                                             const std::string& ext = ".png") {
  cv::Mat img(height, width, CV_8UC3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto& c = rgb[static_cast<std::size_t>(y) * width + x];
      img.at<cv::Vec3b>(y, x) = cv::Vec3b(static_cast<std::uint8_t>(c[2]), static_cast<std::uint8_t>(c[1]),
                                          static_cast<std::uint8_t>(c[0]));
    }
  }
  std::vector<std::uint8_t> buf;
  cv::imencode(ext, img, buf);
  return buf;
}

inline std::vector<std::uint8_t> solid_png(int width, int height, std::array<int, 3> colour) {
  return encode_rgb8(width, height, std::vector<std::array<int, 3>>(static_cast<std::size_t>(width) * height, colour));
}

/// Smooth gradient with a few hard edges, so similarity weights vary.
inline std::vector<std::uint8_t> textured_png(int width, int height) {
  std::vector<std::array<int, 3>> rgb;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int base = (x * 200) / std::max(1, width - 1);
      const bool box = x > width / 3 && x < 2 * width / 3 && y > height / 4 && y < 3 * height / 4;
      rgb.push_back(box ? std::array<int, 3>{230, 40, 40} : std::array<int, 3>{base, (y * 180) / std::max(1, height - 1), 90});
    }
  }
  return encode_rgb8(width, height, rgb);
}

inline Raster random_raster(std::mt19937_64& rng, int width, int height) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Rgb> rgb(static_cast<std::size_t>(width) * height);
  for (auto& c : rgb) c = {u(rng), u(rng), u(rng)};
  return make_raster(width, height, std::move(rgb));
}

/// Raster built field-by-field, bypassing the 2x2 minimum so that tiny
/// analytic cases (1x2) can be expressed.
inline Raster raw_raster(int width, int height, std::vector<double> intensity) {
  Raster r;
  r.width = width;
  r.height = height;
  for (double v : intensity) r.rgb.push_back({v, v, v});
  r.intensity = std::move(intensity);
  return r;
}

inline DepthTargets full_targets(int width, int height, std::vector<double> d) {
  DepthTargets t;
  t.width = width;
  t.height = height;
  t.mask.assign(d.size(), 1);
  t.d = std::move(d);
  return t;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("size2depth_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// Oracles. These rebuild the energy from its definition (per-pixel unary
// terms, 4-neighbour pairs weighted by exp(-beta |dI|)) without touching the
// library's graph or system code.

struct OracleProblem {
  int width;
  int height;
  std::vector<double> intensity;
  std::vector<double> d;
  std::vector<std::uint8_t> mask;
  double lambda;
  double beta;

  template <class F>
  void for_each_pair(F&& f) const {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const int i = y * width + x;
        if (x + 1 < width) f(i, i + 1, std::exp(-beta * std::abs(intensity[i] - intensity[i + 1])));
        if (y + 1 < height) f(i, i + width, std::exp(-beta * std::abs(intensity[i] - intensity[i + width])));
      }
    }
  }

  double energy(const std::vector<double>& y) const {
    double e = 0.0;
    for (std::size_t p = 0; p < y.size(); ++p) {
      if (mask[p]) e += (y[p] - d[p]) * (y[p] - d[p]);
    }
    for_each_pair([&](int a, int b, double w) { e += lambda * w * (y[a] - y[b]) * (y[a] - y[b]); });
    return e;
  }

  std::vector<double> gradient(const std::vector<double>& y) const {
    std::vector<double> g(y.size(), 0.0);
    for (std::size_t p = 0; p < y.size(); ++p) {
      if (mask[p]) g[p] += 2.0 * (y[p] - d[p]);
    }
    for_each_pair([&](int a, int b, double w) {
      const double t = 2.0 * lambda * w * (y[a] - y[b]);
      g[a] += t;
      g[b] -= t;
    });
    return g;
  }
};

/// Plain gradient descent with step 1/L, L = 2 (1 + 8 lambda) bounding the
/// Hessian's spectrum (Gershgorin on a 4-connected graph with weights <= 1).
inline std::vector<double> gradient_descent(const OracleProblem& p, int steps = 10000) {
  std::vector<double> y = p.d;
  const double step = 1.0 / (2.0 * (1.0 + 8.0 * p.lambda));
  for (int k = 0; k < steps; ++k) {
    const auto g = p.gradient(y);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= step * g[i];
  }
  return y;
}

inline CrfConfig config_with(double lambda, double beta = 10.0) {
  CrfConfig c;
  c.lambda = lambda;
  c.beta = beta;
  return c;
}

inline OracleProblem oracle_of(const Raster& r, const DepthTargets& t, const CrfConfig& c) {
  return {r.width, r.height, r.intensity, t.d, t.mask, c.lambda, c.beta};
}

// Random instance with patch-shaped masks; `full` forces every pixel masked.
struct Instance {
  Raster raster;
  DepthTargets targets;
  CrfConfig config;
};

inline Instance random_instance(std::mt19937_64& rng, bool full) {
  std::uniform_int_distribution<int> dim(2, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int w = dim(rng), h = dim(rng);
  Instance in{random_raster(rng, w, h), {}, config_with(std::exp(u(rng) * 4.0 - 2.3), u(rng) * 20.0)};
  const int rows = std::uniform_int_distribution<int>(1, h)(rng);
  const int cols = std::uniform_int_distribution<int>(1, w)(rng);
  const PatchGrid grid(rows, cols, w, h);
  std::vector<SizeAnnotation> a;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (full || u(rng) < 0.6) a.push_back({{r, c}, 0.5 + 9.5 * u(rng), std::nullopt});
    }
  }
  if (a.empty()) a.push_back({{0, 0}, 1.0, std::nullopt});
  in.targets = targets_from_annotations(grid, a);
  return in;
}

}  // namespace size2depth::testing
