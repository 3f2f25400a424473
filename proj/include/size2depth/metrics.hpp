#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "size2depth/detail/random.hpp"
#include "size2depth/error.hpp"

namespace size2depth {

inline constexpr int kDefaultEvalPoints = 10;

struct PixelCoord {
  int x = 0;
  int y = 0;

  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

struct MetricsReport {
  double mse = 0.0;                // on min-max normalised depths
  double cosine_similarity = 0.0;  // on raw depths; 0 when undefined
  bool cosine_defined = true;      // false when either vector has zero norm
  double pairwise_rank_accuracy = 0.0;
  std::size_t n_points = 0;
};

/// `count` distinct pixels, uniform without replacement, reproducible per seed.
inline std::vector<PixelCoord> sample_points(std::uint64_t seed, std::size_t count, int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorKind::dimension, "empty image");
  const std::size_t total = static_cast<std::size_t>(width) * height;
  if (count > total) {
    throw Error(ErrorKind::usage, "cannot sample " + std::to_string(count) + " points from " +
                                      std::to_string(total) + " pixels");
  }
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + detail::uniform_index(rng, total - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<PixelCoord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back({static_cast<int>(idx[i] % width), static_cast<int>(idx[i] / width)});
  }
  return out;
}

/// Values of a row-major field at the given coordinates.
inline std::vector<double> gather(std::span<const double> field, int width, std::span<const PixelCoord> points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(field[static_cast<std::size_t>(p.y) * width + p.x]);
  return out;
}

/// Maps values to [0,1] by min-max; a constant vector maps to 0.5.
inline std::vector<double> min_max_normalize(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  if (out.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double min = *lo;
  const double range = *hi - *lo;
  for (double& x : out) x = range > 0.0 ? (x - min) / range : 0.5;
  return out;
}

inline double mean_squared_error(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

/// Fraction of unordered pairs whose order agrees; ties count as agreement.
/// A single point has no pairs and scores 1.
inline double pairwise_rank_accuracy(std::span<const double> pred, std::span<const double> gt) {
  const std::size_t n = pred.size();
  if (n < 2) return 1.0;
  std::size_t agree = 0;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      const bool le = pred[p] <= pred[q] && gt[p] <= gt[q];
      const bool ge = pred[p] >= pred[q] && gt[p] >= gt[q];
      if (le || ge) ++agree;
    }
  }
  return static_cast<double>(agree) / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

inline MetricsReport evaluate(std::span<const double> pred, std::span<const double> gt) {
  if (pred.empty()) throw Error(ErrorKind::dimension, "no points to evaluate");
  if (pred.size() != gt.size()) {
    throw Error(ErrorKind::dimension, "prediction has " + std::to_string(pred.size()) +
                                          " points, ground truth " + std::to_string(gt.size()));
  }
  MetricsReport m;
  m.n_points = pred.size();
  m.mse = mean_squared_error(min_max_normalize(pred), min_max_normalize(gt));

  double dot = 0.0, np = 0.0, ng = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    dot += pred[i] * gt[i];
    np += pred[i] * pred[i];
    ng += gt[i] * gt[i];
  }
  if (np == 0.0 || ng == 0.0) {
    m.cosine_defined = false;
    m.cosine_similarity = 0.0;
  } else {
    m.cosine_similarity = std::clamp(dot / std::sqrt(np * ng), -1.0, 1.0);
  }
  m.pairwise_rank_accuracy = pairwise_rank_accuracy(pred, gt);
  return m;
}

}  // namespace size2depth
