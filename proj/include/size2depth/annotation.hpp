#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "size2depth/error.hpp"

namespace size2depth {

inline constexpr int kDefaultGridRows = 7;
inline constexpr int kDefaultGridCols = 7;

struct PatchIndex {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const PatchIndex&, const PatchIndex&) = default;
};

/// Half-open pixel rectangle [x, x + width) x [y, y + height).
struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Equal partition of an image into rows x cols patches. When the image size
/// is not divisible, the remainder pixels go to the last row / column patch.
class PatchGrid {
 public:
  PatchGrid(int rows, int cols, int image_width, int image_height)
      : rows_(rows), cols_(cols), image_width_(image_width), image_height_(image_height) {
    if (rows < 1 || cols < 1) throw Error(ErrorKind::dimension, "grid needs at least one row and column");
    if (image_width < 1 || image_height < 1) throw Error(ErrorKind::dimension, "empty image");
    if (rows > image_height || cols > image_width) {
      throw Error(ErrorKind::dimension, "grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                                            " is finer than the " + std::to_string(image_width) + "x" +
                                            std::to_string(image_height) + " image");
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int image_width() const { return image_width_; }
  int image_height() const { return image_height_; }
  std::size_t patch_count() const { return static_cast<std::size_t>(rows_) * cols_; }

  bool contains(PatchIndex p) const { return p.row >= 0 && p.row < rows_ && p.col >= 0 && p.col < cols_; }

  PixelRect rect(PatchIndex p) const {
    const int bw = image_width_ / cols_;
    const int bh = image_height_ / rows_;
    PixelRect r;
    r.x = p.col * bw;
    r.y = p.row * bh;
    r.width = p.col == cols_ - 1 ? image_width_ - r.x : bw;
    r.height = p.row == rows_ - 1 ? image_height_ - r.y : bh;
    return r;
  }

  PatchIndex patch_of(int x, int y) const {
    return {std::min(y / (image_height_ / rows_), rows_ - 1), std::min(x / (image_width_ / cols_), cols_ - 1)};
  }

  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;

 private:
  int rows_;
  int cols_;
  int image_width_;
  int image_height_;
};

/// A human label: real-world size (meters) of the dominant component of one
/// patch. `pixel_extent` is the component's size in the photo; when absent
/// the patch width is used.
struct SizeAnnotation {
  PatchIndex patch;
  double real_size = 0.0;
  std::optional<double> pixel_extent;
};

enum class DepthUnit { relative, meters };

inline const char* to_string(DepthUnit u) { return u == DepthUnit::meters ? "meters" : "relative"; }

/// Per-pixel unary targets. Unmasked entries of `d` are zero.
struct DepthTargets {
  int width = 0;
  int height = 0;
  std::vector<double> d;
  std::vector<std::uint8_t> mask;
  DepthUnit unit = DepthUnit::relative;

  std::size_t masked_count() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1)); }
};

/// depth = focal_length * real_size / pixel_extent. With focal_length 1 the
/// result is relative depth; a focal length in pixels makes it metric.
inline double size_to_depth(double real_size, double pixel_extent, double focal_length = 1.0) {
  if (!(real_size > 0.0)) throw Error(ErrorKind::domain, "real size must be positive");
  if (!(pixel_extent > 0.0)) throw Error(ErrorKind::domain, "pixel extent must be positive");
  if (!(focal_length > 0.0)) throw Error(ErrorKind::domain, "focal length must be positive");
  return focal_length * real_size / pixel_extent;
}

inline double size_to_depth(const PatchGrid& grid, const SizeAnnotation& a, double focal_length = 1.0) {
  const double extent = a.pixel_extent.value_or(static_cast<double>(grid.rect(a.patch).width));
  return size_to_depth(a.real_size, extent, focal_length);
}

/// Every pixel of an annotated patch gets that patch's depth and mask = 1.
inline DepthTargets targets_from_annotations(const PatchGrid& grid, std::span<const SizeAnnotation> annotations,
                                             double focal_length = 1.0,
                                             DepthUnit unit = DepthUnit::relative) {
  if (annotations.empty()) throw Error(ErrorKind::empty_constraint, "no patch is annotated");

  DepthTargets t;
  t.width = grid.image_width();
  t.height = grid.image_height();
  t.unit = unit;
  t.d.assign(static_cast<std::size_t>(t.width) * t.height, 0.0);
  t.mask.assign(t.d.size(), 0);

  std::set<PatchIndex> seen;
  for (const auto& a : annotations) {
    if (!grid.contains(a.patch)) {
      throw Error(ErrorKind::domain, "annotation references patch (" + std::to_string(a.patch.row) + "," +
                                         std::to_string(a.patch.col) + ") outside the grid");
    }
    if (!seen.insert(a.patch).second) {
      throw Error(ErrorKind::conflict, "patch (" + std::to_string(a.patch.row) + "," +
                                           std::to_string(a.patch.col) + ") is annotated twice");
    }
    const double depth = size_to_depth(grid, a, focal_length);
    const PixelRect r = grid.rect(a.patch);
    for (int y = r.y; y < r.y + r.height; ++y) {
      for (int x = r.x; x < r.x + r.width; ++x) {
        const auto i = static_cast<std::size_t>(y) * t.width + x;
        t.d[i] = depth;
        t.mask[i] = 1;
      }
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Annotation document: the JSON exchange format shared with the annotation UI.
// Unknown members are carried in `extra` so they survive a round trip.

struct AnnotationEntry {
  int row = 0;
  int col = 0;
  double real_size_m = 0.0;
  std::optional<double> pixel_extent;
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const AnnotationEntry&, const AnnotationEntry&) = default;
};

struct AnnotationDocument {
  int grid_rows = kDefaultGridRows;
  int grid_cols = kDefaultGridCols;
  nlohmann::json grid_extra = nlohmann::json::object();
  std::optional<double> focal_length;
  std::vector<AnnotationEntry> annotations;
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const AnnotationDocument&, const AnnotationDocument&) = default;
};

inline std::vector<SizeAnnotation> to_size_annotations(const AnnotationDocument& doc) {
  std::vector<SizeAnnotation> out;
  out.reserve(doc.annotations.size());
  for (const auto& e : doc.annotations) out.push_back({{e.row, e.col}, e.real_size_m, e.pixel_extent});
  return out;
}

/// Targets for a document over an image of the given working size.
inline DepthTargets targets_from_document(const AnnotationDocument& doc, int image_width, int image_height) {
  const PatchGrid grid(doc.grid_rows, doc.grid_cols, image_width, image_height);
  const auto ann = to_size_annotations(doc);
  return targets_from_annotations(grid, ann, doc.focal_length.value_or(1.0),
                                  doc.focal_length ? DepthUnit::meters : DepthUnit::relative);
}

}  // namespace size2depth
