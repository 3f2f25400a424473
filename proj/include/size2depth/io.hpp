#pragma once

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "json.hpp"
#include "size2depth/annotation.hpp"
#include "size2depth/crf.hpp"
#include "size2depth/error.hpp"

namespace size2depth::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  const std::string s = read_file(path);
  return {s.begin(), s.end()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "short write to " + path.string());
}

// ---------------------------------------------------------------------------
// Numbers and CSV

/// Shortest representation that round-trips to the same double.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

/// RFC 4180 quoting: fields containing a comma, quote or line break are quoted
/// and inner quotes doubled.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_row(std::initializer_list<std::string> fields) {
  std::string out;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out += ',';
    out += csv_field(f);
    first = false;
  }
  out += "\r\n";
  return out;
}

// ---------------------------------------------------------------------------
// PFM: grayscale "Pf", rows stored bottom to top, little-endian float32 with
// scale -1.0. Big-endian files (positive scale) are accepted on read.

struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major, top row first
};

inline std::string encode_pfm(int width, int height, std::span<const double> values) {
  if (width < 1 || height < 1 || values.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorKind::dimension, "PFM payload does not match its dimensions");
  }
  std::string out = "Pf\n" + std::to_string(width) + " " + std::to_string(height) + "\n-1.0\n";
  const std::size_t header = out.size();
  out.resize(header + values.size() * 4);
  char* dst = out.data() + header;
  for (int row = height - 1; row >= 0; --row) {
    for (int x = 0; x < width; ++x) {
      const double v = values[static_cast<std::size_t>(row) * width + x];
      if (!std::isfinite(v)) throw Error(ErrorKind::domain, "depth values must be finite");
      std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int k = 0; k < 4; ++k) *dst++ = static_cast<char>((bits >> (8 * k)) & 0xff);
    }
  }
  return out;
}

inline FloatImage decode_pfm(std::string_view bytes) {
  std::size_t pos = 0;
  auto token = [&]() -> std::string_view {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw Error(ErrorKind::decode, "truncated PFM header");
    return bytes.substr(start, pos - start);
  };
  auto integer = [&](std::string_view t) {
    int v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || v < 1) {
      throw Error(ErrorKind::decode, "bad PFM dimension '" + std::string(t) + "'");
    }
    return v;
  };

  const std::string_view tag = token();
  if (tag == "PF") throw Error(ErrorKind::decode, "colour PFM is not a depth map");
  if (tag != "Pf") throw Error(ErrorKind::decode, "not a PFM file");
  FloatImage img;
  img.width = integer(token());
  img.height = integer(token());
  const std::string scale_text(token());
  char* end = nullptr;
  const double scale = std::strtod(scale_text.c_str(), &end);
  if (end != scale_text.c_str() + scale_text.size() || scale == 0.0 || !std::isfinite(scale)) {
    throw Error(ErrorKind::decode, "bad PFM scale '" + scale_text + "'");
  }
  if (pos >= bytes.size()) throw Error(ErrorKind::decode, "truncated PFM header");
  ++pos;  // single whitespace byte ends the header

  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (bytes.size() - pos != n * 4) {
    throw Error(ErrorKind::dimension, "PFM payload is " + std::to_string(bytes.size() - pos) +
                                          " bytes, expected " + std::to_string(n * 4));
  }
  const bool little = scale < 0.0;
  img.values.resize(n);
  const auto* src = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (int row = img.height - 1; row >= 0; --row) {
    for (int x = 0; x < img.width; ++x) {
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) {
        const int shift = little ? 8 * k : 8 * (3 - k);
        bits |= static_cast<std::uint32_t>(src[k]) << shift;
      }
      src += 4;
      const float v = std::bit_cast<float>(bits);
      if (!std::isfinite(v)) throw Error(ErrorKind::domain, "PFM contains a non-finite value");
      img.values[static_cast<std::size_t>(row) * img.width + x] = v;
    }
  }
  return img;
}

/// 16-bit grayscale PNG, min-max normalised; a constant field is mid-gray.
/// Lossy by design and never read back.
inline std::string encode_preview_png(int width, int height, std::span<const double> values) {
  if (width < 1 || height < 1 || values.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorKind::dimension, "preview buffer does not match its dimensions");
  }
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  cv::Mat img(height, width, CV_16UC1);
  for (int y = 0; y < height; ++y) {
    auto* row = img.ptr<std::uint16_t>(y);
    for (int x = 0; x < width; ++x) {
      const double v = values[static_cast<std::size_t>(y) * width + x];
      row[x] = hi > lo ? static_cast<std::uint16_t>(std::lround((v - lo) / (hi - lo) * 65535.0)) : 32768;
    }
  }
  std::vector<std::uint8_t> buf;
  cv::imencode(".png", img, buf);
  return {buf.begin(), buf.end()};
}

// ---------------------------------------------------------------------------
// Depth files: the PFM plus a JSON sidecar (<path>.json) carrying the unit
// tag and the solve parameters. The sidecar is optional on read.

inline std::filesystem::path sidecar_path(const std::filesystem::path& pfm) {
  return std::filesystem::path(pfm.string() + ".json");
}

inline nlohmann::json depth_metadata(const DepthField& field) {
  return {
      {"format", "pfm"},
      {"width", field.width},
      {"height", field.height},
      {"unit", to_string(field.unit)},
      {"lambda", field.config_used.lambda},
      {"beta", field.config_used.beta},
      {"solver_tolerance", field.config_used.solver_tolerance},
      {"max_iterations", field.config_used.max_iterations},
      {"residual", field.residual},
      {"iterations", field.iterations},
  };
}

inline void write_depth(const DepthField& field, const std::filesystem::path& path) {
  write_file(path, encode_pfm(field.width, field.height, field.y));
  write_file(sidecar_path(path), depth_metadata(field).dump(2) + "\n");
}

inline void write_depth_preview(const DepthField& field, const std::filesystem::path& path) {
  write_file(path, encode_preview_png(field.width, field.height, field.y));
}

/// Reads a PFM depth map. When a sidecar exists its unit and parameters are
/// restored and its dimensions must agree with the PFM.
inline DepthField read_depth(const std::filesystem::path& path) {
  const FloatImage img = decode_pfm(read_file(path));
  DepthField field;
  field.width = img.width;
  field.height = img.height;
  field.y = img.values;

  const auto meta_path = sidecar_path(path);
  if (std::filesystem::exists(meta_path)) {
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(read_file(meta_path));
      if (meta.at("width").get<int>() != img.width || meta.at("height").get<int>() != img.height) {
        throw Error(ErrorKind::dimension, "sidecar dimensions disagree with " + path.string());
      }
      field.unit = meta.value("unit", "relative") == "meters" ? DepthUnit::meters : DepthUnit::relative;
      field.config_used.lambda = meta.value("lambda", field.config_used.lambda);
      field.config_used.beta = meta.value("beta", field.config_used.beta);
      field.config_used.solver_tolerance = meta.value("solver_tolerance", field.config_used.solver_tolerance);
      field.config_used.max_iterations = meta.value("max_iterations", field.config_used.max_iterations);
      field.residual = meta.value("residual", 0.0);
      field.iterations = meta.value("iterations", 0);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::decode, "bad sidecar " + meta_path.string() + ": " + e.what());
    }
  }
  return field;
}

inline bool has_depth_metadata(const std::filesystem::path& path) {
  return std::filesystem::exists(sidecar_path(path));
}

// ---------------------------------------------------------------------------
// Annotation documents

namespace detail {

inline int require_int(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < INT32_MIN || v > INT32_MAX) throw SchemaError(path, "integer out of range");
  return static_cast<int>(v);
}

inline double require_positive(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  const double v = j.get<double>();
  if (!(v > 0.0) || !std::isfinite(v)) throw SchemaError(path, "must be a positive finite number");
  return v;
}

inline std::optional<double> optional_positive(const nlohmann::json& obj, const char* key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return require_positive(*it, path);
}

inline nlohmann::json extras(const nlohmann::json& obj, std::initializer_list<const char*> known) {
  nlohmann::json out = nlohmann::json::object();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool is_known = false;
    for (const char* k : known) is_known = is_known || it.key() == k;
    if (!is_known) out[it.key()] = it.value();
  }
  return out;
}

inline const nlohmann::json& require_member(const nlohmann::json& obj, const char* key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path, "missing required field");
  return *it;
}

}  // namespace detail

/// Validates and converts a parsed document. Throws SchemaError naming the
/// offending field; duplicate patches raise a SchemaError of kind conflict.
inline AnnotationDocument annotation_document_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("$", "document must be a JSON object");
  AnnotationDocument doc;

  const auto& grid = detail::require_member(j, "grid", "grid");
  if (!grid.is_object()) throw SchemaError("grid", "expected an object");
  doc.grid_rows = detail::require_int(detail::require_member(grid, "rows", "grid.rows"), "grid.rows");
  doc.grid_cols = detail::require_int(detail::require_member(grid, "cols", "grid.cols"), "grid.cols");
  if (doc.grid_rows < 1) throw SchemaError("grid.rows", "must be >= 1");
  if (doc.grid_cols < 1) throw SchemaError("grid.cols", "must be >= 1");
  doc.grid_extra = detail::extras(grid, {"rows", "cols"});

  doc.focal_length = detail::optional_positive(j, "focal_length", "focal_length");

  const auto& list = detail::require_member(j, "annotations", "annotations");
  if (!list.is_array()) throw SchemaError("annotations", "expected an array");
  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string base = "annotations[" + std::to_string(i) + "]";
    const auto& a = list[i];
    if (!a.is_object()) throw SchemaError(base, "expected an object");
    AnnotationEntry e;
    e.row = detail::require_int(detail::require_member(a, "row", base + ".row"), base + ".row");
    e.col = detail::require_int(detail::require_member(a, "col", base + ".col"), base + ".col");
    if (e.row < 0 || e.row >= doc.grid_rows) throw SchemaError(base + ".row", "outside the grid");
    if (e.col < 0 || e.col >= doc.grid_cols) throw SchemaError(base + ".col", "outside the grid");
    e.real_size_m = detail::require_positive(detail::require_member(a, "real_size_m", base + ".real_size_m"),
                                             base + ".real_size_m");
    e.pixel_extent = detail::optional_positive(a, "pixel_extent", base + ".pixel_extent");
    e.extra = detail::extras(a, {"row", "col", "real_size_m", "pixel_extent"});
    if (!seen.insert({e.row, e.col}).second) {
      throw SchemaError(base, "patch (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                                  ") is annotated more than once", ErrorKind::conflict);
    }
    doc.annotations.push_back(std::move(e));
  }
  doc.extra = detail::extras(j, {"grid", "focal_length", "annotations"});
  return doc;
}

inline AnnotationDocument parse_annotation_document(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("$", std::string("malformed JSON: ") + e.what());
  }
  return annotation_document_from_json(j);
}

inline nlohmann::json to_json(const AnnotationDocument& doc) {
  nlohmann::json j = doc.extra;
  nlohmann::json grid = doc.grid_extra;
  grid["rows"] = doc.grid_rows;
  grid["cols"] = doc.grid_cols;
  j["grid"] = std::move(grid);
  j["focal_length"] = doc.focal_length ? nlohmann::json(*doc.focal_length) : nlohmann::json(nullptr);
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : doc.annotations) {
    nlohmann::json a = e.extra;
    a["row"] = e.row;
    a["col"] = e.col;
    a["real_size_m"] = e.real_size_m;
    a["pixel_extent"] = e.pixel_extent ? nlohmann::json(*e.pixel_extent) : nlohmann::json(nullptr);
    list.push_back(std::move(a));
  }
  j["annotations"] = std::move(list);
  return j;
}

/// Deterministic serialisation: keys sorted, two-space indent, trailing newline.
inline std::string serialize_annotation_document(const AnnotationDocument& doc) {
  return to_json(doc).dump(2) + "\n";
}

inline void write_annotations(const AnnotationDocument& doc, const std::filesystem::path& path) {
  write_file(path, serialize_annotation_document(doc));
}

inline AnnotationDocument read_annotations(const std::filesystem::path& path) {
  return parse_annotation_document(read_file(path));
}

}  // namespace size2depth::io
