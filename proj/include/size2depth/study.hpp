#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "size2depth/annotation.hpp"
#include "size2depth/crf.hpp"
#include "size2depth/detail/random.hpp"
#include "size2depth/error.hpp"
#include "size2depth/io.hpp"
#include "size2depth/metrics.hpp"
#include "size2depth/raster.hpp"

// Monte-Carlo comparison of size labelling against direct depth labelling on
// synthetic scenes. Default error rates are the measured human relative errors
// (8% for sizes, 21% for depths); the Gaussian noise model on top of them is an
// assumption of this simulation.
namespace size2depth::study {

inline constexpr double kMinSceneDepth = 1.0;
inline constexpr double kMaxSceneDepth = 10.0;
inline constexpr const char* kNoiseModelNote =
    "assumed noise model: multiplicative gaussian on the labelled quantity, truncated at 3 sigma";

struct NoiseStudyConfig {
  double depth_label_rel_error = 0.21;
  double size_label_rel_error = 0.08;
  int trials = 200;
  std::uint64_t scene_seed = 1;
  int grid_rows = kDefaultGridRows;
  int grid_cols = kDefaultGridCols;
  int width = kDefaultWorkingWidth;
  int height = kDefaultWorkingHeight;
  std::size_t eval_points = 0;  // 0 evaluates every pixel
  unsigned threads = 0;         // 0 uses the hardware concurrency
  CrfConfig crf;

  void validate() const {
    auto fraction = [](double v, const char* name) {
      if (!(v >= 0.0 && v < 1.0)) throw SchemaError(name, "must lie in [0,1)");
    };
    fraction(depth_label_rel_error, "depth_label_rel_error");
    fraction(size_label_rel_error, "size_label_rel_error");
    if (trials < 1) throw SchemaError("trials", "must be >= 1");
    check_raster_dimensions(width, height);
    (void)PatchGrid{grid_rows, grid_cols, width, height};
    if (eval_points > static_cast<std::size_t>(width) * height) {
      throw SchemaError("eval_points", "exceeds the pixel count");
    }
    crf.validate();
  }
};

struct SyntheticScene {
  Raster raster;
  std::vector<double> gt_depth;
  PatchGrid grid;
  std::vector<double> patch_mean_depth;  // row-major over patches
  std::vector<double> gt_patch_sizes;    // size_to_depth(size, patch width) == mean depth
};

/// Ground plane receding towards the top of the image plus fronto-parallel
/// rectangles at random depths, painted far to near. Each surface has its own
/// colour, so intensity edges coincide with depth discontinuities.
inline SyntheticScene generate_scene(std::uint64_t seed, int width, int height, int grid_rows, int grid_cols) {
  check_raster_dimensions(width, height);
  PatchGrid grid(grid_rows, grid_cols, width, height);
  std::mt19937_64 rng(seed);
  using detail::uniform;

  const double far = uniform(rng, 7.0, 9.5);
  const double near = uniform(rng, 1.5, 3.0);
  const Rgb ground{uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8)};

  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<double> depth(n);
  std::vector<Rgb> rgb(n);
  for (int y = 0; y < height; ++y) {
    const double t = static_cast<double>(y) / (height - 1);
    const double shade = 0.7 + 0.3 * t;
    for (int x = 0; x < width; ++x) {
      const auto i = static_cast<std::size_t>(y) * width + x;
      depth[i] = far + (near - far) * t;
      rgb[i] = {ground[0] * shade, ground[1] * shade, ground[2] * shade};
    }
  }

  struct Box {
    int x0, y0, x1, y1;
    double depth;
    Rgb colour;
  };
  const int count = 2 + static_cast<int>(detail::uniform_index(rng, 4));
  std::vector<Box> boxes;
  for (int k = 0; k < count; ++k) {
    const int bw = std::max(1, static_cast<int>(uniform(rng, width / 6.0, width / 2.0)));
    const int bh = std::max(1, static_cast<int>(uniform(rng, height / 6.0, height / 2.0)));
    const int x0 = static_cast<int>(detail::uniform_index(rng, static_cast<std::uint64_t>(width - bw + 1)));
    const int y0 = static_cast<int>(detail::uniform_index(rng, static_cast<std::uint64_t>(height - bh + 1)));
    const double d = uniform(rng, 1.5, 9.5);
    const Rgb c{uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95)};
    boxes.push_back({x0, y0, x0 + bw, y0 + bh, d, c});
  }
  std::sort(boxes.begin(), boxes.end(), [](const Box& a, const Box& b) { return a.depth > b.depth; });
  for (const auto& b : boxes) {
    for (int y = b.y0; y < b.y1; ++y) {
      for (int x = b.x0; x < b.x1; ++x) {
        const auto i = static_cast<std::size_t>(y) * width + x;
        depth[i] = b.depth;
        rgb[i] = b.colour;
      }
    }
  }
  for (double& d : depth) d = std::clamp(d, kMinSceneDepth, kMaxSceneDepth);

  SyntheticScene scene{make_raster(width, height, std::move(rgb)), std::move(depth), grid, {}, {}};
  for (int r = 0; r < grid.rows(); ++r) {
    for (int c = 0; c < grid.cols(); ++c) {
      const PixelRect rect = grid.rect({r, c});
      double sum = 0.0;
      for (int y = rect.y; y < rect.y + rect.height; ++y) {
        for (int x = rect.x; x < rect.x + rect.width; ++x) sum += scene.gt_depth[static_cast<std::size_t>(y) * width + x];
      }
      const double mean = sum / (static_cast<double>(rect.width) * rect.height);
      scene.patch_mean_depth.push_back(mean);
      scene.gt_patch_sizes.push_back(mean * rect.width);
    }
  }
  return scene;
}

/// Unary targets from one depth label per patch (the direct depth-labelling arm).
inline DepthTargets targets_from_patch_depths(const PatchGrid& grid, std::span<const double> patch_depths) {
  if (patch_depths.size() != grid.patch_count()) throw Error(ErrorKind::dimension, "one depth per patch required");
  DepthTargets t;
  t.width = grid.image_width();
  t.height = grid.image_height();
  t.d.assign(static_cast<std::size_t>(t.width) * t.height, 0.0);
  t.mask.assign(t.d.size(), 1);
  for (int y = 0; y < t.height; ++y) {
    for (int x = 0; x < t.width; ++x) {
      const PatchIndex p = grid.patch_of(x, y);
      t.d[static_cast<std::size_t>(y) * t.width + x] = patch_depths[static_cast<std::size_t>(p.row) * grid.cols() + p.col];
    }
  }
  return t;
}

struct TrialResult {
  int trial = 0;
  bool ok = false;
  std::string error;
  MetricsReport size_arm;
  MetricsReport depth_arm;
};

struct ArmSummary {
  double mse_mean = 0.0, mse_std = 0.0;
  double cosine_mean = 0.0, cosine_std = 0.0;
  double rank_mean = 0.0, rank_std = 0.0;
};

struct StudyReport {
  NoiseStudyConfig config;
  std::vector<TrialResult> trials;
  std::size_t succeeded = 0;
  ArmSummary size_arm;
  ArmSummary depth_arm;
  double size_win_fraction = 0.0;  // trials where the size arm has strictly lower MSE
  double paired_mse_diff_mean = 0.0;  // size MSE minus depth MSE
  double paired_mse_diff_stderr = 0.0;
};

namespace detail {

// Multiplicative factor 1 + eps, eps ~ N(0, sigma) truncated at 3 sigma and
// kept above -0.95 so labels stay positive.
inline double noise_factor(std::mt19937_64& rng, double sigma) {
  const double z = std::clamp(size2depth::detail::standard_normal(rng), -3.0, 3.0);
  return 1.0 + std::max(sigma * z, -0.95);
}

inline void mean_std(const std::vector<double>& v, double& mean, double& std) {
  mean = 0.0;
  std = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  std = std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline ArmSummary summarize(const std::vector<const MetricsReport*>& arm) {
  std::vector<double> mse, cos, rank;
  for (const auto* m : arm) {
    mse.push_back(m->mse);
    cos.push_back(m->cosine_similarity);
    rank.push_back(m->pairwise_rank_accuracy);
  }
  ArmSummary s;
  mean_std(mse, s.mse_mean, s.mse_std);
  mean_std(cos, s.cosine_mean, s.cosine_std);
  mean_std(rank, s.rank_mean, s.rank_std);
  return s;
}

}  // namespace detail

/// One trial: a fresh scene, then both labelling arms through the CRF.
inline TrialResult run_trial(const NoiseStudyConfig& config, int trial) {
  using size2depth::detail::mix_seed;
  TrialResult result;
  result.trial = trial;
  const std::uint64_t trial_seed = mix_seed(config.scene_seed, static_cast<std::uint64_t>(trial));
  try {
    const SyntheticScene scene =
        generate_scene(trial_seed, config.width, config.height, config.grid_rows, config.grid_cols);
    const SimilarityGraph graph = build_similarity(scene.raster, config.crf.beta);

    std::vector<PixelCoord> points;
    if (config.eval_points > 0) {
      points = sample_points(mix_seed(trial_seed, 3), config.eval_points, config.width, config.height);
    }
    auto score = [&](const DepthField& f) {
      if (points.empty()) return evaluate(f.y, scene.gt_depth);
      return evaluate(gather(f.y, f.width, points), gather(scene.gt_depth, f.width, points));
    };

    std::mt19937_64 size_rng(mix_seed(trial_seed, 1));
    std::vector<SizeAnnotation> labels;
    for (int r = 0; r < scene.grid.rows(); ++r) {
      for (int c = 0; c < scene.grid.cols(); ++c) {
        const double size = scene.gt_patch_sizes[static_cast<std::size_t>(r) * scene.grid.cols() + c];
        labels.push_back({{r, c}, size * detail::noise_factor(size_rng, config.size_label_rel_error), std::nullopt});
      }
    }
    result.size_arm = score(solve_map(graph, targets_from_annotations(scene.grid, labels), config.crf));

    std::mt19937_64 depth_rng(mix_seed(trial_seed, 2));
    std::vector<double> depths;
    for (double d : scene.patch_mean_depth) depths.push_back(d * detail::noise_factor(depth_rng, config.depth_label_rel_error));
    result.depth_arm = score(solve_map(graph, targets_from_patch_depths(scene.grid, depths), config.crf));
    result.ok = true;
  } catch (const std::exception& e) {
    result.error = e.what();
  }
  return result;
}

/// Runs every trial (in parallel when threads allow) and aggregates in trial
/// order, so the report depends only on the config.
inline StudyReport run_study(const NoiseStudyConfig& config) {
  config.validate();
  StudyReport report;
  report.config = config;
  report.trials.resize(static_cast<std::size_t>(config.trials));

  unsigned workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(config.trials));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int t = next++; t < config.trials; t = next++) report.trials[static_cast<std::size_t>(t)] = run_trial(config, t);
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
  }

  std::vector<const MetricsReport*> size_arm, depth_arm;
  std::vector<double> diffs;
  std::size_t wins = 0;
  for (const auto& t : report.trials) {
    if (!t.ok) continue;
    size_arm.push_back(&t.size_arm);
    depth_arm.push_back(&t.depth_arm);
    diffs.push_back(t.size_arm.mse - t.depth_arm.mse);
    if (t.size_arm.mse < t.depth_arm.mse) ++wins;
  }
  report.succeeded = diffs.size();
  report.size_arm = detail::summarize(size_arm);
  report.depth_arm = detail::summarize(depth_arm);
  if (!diffs.empty()) {
    report.size_win_fraction = static_cast<double>(wins) / static_cast<double>(diffs.size());
    double sd = 0.0;
    detail::mean_std(diffs, report.paired_mse_diff_mean, sd);
    report.paired_mse_diff_stderr = sd / std::sqrt(static_cast<double>(diffs.size()));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Config document and CSV report

/// Every member is optional; absent members keep their defaults.
inline NoiseStudyConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("$", "config must be a JSON object");
  NoiseStudyConfig c;
  auto number = [](const nlohmann::json& obj, const char* key, const std::string& path, auto& out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    using T = std::decay_t<decltype(out)>;
    if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw SchemaError(path, "expected a number");
    } else {
      if (!it->is_number_integer()) throw SchemaError(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->get<std::int64_t>() < 0) throw SchemaError(path, "must be non-negative");
      }
    }
    out = it->get<T>();
  };
  number(j, "depth_label_rel_error", "depth_label_rel_error", c.depth_label_rel_error);
  number(j, "size_label_rel_error", "size_label_rel_error", c.size_label_rel_error);
  number(j, "trials", "trials", c.trials);
  number(j, "scene_seed", "scene_seed", c.scene_seed);
  number(j, "width", "width", c.width);
  number(j, "height", "height", c.height);
  number(j, "eval_points", "eval_points", c.eval_points);
  number(j, "threads", "threads", c.threads);
  if (const auto g = j.find("grid"); g != j.end()) {
    if (!g->is_object()) throw SchemaError("grid", "expected an object");
    number(*g, "rows", "grid.rows", c.grid_rows);
    number(*g, "cols", "grid.cols", c.grid_cols);
  }
  if (const auto crf = j.find("crf"); crf != j.end()) {
    if (!crf->is_object()) throw SchemaError("crf", "expected an object");
    number(*crf, "lambda", "crf.lambda", c.crf.lambda);
    number(*crf, "beta", "crf.beta", c.crf.beta);
    number(*crf, "solver_tolerance", "crf.solver_tolerance", c.crf.solver_tolerance);
    number(*crf, "max_iterations", "crf.max_iterations", c.crf.max_iterations);
  }
  try {
    c.validate();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError("$", e.what());
  }
  return c;
}

inline NoiseStudyConfig parse_config(std::string_view text) {
  try {
    return config_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("$", std::string("malformed JSON: ") + e.what());
  }
}

inline std::string report_csv(const StudyReport& r) {
  using io::csv_row;
  using io::format_number;
  std::string out = csv_row({"row_type", "trial", "status", "size_mse", "size_cosine", "size_rank_accuracy",
                             "depth_mse", "depth_cosine", "depth_rank_accuracy", "size_wins_mse", "note"});
  for (const auto& t : r.trials) {
    if (t.ok) {
      out += csv_row({"trial", std::to_string(t.trial), "ok", format_number(t.size_arm.mse),
                      format_number(t.size_arm.cosine_similarity), format_number(t.size_arm.pairwise_rank_accuracy),
                      format_number(t.depth_arm.mse), format_number(t.depth_arm.cosine_similarity),
                      format_number(t.depth_arm.pairwise_rank_accuracy),
                      t.size_arm.mse < t.depth_arm.mse ? "1" : "0", ""});
    } else {
      out += csv_row({"trial", std::to_string(t.trial), "failed", "", "", "", "", "", "", "", t.error});
    }
  }
  const auto& s = r.size_arm;
  const auto& d = r.depth_arm;
  out += csv_row({"mean", "", std::to_string(r.succeeded), format_number(s.mse_mean), format_number(s.cosine_mean),
                  format_number(s.rank_mean), format_number(d.mse_mean), format_number(d.cosine_mean),
                  format_number(d.rank_mean), "", ""});
  out += csv_row({"stddev", "", std::to_string(r.succeeded), format_number(s.mse_std), format_number(s.cosine_std),
                  format_number(s.rank_std), format_number(d.mse_std), format_number(d.cosine_std),
                  format_number(d.rank_std), "", ""});
  out += csv_row({"summary", std::to_string(r.trials.size()),
                  std::to_string(r.trials.size() - r.succeeded) + " failed", "", "", "", "", "", "",
                  format_number(r.size_win_fraction),
                  std::string(kNoiseModelNote) + "; size rel error " + format_number(r.config.size_label_rel_error) +
                      ", depth rel error " + format_number(r.config.depth_label_rel_error) +
                      "; paired mse diff " + format_number(r.paired_mse_diff_mean) + " +/- " +
                      format_number(r.paired_mse_diff_stderr) + " (stderr)"});
  return out;
}

}  // namespace size2depth::study
