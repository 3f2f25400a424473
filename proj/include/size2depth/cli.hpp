#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "size2depth/annotation.hpp"
#include "size2depth/crf.hpp"
#include "size2depth/error.hpp"
#include "size2depth/io.hpp"
#include "size2depth/metrics.hpp"
#include "size2depth/raster.hpp"
#include "size2depth/service.hpp"
#include "size2depth/study.hpp"

namespace size2depth::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kUsageError = 2 };

namespace detail {

struct SolveFlags {
  std::string image;
  std::string annotations;
  double lambda = 1.0;
  double beta = 10.0;
  int width = kDefaultWorkingWidth;
  int height = kDefaultWorkingHeight;
  double tolerance = 1e-8;
  int max_iterations = 10000;
};

struct Prepared {
  Raster raster;
  DepthTargets targets;
};

inline Prepared prepare(const SolveFlags& f) {
  if (!std::filesystem::exists(f.image)) throw Error(ErrorKind::io, "image not found: " + f.image);
  if (!std::filesystem::exists(f.annotations)) {
    throw Error(ErrorKind::io, "annotation file not found: " + f.annotations);
  }
  const auto bytes = io::read_bytes(f.image);
  Raster raster = load_and_resize(bytes, f.width, f.height);
  const AnnotationDocument doc = io::read_annotations(f.annotations);
  DepthTargets targets = targets_from_document(doc, raster.width, raster.height);
  return {std::move(raster), std::move(targets)};
}

inline CrfConfig config_of(const SolveFlags& f, double lambda, double beta) {
  CrfConfig c;
  c.lambda = lambda;
  c.beta = beta;
  c.solver_tolerance = f.tolerance;
  c.max_iterations = f.max_iterations;
  return c;
}

inline void add_solve_flags(CLI::App* cmd, SolveFlags& f, bool single) {
  cmd->add_option("--image", f.image, "PNG or JPEG input")->required();
  cmd->add_option("--annotations", f.annotations, "annotation JSON document")->required();
  if (single) {
    cmd->add_option("--lambda", f.lambda, "unary/binary tradeoff")->check(CLI::NonNegativeNumber)->capture_default_str();
    cmd->add_option("--beta", f.beta, "similarity sharpness")->check(CLI::NonNegativeNumber)->capture_default_str();
  }
  cmd->add_option("--width", f.width, "working width")->check(CLI::Range(2, 1 << 16))->capture_default_str();
  cmd->add_option("--height", f.height, "working height")->check(CLI::Range(2, 1 << 16))->capture_default_str();
  cmd->add_option("--tolerance", f.tolerance, "relative residual bound")
      ->check(CLI::Range(std::numeric_limits<double>::min(), 1.0 - 1e-12))
      ->capture_default_str();
  cmd->add_option("--max-iterations", f.max_iterations)->check(CLI::PositiveNumber)->capture_default_str();
}

inline std::uint64_t draw_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace detail

/// Entry point shared by the executable and the tests. Exit codes: 0 success,
/// 1 domain or input error, 2 usage error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Dense depth from per-patch real-world size labels", "size2depth"};
  app.require_subcommand(1);

  detail::SolveFlags solve_flags;
  std::string solve_out, solve_preview;
  auto* solve = app.add_subcommand("solve", "solve one depth map");
  detail::add_solve_flags(solve, solve_flags, true);
  solve->add_option("--out", solve_out, "output PFM path")->required();
  solve->add_option("--preview", solve_preview, "optional 16-bit PNG preview path");

  detail::SolveFlags sweep_flags;
  std::vector<double> lambdas, betas{10.0};
  std::string sweep_dir;
  auto* sweep = app.add_subcommand("sweep", "solve over a lambda x beta grid");
  detail::add_solve_flags(sweep, sweep_flags, false);
  sweep->add_option("--lambdas", lambdas, "lambda values")
      ->required()
      ->expected(1, -1)
      ->delimiter(',')
      ->check(CLI::NonNegativeNumber);
  sweep->add_option("--betas", betas, "beta values")->expected(1, -1)->delimiter(',')->check(CLI::NonNegativeNumber);
  sweep->add_option("--out-dir", sweep_dir, "output directory")->required();

  std::string pred_path, gt_path, image_id;
  std::size_t n_points = kDefaultEvalPoints;
  std::optional<std::uint64_t> eval_seed;
  bool eval_header = false;
  auto* eval = app.add_subcommand("eval", "compare a predicted depth map with ground truth at N points");
  eval->add_option("--pred", pred_path, "predicted PFM")->required();
  eval->add_option("--gt", gt_path, "ground-truth PFM")->required();
  eval->add_option("--n", n_points, "number of sampled points")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--seed", eval_seed, "sampling seed (drawn and printed when omitted)");
  eval->add_option("--image-id", image_id, "identifier for the CSV row (default: prediction file stem)");
  eval->add_flag("--header", eval_header, "print the CSV header first");

  std::string study_config, study_out;
  std::optional<std::uint64_t> study_seed;
  auto* study_cmd = app.add_subcommand("study", "size-vs-depth labelling noise study");
  study_cmd->add_option("--config", study_config, "study config JSON")->required();
  study_cmd->add_option("--out", study_out, "CSV output path (default: stdout)");
  study_cmd->add_option("--seed", study_seed, "scene seed, overrides the config");

  std::string host = "127.0.0.1";
  int port = 8080;
  int serve_width = kDefaultWorkingWidth, serve_height = kDefaultWorkingHeight;
  auto* serve = app.add_subcommand("serve", "run the annotation service");
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->check(CLI::Range(1, 65535))->capture_default_str();
  serve->add_option("--width", serve_width)->check(CLI::Range(2, 1 << 16))->capture_default_str();
  serve->add_option("--height", serve_height)->check(CLI::Range(2, 1 << 16))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*solve) {
      const auto start = std::chrono::steady_clock::now();
      const auto prepared = detail::prepare(solve_flags);
      const auto config = detail::config_of(solve_flags, solve_flags.lambda, solve_flags.beta);
      const DepthField field = solve_map(prepared.raster, prepared.targets, config);
      io::write_depth(field, solve_out);
      if (!solve_preview.empty()) io::write_depth_preview(field, solve_preview);
      const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      out << "wrote " << solve_out << " (" << field.width << "x" << field.height << ") residual "
          << io::format_number(field.residual) << " iterations " << field.iterations << " wall_ms "
          << io::format_number(ms) << "\n";
      return kOk;
    }

    if (*sweep) {
      const auto prepared = detail::prepare(sweep_flags);
      std::filesystem::create_directories(sweep_dir);
      std::string csv = io::csv_row({"lambda", "beta", "status", "unary_energy", "binary_energy", "total_energy",
                                     "residual", "iterations", "file", "error"});
      for (double lambda : lambdas) {
        for (double beta : betas) {
          const std::string name = "depth_l" + io::format_number(lambda) + "_b" + io::format_number(beta) + ".pfm";
          const auto config = detail::config_of(sweep_flags, lambda, beta);
          try {
            const SimilarityGraph graph = build_similarity(prepared.raster, beta);
            const DepthField field = solve_map(graph, prepared.targets, config);
            const EnergyTerms e = energy(graph, prepared.targets, field.y, lambda);
            io::write_depth(field, std::filesystem::path(sweep_dir) / name);
            csv += io::csv_row({io::format_number(lambda), io::format_number(beta), "ok", io::format_number(e.unary),
                                io::format_number(e.binary), io::format_number(e.total),
                                io::format_number(field.residual), std::to_string(field.iterations), name, ""});
          } catch (const Error& e) {
            csv += io::csv_row({io::format_number(lambda), io::format_number(beta), "failed", "", "", "", "", "", "",
                                e.what()});
          }
        }
      }
      const auto csv_path = std::filesystem::path(sweep_dir) / "sweep.csv";
      io::write_file(csv_path, csv);
      out << "wrote " << csv_path.string() << "\n";
      return kOk;
    }

    if (*eval) {
      const DepthField pred = io::read_depth(pred_path);
      const DepthField gt = io::read_depth(gt_path);
      if (pred.width != gt.width || pred.height != gt.height) {
        throw Error(ErrorKind::dimension, "prediction is " + std::to_string(pred.width) + "x" +
                                              std::to_string(pred.height) + " but ground truth is " +
                                              std::to_string(gt.width) + "x" + std::to_string(gt.height));
      }
      if (n_points > pred.y.size()) {
        err << "usage error: --n " << n_points << " exceeds the " << pred.y.size() << " pixels\n";
        return kUsageError;
      }
      if (!eval_seed) {
        eval_seed = detail::draw_seed();
        err << "seed " << *eval_seed << "\n";
      }
      const auto points = sample_points(*eval_seed, n_points, pred.width, pred.height);
      const MetricsReport m = evaluate(gather(pred.y, pred.width, points), gather(gt.y, gt.width, points));
      const bool has_params = io::has_depth_metadata(pred_path);
      if (image_id.empty()) image_id = std::filesystem::path(pred_path).stem().string();
      if (eval_header) out << io::csv_row({"image_id", "n_points", "mse", "cosine", "rank_accuracy", "lambda", "beta"});
      out << io::csv_row({image_id, std::to_string(m.n_points), io::format_number(m.mse),
                          m.cosine_defined ? io::format_number(m.cosine_similarity) : "",
                          io::format_number(m.pairwise_rank_accuracy),
                          has_params ? io::format_number(pred.config_used.lambda) : "",
                          has_params ? io::format_number(pred.config_used.beta) : ""});
      return kOk;
    }

    if (*study_cmd) {
      const std::string text = io::read_file(study_config);
      study::NoiseStudyConfig config = study::parse_config(text);
      if (study_seed) {
        config.scene_seed = *study_seed;
      } else if (!nlohmann::json::parse(text).contains("scene_seed")) {
        config.scene_seed = detail::draw_seed();
        err << "seed " << config.scene_seed << "\n";
      }
      const auto report = study::run_study(config);
      const std::string csv = study::report_csv(report);
      if (study_out.empty()) {
        out << csv;
      } else {
        io::write_file(study_out, csv);
      }
      err << "size arm mean mse " << io::format_number(report.size_arm.mse_mean) << ", depth arm mean mse "
          << io::format_number(report.depth_arm.mse_mean) << ", size arm wins "
          << io::format_number(report.size_win_fraction) << " of " << report.succeeded << " trials\n";
      return kOk;
    }

    if (*serve) {
      service::ServiceOptions options;
      options.working_width = serve_width;
      options.working_height = serve_height;
      err << "listening on http://" << host << ":" << port << "\n";
      if (!service::serve(host, port, options)) throw Error(ErrorKind::io, "cannot listen on port " + std::to_string(port));
      return kOk;
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.kind() == ErrorKind::usage ? kUsageError : kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kUsageError;
}

}  // namespace size2depth::cli
