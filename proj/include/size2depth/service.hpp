#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "size2depth/annotation.hpp"
#include "size2depth/crf.hpp"
#include "size2depth/error.hpp"
#include "size2depth/io.hpp"
#include "size2depth/raster.hpp"

// Local HTTP API behind the annotation UI. Sessions live in memory only and
// are evicted after an idle period.
namespace size2depth::service {

using Clock = std::chrono::steady_clock;

inline constexpr std::size_t kMaxUploadBytes = 20u * 1024u * 1024u;

struct ServiceOptions {
  int working_width = kDefaultWorkingWidth;
  int working_height = kDefaultWorkingHeight;
  std::chrono::seconds idle_timeout{3600};
  std::size_t max_upload_bytes = kMaxUploadBytes;
  CrfConfig solver_defaults;
  std::function<Clock::time_point()> now = [] { return Clock::now(); };
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;

  std::string header(std::string_view name) const {
    for (const auto& [k, v] : headers) {
      if (k == name) return v;
    }
    return {};
  }
};

inline Response json_response(int status, const nlohmann::json& body) {
  return {status, "application/json", body.dump() + "\n", {}};
}

inline Response error_response(int status, const std::string& message, const std::string& field = {}) {
  nlohmann::json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  return json_response(status, body);
}

struct SolveResult {
  DepthField field;
  EnergyTerms energy;
  std::uint64_t revision = 0;
  std::string pfm;
  std::string png;
};

struct Session {
  Session(Raster r, PatchGrid g, int sw, int sh)
      : raster(std::move(r)), grid(g), source_width(sw), source_height(sh) {}

  std::string id;
  Raster raster;
  PatchGrid grid;
  int source_width = 0;
  int source_height = 0;
  AnnotationDocument annotations;
  std::uint64_t revision = 0;
  std::optional<SolveResult> latest;
  Clock::time_point last_access;
  std::mutex mutex;  // serialises mutations and solves of this session
};

class SessionService {
 public:
  explicit SessionService(ServiceOptions options = {}) : options_(std::move(options)), rng_(std::random_device{}()) {}

  const ServiceOptions& options() const { return options_; }

  Response create_session(std::span<const std::uint8_t> image, int rows = kDefaultGridRows,
                          int cols = kDefaultGridCols) {
    evict_idle();
    if (image.size() > options_.max_upload_bytes) return error_response(413, "upload exceeds 20 MB");
    auto session = std::shared_ptr<Session>();
    try {
      const Raster full = decode_image(image);
      Raster working = resize_area(full, options_.working_width, options_.working_height);
      PatchGrid grid(rows, cols, working.width, working.height);
      session = std::make_shared<Session>(std::move(working), grid, full.width, full.height);
    } catch (const Error& e) {
      return error_response(400, e.what());
    }
    session->annotations.grid_rows = rows;
    session->annotations.grid_cols = cols;
    session->last_access = options_.now();
    {
      std::unique_lock lock(sessions_mutex_);
      do {
        session->id = new_id();
      } while (sessions_.contains(session->id));
      sessions_.emplace(session->id, session);
    }
    std::lock_guard guard(session->mutex);
    return json_response(201, describe(*session));
  }

  Response get_session(const std::string& id) {
    auto s = find(id);
    if (!s) return not_found(id);
    std::lock_guard guard(s->mutex);
    return json_response(200, describe(*s));
  }

  /// Replaces the annotation set atomically. An empty list is accepted; the
  /// solve endpoint rejects it later.
  Response put_annotations(const std::string& id, std::string_view body) {
    auto s = find(id);
    if (!s) return not_found(id);
    AnnotationDocument doc;
    try {
      doc = io::parse_annotation_document(body);
    } catch (const SchemaError& e) {
      return error_response(422, e.what(), e.field());
    }
    std::lock_guard guard(s->mutex);
    if (doc.grid_rows != s->grid.rows() || doc.grid_cols != s->grid.cols()) {
      return error_response(422, "grid does not match the session grid", "grid");
    }
    s->annotations = std::move(doc);
    ++s->revision;
    return json_response(200, {{"id", s->id}, {"revision", s->revision}});
  }

  /// Body (optional JSON) may carry "lambda" and "beta"; missing values use
  /// the service defaults.
  Response solve(const std::string& id, std::string_view body) {
    auto s = find(id);
    if (!s) return not_found(id);
    CrfConfig config = options_.solver_defaults;
    try {
      if (!body.empty()) {
        const auto j = nlohmann::json::parse(body);
        if (!j.is_object()) return error_response(400, "solve parameters must be a JSON object");
        for (const char* key : {"lambda", "beta"}) {
          if (j.contains(key) && !j[key].is_number()) return error_response(400, "expected a number", key);
        }
        config.lambda = j.value("lambda", config.lambda);
        config.beta = j.value("beta", config.beta);
      }
      config.validate();
    } catch (const nlohmann::json::exception& e) {
      return error_response(400, e.what());
    } catch (const Error& e) {
      return error_response(400, e.what());
    }

    std::lock_guard guard(s->mutex);
    if (s->annotations.annotations.empty()) return error_response(409, "label at least one patch before solving");
    try {
      const DepthTargets targets = targets_from_document(s->annotations, s->raster.width, s->raster.height);
      const SimilarityGraph graph = build_similarity(s->raster, config.beta);
      SolveResult result;
      result.field = solve_map(graph, targets, config);
      result.energy = energy(graph, targets, result.field.y, config.lambda);
      result.revision = s->revision;
      result.pfm = io::encode_pfm(result.field.width, result.field.height, result.field.y);
      result.png = io::encode_preview_png(result.field.width, result.field.height, result.field.y);
      s->latest = std::move(result);
    } catch (const SolverError& e) {
      return error_response(500, e.what());
    } catch (const Error& e) {
      return error_response(422, e.what());
    }
    return json_response(200, describe_solve(*s));
  }

  Response depth_pfm(const std::string& id) { return depth_file(id, "application/octet-stream", &SolveResult::pfm); }
  Response depth_png(const std::string& id) { return depth_file(id, "image/png", &SolveResult::png); }

  /// Drops sessions idle for longer than the timeout; returns how many.
  std::size_t evict_idle() {
    const auto now = options_.now();
    std::unique_lock lock(sessions_mutex_);
    return std::erase_if(sessions_, [&](const auto& kv) {
      return now - kv.second->last_access > options_.idle_timeout;
    });
  }

  std::size_t session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
  }

  /// Registers the endpoints on an httplib server.
  void bind(httplib::Server& server) {
    server.set_payload_max_length(options_.max_upload_bytes);
    auto send = [](httplib::Response& res, const Response& r) {
      res.status = r.status;
      for (const auto& [k, v] : r.headers) res.set_header(k, v);
      res.set_content(r.body, r.content_type);
    };

    server.Post("/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
      std::string image;
      int rows = kDefaultGridRows, cols = kDefaultGridCols;
      auto field = [&](const std::string& name) -> std::optional<std::string> {
        if (req.is_multipart_form_data() && req.has_file(name)) return req.get_file_value(name).content;
        if (req.has_param(name)) return req.get_param_value(name);
        return std::nullopt;
      };
      if (req.is_multipart_form_data()) {
        if (!req.has_file("image")) return send(res, error_response(400, "multipart upload needs an 'image' part"));
        image = req.get_file_value("image").content;
      } else {
        image = req.body;
      }
      try {
        if (auto r = field("rows")) rows = std::stoi(*r);
        if (auto c = field("cols")) cols = std::stoi(*c);
      } catch (const std::exception&) {
        return send(res, error_response(400, "rows and cols must be integers"));
      }
      const auto* bytes = reinterpret_cast<const std::uint8_t*>(image.data());
      send(res, create_session({bytes, image.size()}, rows, cols));
    });
    server.Get(R"(/sessions/([0-9a-f]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, get_session(req.matches[1]));
    });
    server.Put(R"(/sessions/([0-9a-f]+)/annotations)",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                 send(res, put_annotations(req.matches[1], req.body));
               });
    server.Post(R"(/sessions/([0-9a-f]+)/solve)", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, solve(req.matches[1], req.body));
    });
    server.Get(R"(/sessions/([0-9a-f]+)/depth\.pfm)", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, depth_pfm(req.matches[1]));
    });
    server.Get(R"(/sessions/([0-9a-f]+)/depth\.png)", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, depth_png(req.matches[1]));
    });
  }

 private:
  std::shared_ptr<Session> find(const std::string& id) {
    evict_idle();
    std::unique_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) return nullptr;
    it->second->last_access = options_.now();
    return it->second;
  }

  static Response not_found(const std::string& id) { return error_response(404, "unknown session " + id); }

  std::string new_id() {
    std::lock_guard guard(rng_mutex_);
    static constexpr char hex[] = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 2; ++i) {
      std::uint64_t v = rng_();
      for (int k = 0; k < 16; ++k, v >>= 4) id += hex[v & 0xf];
    }
    return id;
  }

  nlohmann::json describe(const Session& s) const {
    nlohmann::json patches = nlohmann::json::array();
    for (int r = 0; r < s.grid.rows(); ++r) {
      for (int c = 0; c < s.grid.cols(); ++c) {
        const PixelRect rect = s.grid.rect({r, c});
        patches.push_back({{"row", r}, {"col", c}, {"x", rect.x}, {"y", rect.y}, {"width", rect.width},
                           {"height", rect.height}});
      }
    }
    nlohmann::json out = {
        {"id", s.id},
        {"revision", s.revision},
        {"width", s.raster.width},
        {"height", s.raster.height},
        {"source_width", s.source_width},
        {"source_height", s.source_height},
        {"grid", {{"rows", s.grid.rows()}, {"cols", s.grid.cols()}}},
        {"patches", std::move(patches)},
        {"annotations", io::to_json(s.annotations)},
        {"latest", nullptr},
    };
    if (s.latest) out["latest"] = describe_solve(s);
    return out;
  }

  static nlohmann::json describe_solve(const Session& s) {
    const SolveResult& r = *s.latest;
    return {
        {"revision", r.revision},
        {"stale", r.revision != s.revision},
        {"lambda", r.field.config_used.lambda},
        {"beta", r.field.config_used.beta},
        {"unary_energy", r.energy.unary},
        {"binary_energy", r.energy.binary},
        {"total_energy", r.energy.total},
        {"residual", r.field.residual},
        {"iterations", r.field.iterations},
        {"unit", to_string(r.field.unit)},
        {"pfm_url", "/sessions/" + s.id + "/depth.pfm"},
        {"png_url", "/sessions/" + s.id + "/depth.png"},
    };
  }

  Response depth_file(const std::string& id, const char* content_type, std::string SolveResult::*member) {
    auto s = find(id);
    if (!s) return not_found(id);
    std::lock_guard guard(s->mutex);
    if (!s->latest) return error_response(404, "no depth map has been solved for this session");
    Response r{200, content_type, (*s->latest).*member, {}};
    const bool stale = s->latest->revision != s->revision;
    r.headers = {{"X-Depth-Revision", std::to_string(s->latest->revision)},
                 {"X-Session-Revision", std::to_string(s->revision)},
                 {"X-Depth-Stale", stale ? "true" : "false"}};
    return r;
  }

  ServiceOptions options_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex rng_mutex_;
  std::mt19937_64 rng_;
};

/// Blocks serving on host:port until the server is stopped.
inline bool serve(const std::string& host, int port, ServiceOptions options = {}) {
  SessionService service(std::move(options));
  httplib::Server server;
  service.bind(server);
  return server.listen(host, port);
}

}  // namespace size2depth::service
