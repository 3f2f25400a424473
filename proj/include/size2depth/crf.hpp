#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "size2depth/annotation.hpp"
#include "size2depth/error.hpp"
#include "size2depth/raster.hpp"

namespace size2depth {

struct CrfConfig {
  double lambda = 1.0;  // unary / binary tradeoff
  double beta = 10.0;   // similarity sharpness on [0,1] intensities
  double solver_tolerance = 1e-8;
  int max_iterations = 10000;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorKind::domain, "lambda must be >= 0");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::domain, "beta must be >= 0");
    if (!(solver_tolerance > 0.0 && solver_tolerance < 1.0)) {
      throw Error(ErrorKind::domain, "solver tolerance must lie in (0,1)");
    }
    if (max_iterations < 1) throw Error(ErrorKind::domain, "max_iterations must be >= 1");
  }
};

struct Edge {
  std::size_t a;
  std::size_t b;
  double weight;
};

/// 4-connected pixel graph, one edge per unordered neighbour pair, weighted by
/// exp(-beta |I_a - I_b|). degrees[i] is the sum of weights incident to i.
struct SimilarityGraph {
  int width = 0;
  int height = 0;
  std::vector<Edge> edges;
  std::vector<double> degrees;
};

inline SimilarityGraph build_similarity(const Raster& raster, double beta) {
  if (!(beta >= 0.0)) throw Error(ErrorKind::domain, "beta must be >= 0");
  if (raster.intensity.size() != raster.pixel_count()) {
    throw Error(ErrorKind::dimension, "raster intensity is not populated");
  }
  SimilarityGraph g;
  g.width = raster.width;
  g.height = raster.height;
  g.degrees.assign(raster.pixel_count(), 0.0);
  g.edges.reserve(static_cast<std::size_t>(raster.height) * (raster.width - 1) +
                  static_cast<std::size_t>(raster.width) * (raster.height - 1));

  auto add = [&](std::size_t a, std::size_t b) {
    const double w = std::exp(-beta * std::abs(raster.intensity[a] - raster.intensity[b]));
    g.edges.push_back({a, b, w});
    g.degrees[a] += w;
    g.degrees[b] += w;
  };
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      const std::size_t i = raster.index(x, y);
      if (x + 1 < raster.width) add(i, i + 1);
      if (y + 1 < raster.height) add(i, i + raster.width);
    }
  }
  return g;
}

struct EnergyTerms {
  double unary = 0.0;   // sum over masked pixels of (y - d)^2
  double binary = 0.0;  // sum over edges of sim * (y_a - y_b)^2, without lambda
  double total = 0.0;   // unary + lambda * binary
};

namespace detail {

inline void check_targets(const SimilarityGraph& g, const DepthTargets& t) {
  const auto n = static_cast<std::size_t>(g.width) * g.height;
  if (t.width != g.width || t.height != g.height || t.d.size() != n || t.mask.size() != n) {
    throw Error(ErrorKind::dimension, "depth targets do not match the raster dimensions");
  }
}

}  // namespace detail

inline EnergyTerms energy(const SimilarityGraph& g, const DepthTargets& targets, std::span<const double> y,
                          double lambda) {
  detail::check_targets(g, targets);
  if (y.size() != targets.d.size()) throw Error(ErrorKind::dimension, "depth vector length mismatch");
  EnergyTerms e;
  for (std::size_t p = 0; p < y.size(); ++p) {
    if (targets.mask[p]) e.unary += (y[p] - targets.d[p]) * (y[p] - targets.d[p]);
  }
  for (const auto& edge : g.edges) {
    const double diff = y[edge.a] - y[edge.b];
    e.binary += edge.weight * diff * diff;
  }
  e.total = e.unary + lambda * e.binary;
  return e;
}

inline EnergyTerms energy(const Raster& raster, const DepthTargets& targets, std::span<const double> y,
                          const CrfConfig& config) {
  return energy(build_similarity(raster, config.beta), targets, y, config.lambda);
}

/// The MAP system matrix A = diag(mask) + lambda (diag(s) - W), applied
/// matrix-free over the edge list.
class CrfSystem {
 public:
  CrfSystem(const SimilarityGraph& graph, std::span<const std::uint8_t> mask, double lambda)
      : graph_(graph), lambda_(lambda), diagonal_(mask.size()) {
    for (std::size_t i = 0; i < mask.size(); ++i) {
      diagonal_[i] = (mask[i] ? 1.0 : 0.0) + lambda * graph.degrees[i];
    }
  }

  std::size_t size() const { return diagonal_.size(); }
  const std::vector<double>& diagonal() const { return diagonal_; }

  void apply(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = diagonal_[i] * x[i];
    for (const auto& e : graph_.edges) {
      const double w = lambda_ * e.weight;
      out[e.a] -= w * x[e.b];
      out[e.b] -= w * x[e.a];
    }
  }

 private:
  const SimilarityGraph& graph_;
  double lambda_;
  std::vector<double> diagonal_;
};

struct DepthField {
  int width = 0;
  int height = 0;
  std::vector<double> y;
  CrfConfig config_used;
  double residual = 0.0;
  int iterations = 0;
  DepthUnit unit = DepthUnit::relative;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// max of the 2-norm and inf-norm relative residuals
inline double relative_residual(std::span<const double> r, double b_norm2, double b_norm_inf) {
  return std::max(std::sqrt(dot(r, r)) / b_norm2, norm_inf(r) / b_norm_inf);
}

}  // namespace detail

/// Solves A y = d with Jacobi-preconditioned conjugate gradients, where A is
/// the CrfSystem matrix. The reported residual is the larger of the 2-norm
/// and inf-norm relative residuals, recomputed from b - A y before returning.
inline DepthField solve_map(const SimilarityGraph& graph, const DepthTargets& targets, const CrfConfig& config) {
  config.validate();
  detail::check_targets(graph, targets);
  const std::size_t masked = targets.masked_count();
  if (masked == 0) throw Error(ErrorKind::empty_constraint, "no pixel carries a depth target");
  if (config.lambda == 0.0 && masked != targets.mask.size()) {
    throw Error(ErrorKind::underdetermined, "lambda = 0 leaves unannotated pixels unconstrained");
  }

  const CrfSystem system(graph, targets.mask, config.lambda);
  const std::size_t n = system.size();
  const std::span<const double> b = targets.d;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(system.diagonal()[i] > 0.0)) {
      throw Error(ErrorKind::underdetermined, "pixel " + std::to_string(i) + " is unannotated and isolated");
    }
  }

  DepthField field;
  field.width = graph.width;
  field.height = graph.height;
  field.config_used = config;
  field.unit = targets.unit;
  field.y = targets.d;

  const double b2 = std::sqrt(detail::dot(b, b));
  const double binf = detail::norm_inf(b);
  if (binf == 0.0) {
    std::fill(field.y.begin(), field.y.end(), 0.0);
    return field;
  }

  std::vector<double> r(n), z(n), p(n), ap(n);
  const auto& diag = system.diagonal();
  auto true_residual = [&] {
    system.apply(field.y, ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
    return detail::relative_residual(r, b2, binf);
  };
  auto restart = [&] {
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    p = z;
    return detail::dot(r, z);
  };

  double rel = true_residual();
  double rz = restart();
  int it = 0;
  while (rel > config.solver_tolerance) {
    if (it >= config.max_iterations) throw SolverError(rel, it);
    ++it;
    system.apply(p, ap);
    const double pap = detail::dot(p, ap);
    if (!(pap > 0.0)) throw SolverError(rel, it);
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      field.y[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    rel = detail::relative_residual(r, b2, binf);
    if (rel <= config.solver_tolerance) {
      // Guard against drift of the recurrence residual.
      rel = true_residual();
      if (rel > config.solver_tolerance) rz = restart();
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    const double rz_next = detail::dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }

  for (double v : field.y) {
    if (!std::isfinite(v)) throw SolverError(rel, it);
  }
  field.residual = rel;
  field.iterations = it;
  return field;
}

inline DepthField solve_map(const Raster& raster, const DepthTargets& targets, const CrfConfig& config) {
  config.validate();
  return solve_map(build_similarity(raster, config.beta), targets, config);
}

}  // namespace size2depth
