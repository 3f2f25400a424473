#pragma once

#include <Eigen/Dense>

#include "test_support.hpp"

namespace size2depth::testing {

/// Dense system matrix diag(mask) + lambda (diag(s) - W) assembled from the
/// oracle's pair enumeration.
inline Eigen::MatrixXd dense_system(const OracleProblem& p) {
  const int n = p.width * p.height;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) a(i, i) = p.mask[i] ? 1.0 : 0.0;
  p.for_each_pair([&](int i, int j, double w) {
    a(i, i) += p.lambda * w;
    a(j, j) += p.lambda * w;
    a(i, j) -= p.lambda * w;
    a(j, i) -= p.lambda * w;
  });
  return a;
}

inline std::vector<double> dense_solve(const OracleProblem& p) {
  const Eigen::MatrixXd a = dense_system(p);
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(p.d.data(), static_cast<Eigen::Index>(p.d.size()));
  const Eigen::VectorXd y = a.ldlt().solve(b);
  return {y.data(), y.data() + y.size()};
}

}  // namespace size2depth::testing
