#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace size2depth {

enum class ErrorKind {
  decode,
  dimension,
  domain,
  conflict,
  empty_constraint,
  underdetermined,
  not_converged,
  schema,
  io,
  usage,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::decode: return "decode error";
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::conflict: return "conflict error";
    case ErrorKind::empty_constraint: return "empty-constraint error";
    case ErrorKind::underdetermined: return "underdetermined-system error";
    case ErrorKind::not_converged: return "solver error";
    case ErrorKind::schema: return "schema error";
    case ErrorKind::io: return "io error";
    case ErrorKind::usage: return "usage error";
  }
  return "error";
}

/// Every failure the library reports is an Error tagged with its class, so
/// front ends (CLI exit codes, HTTP statuses) can map without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Schema violation in a JSON document; `field()` is the offending path,
/// e.g. "annotations[0].real_size_m".
class SchemaError : public Error {
 public:
  SchemaError(std::string field, const std::string& message, ErrorKind kind = ErrorKind::schema)
      : Error(kind, field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class SolverError : public Error {
 public:
  SolverError(double residual, int iterations)
      : Error(ErrorKind::not_converged,
              "no convergence after " + std::to_string(iterations) +
                  " iterations, relative residual " + std::to_string(residual)),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

}  // namespace size2depth
