#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace schns {

enum class ErrorKind {
  dimension,
  parameter,
  data,
  solver,
  state,
  divergence,
  config,
  format,
  io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::data: return "data";
    case ErrorKind::solver: return "solver";
    case ErrorKind::state: return "state";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::config: return "config";
    case ErrorKind::format: return "format";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Base of every error raised by the library. The kind is stable and is what
/// the CLI prints on its machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class KindError : public Error {
 public:
  explicit KindError(const std::string& what) : Error(K, what) {}
};

using DimensionError = KindError<ErrorKind::dimension>;
using ParameterError = KindError<ErrorKind::parameter>;
using DataError = KindError<ErrorKind::data>;
using SolverError = KindError<ErrorKind::solver>;
using StateError = KindError<ErrorKind::state>;
using DivergenceError = KindError<ErrorKind::divergence>;
using ConfigError = KindError<ErrorKind::config>;
using FormatError = KindError<ErrorKind::format>;
using IoError = KindError<ErrorKind::io>;

}  // namespace schns
