#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace articfit {

enum class ErrorKind {
  config,
  io,
  non_convergence,
  degenerate_time,
  numerical_divergence,
  all_static,
  degenerate_rotation,
  collinear,
  out_of_bounds,
  empty_part,
  empty_input,
  zero_vector,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "ConfigError";
    case ErrorKind::io: return "IOError";
    case ErrorKind::non_convergence: return "NonConvergence";
    case ErrorKind::degenerate_time: return "DegenerateTime";
    case ErrorKind::numerical_divergence: return "NumericalDivergence";
    case ErrorKind::all_static: return "AllStatic";
    case ErrorKind::degenerate_rotation: return "DegenerateRotation";
    case ErrorKind::collinear: return "Collinear";
    case ErrorKind::out_of_bounds: return "OutOfBounds";
    case ErrorKind::empty_part: return "EmptyPart";
    case ErrorKind::empty_input: return "EmptyInput";
    case ErrorKind::zero_vector: return "ZeroVector";
  }
  return "Error";
}

}  // namespace articfit
