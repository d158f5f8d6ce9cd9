#pragma once

#include <stdexcept>
#include <string>

namespace fcgo {

/// Base class for all library errors.
struct error : std::runtime_error {
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid argument or geometry/grid validation failure.
struct domain_error : error {
  explicit domain_error(const std::string& msg) : error(msg) {}
};

/// Parameter set violates an admissibility requirement (unit vectors,
/// orthogonality, axis alignment, potential class bounds, ...).
struct admissibility_error : error {
  explicit admissibility_error(const std::string& msg) : error(msg) {}
};

/// An iteration failed to reach its tolerance within the cap, or a
/// contraction precondition does not hold.
struct nonconvergent_error : error {
  nonconvergent_error(const std::string& msg, double last_value)
      : error(msg), last(last_value) {}
  double last;  ///< last iterate / residual, for diagnostics
};

/// A linear solve failed (factorization breakdown or Krylov stagnation).
struct solver_failure : error {
  explicit solver_failure(const std::string& msg) : error(msg) {}
};

/// Inverse transform requested with too few samples to be exact.
struct alias_error : error {
  explicit alias_error(const std::string& msg) : error(msg) {}
};

/// The parameter-schedule balance equation has no admissible solution.
struct schedule_error : error {
  explicit schedule_error(const std::string& msg) : error(msg) {}
};

/// Point mapped through an inversion is at (or too close to) the
/// singular point of the chart.
struct singular_point : error {
  explicit singular_point(const std::string& msg) : error(msg) {}
};

/// Data violates a support requirement (e.g. a trace is not supported in
/// the accessible part of the boundary).
struct support_error : error {
  explicit support_error(const std::string& msg) : error(msg) {}
};

/// Serialization / file-format problem.
struct format_error : error {
  explicit format_error(const std::string& msg) : error(msg) {}
};

}  // namespace fcgo
