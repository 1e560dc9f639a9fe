// Common type aliases and error categories used across the library.
#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace lssc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Bad user input: malformed panels, inconsistent dimensions, invalid config.
class InvalidInput : public std::runtime_error {
public:
  explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure inside an estimation routine (non-convergence,
// unidentifiable arrangement, rank deficiency, ...).
class EstimationError : public std::runtime_error {
public:
  explicit EstimationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised by dimension selection when no candidate meets the SSR tolerance.
class InfeasibleTolerance : public EstimationError {
public:
  InfeasibleTolerance(const std::string& msg, double min_ssr)
      : EstimationError(msg), min_ssr_achieved(min_ssr) {}
  double min_ssr_achieved;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace lssc
