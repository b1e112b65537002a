#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace an2cls {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Objective evaluation produced a non-finite value or failed outright.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, Vector x)
      : std::runtime_error(what), x_(std::move(x)) {}
  const Vector& point() const { return x_; }

 private:
  Vector x_;
};

/// An eigen-iteration or factorization did not reach its tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The shifted matrix handed to a positive-definite solve is not positive
/// definite; the caller's shift is stale.
class ShiftTooSmall : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Krylov basis hit its dimension cap before any acceptance test passed.
class SubspaceExhausted : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The quadratic model failed to decrease along the trial step.
class ModelDecreaseViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A precondition that the caller was responsible for was violated.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace an2cls
