#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace anisoflow {

enum class ErrorKind {
  InvalidInput,
  NearSingular,
  InvalidConfig,
  Unsupported,
  NonConvergence,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Newton iteration gave up. Carries the residual max-norm of every iterate.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& message, std::vector<double> residuals)
      : Error(ErrorKind::NonConvergence, message), residuals_(std::move(residuals)) {}

  const std::vector<double>& residual_history() const noexcept { return residuals_; }
  double last_residual() const noexcept {
    return residuals_.empty() ? 0.0 : residuals_.back();
  }

 private:
  std::vector<double> residuals_;
};

}  // namespace anisoflow
