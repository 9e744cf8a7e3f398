#pragma once

#include <stdexcept>
#include <string>

#include "ocpsens/core/linalg.hpp"

namespace ocpsens {

/// A model callable returned a non-finite value.
class ModelEvaluationError : public std::runtime_error {
 public:
  ModelEvaluationError(const std::string& what, double t, Vector y)
      : std::runtime_error(what + " at t=" + std::to_string(t)),
        t_{t},
        y_{std::move(y)} {}

  double time() const { return t_; }
  const Vector& point() const { return y_; }

 private:
  double t_;
  Vector y_;
};

/// A required derivative callable (usually a Hessian) was not supplied.
class MissingDerivativeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Array sizes disagree with the declared problem dimensions.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace ocpsens
