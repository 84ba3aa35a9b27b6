#pragma once

#include <stdexcept>
#include <string>

namespace bivarps {

/// Bad input: malformed files, violated preconditions, unknown options.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The numbers went wrong: undefined estimator, non-convergence, singular systems.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bivarps
