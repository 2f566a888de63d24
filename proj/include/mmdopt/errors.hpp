#pragma once

#include <stdexcept>
#include <string>

namespace mmdopt {

// Argument/shape violations reuse std::invalid_argument directly.

struct InvalidModelError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InsufficientSampleError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// MLE of the rank-one covariance family does not exist at epsilon = 0.
struct LikelihoodUndefinedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergedError : std::runtime_error {
  int step;
  DivergedError(const std::string& what, int step_index)
      : std::runtime_error(what), step(step_index) {}
};

struct NotCriticalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mmdopt
