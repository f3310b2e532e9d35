#pragma once

#include <stdexcept>
#include <string>

namespace firstfinish {

struct BackendError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Strategy requested a capability the backend does not provide
// (lock-step batching, prefix continuation).
struct UnsupportedBackend : BackendError {
  using BackendError::BackendError;
};

// A decode job failed terminally (transport error, bad frame, HTTP 4xx,
// retries exhausted).
struct JobFailed : BackendError {
  using BackendError::BackendError;
};

struct StrategyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateSample : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace firstfinish
