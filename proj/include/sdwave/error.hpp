#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdwave {

enum class ErrorKind {
  invalid_argument,
  invalid_window,
  degenerate_observation,
  unstable_estimate,
  integration_diverged,
  insufficient_sample,
  config_error,
  io_error,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::invalid_window: return "invalid-window";
    case ErrorKind::degenerate_observation: return "degenerate-observation";
    case ErrorKind::unstable_estimate: return "unstable-estimate";
    case ErrorKind::integration_diverged: return "integration-diverged";
    case ErrorKind::insufficient_sample: return "insufficient-sample";
    case ErrorKind::config_error: return "config-error";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

/// Library exception; `kind()` tells callers which contract was broken.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {

inline void require(bool condition, ErrorKind kind, const char* message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace detail
}  // namespace sdwave
