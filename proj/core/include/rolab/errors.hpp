#pragma once

#include <stdexcept>
#include <string>

namespace rolab {

// A required on-disk artifact (checkpoint, dataset, robust-Q bundle) is
// absent or does not match what the operation needs.
class MissingArtifactError : public std::runtime_error {
 public:
  explicit MissingArtifactError(const std::string& what)
      : std::runtime_error(what) {}
};

// Training hit a non-finite loss. Carries the diagnostic dump so callers
// can print it before aborting.
class NumericalFailureError : public std::runtime_error {
 public:
  explicit NumericalFailureError(const std::string& what)
      : std::runtime_error(what) {}
};

// Malformed or unknown configuration input.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace rolab
