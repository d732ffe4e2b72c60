#pragma once

#include <stdexcept>
#include <string>

namespace verifree {

/// Invalid experiment configuration (unknown key, bad value, unknown family).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical self-check failed (probability closure, gradient check, ...).
class NumericalCheckError : public std::runtime_error {
 public:
  explicit NumericalCheckError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by the trainer when a parameter goes non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int step, const std::string& detail)
      : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + detail),
        step(step) {}
  int step;
};

}  // namespace verifree
