#pragma once

#include <stdexcept>
#include <string>

namespace smartaug {

/// Raised when tensor or layer dimensions do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid hyperparameters, experiment configs, or dataset/config mismatches.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed files: checkpoints, IDX, PGM/PPM, metrics CSV.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace smartaug
