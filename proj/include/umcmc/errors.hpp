#pragma once

#include <stdexcept>
#include <string>

namespace umcmc {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// Numeric failure: divergence, non-convergence, invalid values from input.
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

/// Chain state went non-finite; carries the failing layer index.
struct ChainDivergenceError : NumericError {
  ChainDivergenceError(const std::string& msg, int layer_index)
      : NumericError(msg), layer(layer_index) {}
  int layer;
};

/// Malformed files, configs, or containers.
struct FormatError : Error {
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

struct UnsupportedError : Error {
  explicit UnsupportedError(const std::string& msg) : Error(msg) {}
};

}  // namespace umcmc
