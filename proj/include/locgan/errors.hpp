#pragma once

#include <stdexcept>
#include <string>

namespace locgan {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor/raster shape mismatch; the message names the offending axes.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

/// A caller violated an API precondition (non-scalar loss, missing
/// gradient, empty input, ...).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

/// A value fell outside its legal range (out-of-range pose offset,
/// raster footprint outside the scene extent, ...).
class RangeError : public Error {
 public:
  explicit RangeError(const std::string& msg) : Error(msg) {}
};

/// Procedural scene generation could not satisfy the requested densities.
class GenerationError : public Error {
 public:
  explicit GenerationError(const std::string& msg) : Error(msg) {}
};

/// File could not be read or written, or had an unexpected format.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Training diverged (NaN loss) or was otherwise aborted.
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& msg) : Error(msg) {}
};

}  // namespace locgan
