#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace t3time {

/// Shape disagreement between operands. Messages name the offending shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid hyperparameter or configuration value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller violated an operation precondition (e.g. backward on a non-scalar).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed binary file; carries the byte offset where parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Unparseable or inconsistent dataset content.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Not enough time steps to form a single training window.
class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

/// Checkpoint does not match the model or run it is being used with.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace t3time
