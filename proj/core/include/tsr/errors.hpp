#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace tsr {

/// Base of every error thrown by the library. `kind()` is a stable lowercase
/// tag used by the CLI for its machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error("contract", what) {}
};

/// Overflow, NaN, or an iteration cap was hit.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, std::optional<std::size_t> layer = std::nullopt)
      : Error("numeric", what), layer_(layer) {}

  std::optional<std::size_t> layer() const noexcept { return layer_; }

 private:
  std::optional<std::size_t> layer_;
};

/// The problem collapsed (zero gradient, empty subspace, all-zero spectrum).
class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& what) : Error("degenerate", what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format", what) {}
};

class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& what) : Error("consistency", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

class SamplingError : public Error {
 public:
  explicit SamplingError(const std::string& what) : Error("sampling", what) {}
};

class SplitError : public Error {
 public:
  explicit SplitError(const std::string& what) : Error("split", what) {}
};

}  // namespace tsr
