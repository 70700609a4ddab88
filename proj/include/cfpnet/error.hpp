#pragma once

#include <stdexcept>
#include <string>

namespace cfpnet {

/// Bad argument to an operation (wrong shape, out-of-range value).
class ArgumentError : public std::invalid_argument {
public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

/// Structurally invalid configuration (channel budgets, input sizes).
class ConfigError : public std::invalid_argument {
public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Configuration that is well-formed but has no defined rule.
class UnsupportedError : public std::runtime_error {
public:
  explicit UnsupportedError(const std::string& what) : std::runtime_error(what) {}
};

/// Dataset ingestion and file-format problems.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure during training (NaN loss and the like).
class TrainingError : public std::runtime_error {
public:
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cfpnet
