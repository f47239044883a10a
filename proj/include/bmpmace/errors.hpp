#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace bmpmace {

/// Invalid parameters or configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed, missing or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  enum class Kind { missing_file, shape_mismatch, unknown_version, malformed, io_failure, out_of_range };

  DataError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Non-finite state detected during iteration.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(int iteration, std::string op, const std::string& what)
      : std::runtime_error(what), iteration_(iteration), op_(std::move(op)) {}
  int iteration() const noexcept { return iteration_; }
  const std::string& op() const noexcept { return op_; }

 private:
  int iteration_;
  std::string op_;
};

}  // namespace bmpmace
