#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace lfc {

/// Base class of every error raised by the library. `field()` names the
/// offending input (e.g. "t", "sigma", "beta") when one can be singled out.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, std::string field = {})
      : std::runtime_error(what), field_(std::move(field)) {}

  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Precondition violations: bad sizes, out-of-range indices, bad parameters.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or factorization failures during a computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Environment generation gave up after exhausting its rejection budget.
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace lfc
