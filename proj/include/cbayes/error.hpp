#pragma once

#include <stdexcept>
#include <string>

namespace cbayes {

/// Base of every error raised by the library. `module()` names the component
/// that detected the problem so the CLI can report it without parsing text.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Malformed input: bad files, dimension mismatches, invalid arguments.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Every importance weight at a grid value is zero.
class DegenerateWeightError : public Error {
 public:
  DegenerateWeightError(double grid_value, const std::string& message)
      : Error("conformal", message), grid_value_(grid_value) {}

  double grid_value() const noexcept { return grid_value_; }

 private:
  double grid_value_;
};

/// The sampler could not start or produced an unusable chain.
class SamplerError : public Error {
 public:
  using Error::Error;
};

}  // namespace cbayes
