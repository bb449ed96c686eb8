#pragma once

#include <stdexcept>
#include <string>

namespace finsler {

/// Evaluation outside the domain where a quantity is defined (zero vector,
/// nonpositive argument of sqrt/log, division by zero).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid arguments or malformed configuration. `path` names the offending
/// field for scenario validation errors.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what, std::string path = {})
      : std::invalid_argument(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// An iterative solver failed to reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical scheme was asked to run outside its stability or
/// positivity regime (CFL, M-matrix).
class StabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace finsler
