#ifndef FMLOC_CORE_ERROR_HPP
#define FMLOC_CORE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace fmloc {

/// Invalid user-supplied parameters. Carries a field path when raised by the
/// config loader (e.g. "estimator.s").
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what, std::string field = {})
      : std::invalid_argument(field.empty() ? what : field + ": " + what),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A numerical kernel failed to converge or produced an unusable result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Least-squares fit requested on data that cannot determine a line.
class DegenerateFitError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fmloc

#endif  // FMLOC_CORE_ERROR_HPP
