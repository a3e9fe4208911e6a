#ifndef SPINCUT_ERRORS_HPP
#define SPINCUT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace spincut {

/// Precondition violated by a caller (bad site index, mismatched dimensions, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A degenerate ground space that the selection rule could not resolve.
class DegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid run configuration. `field()` names the offending key path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spincut

#endif  // SPINCUT_ERRORS_HPP
