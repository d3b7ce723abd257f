#pragma once

#include <stdexcept>
#include <string>

namespace mixtraffic {

// Invalid environment, network, or demand configuration. `field` names the
// offending config key when one applies.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& message, std::string field = {})
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Argument outside an operation's domain (lane index, arc position, ...).
class DomainError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Policy produced an unusable action (non-finite value).
class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector or action layout does not match the environment's declared shape.
class LayoutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mixtraffic
