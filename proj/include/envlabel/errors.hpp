#pragma once

#include <stdexcept>
#include <string>

namespace envlabel {

/// Malformed binary or text input (point-cloud payloads, manifests, record files).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A text record that cannot be decoded. `field()` names the offending key
/// when the problem is attributable to one.
class ParseError : public FormatError {
 public:
  ParseError(std::string field, const std::string& message)
      : FormatError(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace envlabel
