#pragma once

#include <stdexcept>
#include <string>

namespace gmrl {

// Shape or size mismatch between operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Unknown name (network head, config key, layer).
struct LookupError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Operation called in the wrong order (backward without forward, empty window).
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

// NaN or Inf where a finite value is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside its admissible domain (e.g. an action id).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Invalid run configuration; the message starts with the offending field path.
struct ConfigError : std::invalid_argument {
  ConfigError(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inputs that are individually valid but inconsistent with each other.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace gmrl
