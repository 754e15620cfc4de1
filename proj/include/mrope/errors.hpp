#pragma once

#include <stdexcept>
#include <string>

namespace mrope {

// A required model, flag or structure is missing or inconsistent. The CLI maps
// this family to exit code 1.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Weight sum is zero in a self-normalized estimator.
class DegenerateWeightsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Target mass where the behavior distribution has none.
class SupportViolationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files (CSV, JSON-lines, model JSON).
class IngestionError : public ConfigurationError {
 public:
  using ConfigurationError::ConfigurationError;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The oracle cannot express the requested quantity in closed form.
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mrope
