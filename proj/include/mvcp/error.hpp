#pragma once

#include <stdexcept>
#include <string>

namespace mvcp {

// Malformed input data or model files. The CLI maps this to exit code 2.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a rate is requested over an empty row selection, so that
// "no rows" is never confused with a rate of 0.
class EmptySelectionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mvcp
