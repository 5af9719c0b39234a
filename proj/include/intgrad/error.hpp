#pragma once

#include <stdexcept>
#include <string>

namespace intgrad {

/// Bad user input: malformed documents, shape mismatches, unsupported ops.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace intgrad
