#pragma once

#include <stdexcept>

namespace oodlab {

// Rejected input or malformed configuration. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss encountered during training. The CLI maps this to exit code 3.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace oodlab
