#pragma once

#include <stdexcept>
#include <string>

namespace earnn {

// Malformed input data (bad JSON, record invariant violations, format errors).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem-level failures.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace earnn
