#pragma once

#include <stdexcept>
#include <string>

namespace scatterforge {

// Violated precondition on a public operation (bad dimensions, out-of-range
// configuration). The CLI maps these to exit code 2.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A solver was asked for an instance it does not handle (e.g. exact OT on
// non-uniform marginals).
class UnsupportedInstance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Carries the location that failed to parse.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

}  // namespace scatterforge
