#pragma once

#include <stdexcept>
#include <string>

namespace eicl {

// Base for every domain error raised by the library. The CLI maps these to
// exit status 1; anything else escaping is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data violates a documented invariant (bad record, bad tensor file).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Caller passed arguments that contradict an operation's preconditions.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace eicl
