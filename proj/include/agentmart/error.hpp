#pragma once

#include <stdexcept>
#include <string>

namespace agentmart {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, violated preconditions, invalid configs.
// The CLI maps these to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Outbound network call attempted while egress is disabled.
class EgressDenied : public Error {
 public:
  using Error::Error;
};

}  // namespace agentmart
