#pragma once

#include <stdexcept>
#include <string>

namespace mpsc {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Errors caused by malformed user input (CLI exit code 2).
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace mpsc
