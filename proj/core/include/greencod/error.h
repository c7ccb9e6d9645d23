#ifndef GREENCOD_ERROR_H_
#define GREENCOD_ERROR_H_

#include <stdexcept>
#include <string>

namespace greencod {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// A file was readable but its content is malformed (bad magic, truncated
// payload, malformed manifest line, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

// An in-memory value violates a documented invariant (duplicate tensor
// names, wrong channel total, dimension mismatch, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

// Invalid user configuration (unknown preset, out-of-range hyperparameter).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace greencod

#endif  // GREENCOD_ERROR_H_
