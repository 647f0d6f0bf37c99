#ifndef DWPI_ERROR_HPP
#define DWPI_ERROR_HPP

#include <stdexcept>
#include <string>

namespace dwpi {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, malformed config or layout files, violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Failures while reading or writing artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dwpi

#endif  // DWPI_ERROR_HPP
