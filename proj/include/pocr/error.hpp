#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pocr {

// Base of everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition on an argument (sizes, ranges, shapes).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed input bytes. `where` is a byte offset or a 1-based line number
// depending on the format; `what()` already names which.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t where)
      : Error(msg), where_(where) {}

  std::size_t where() const noexcept { return where_; }

 private:
  std::size_t where_;
};

// Training produced a non-finite loss.
class DivergedError : public Error {
 public:
  DivergedError(std::size_t epoch)
      : Error("diverged at epoch " + std::to_string(epoch)), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace pocr
