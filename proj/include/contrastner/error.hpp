#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace contrastner {

// Errors caused by user input (files, flags, configs, numerics). The CLI maps
// these to exit code 1; anything else escaping a command is exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class OverflowError : public Error {
 public:
  OverflowError(std::size_t needed, std::size_t max_len)
      : Error("encoded instance needs " + std::to_string(needed) +
              " positions but max_len is " + std::to_string(max_len)),
        needed_(needed) {}

  std::size_t needed() const noexcept { return needed_; }

 private:
  std::size_t needed_;
};

}  // namespace contrastner
