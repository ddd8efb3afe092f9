#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace clinqa {

// Base of every error raised by the toolkit. The CLI maps the subclasses
// onto its exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user configuration (flags, config files, strategy/schema mismatch).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data: corpus files, run directories,
// prediction files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Model output that could not be parsed into the expected shape.
class ParseError : public Error {
 public:
  using Error::Error;
};

// An indexed list parsed fine but held the wrong number of items.
class CountMismatch : public ParseError {
 public:
  CountMismatch(std::vector<std::string> items, std::size_t expected)
      : ParseError("expected " + std::to_string(expected) + " indexed items, found " +
                   std::to_string(items.size())),
        items_(std::move(items)),
        expected_(expected) {}

  const std::vector<std::string>& items() const noexcept { return items_; }
  std::size_t expected() const noexcept { return expected_; }

 private:
  std::vector<std::string> items_;
  std::size_t expected_;
};

}  // namespace clinqa
