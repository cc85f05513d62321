#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace elfor {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input row. `row()` is the 1-based line number in the source (header = 1).
class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// A record violating 0 <= V <= T <= N.
class ValidationError : public Error {
 public:
  ValidationError(std::string station, const std::string& what)
      : Error(station + ": " + what), station_(std::move(station)) {}
  const std::string& station() const noexcept { return station_; }

 private:
  std::string station_;
};

class DuplicateKeyError : public Error {
 public:
  explicit DuplicateKeyError(const std::string& key) : Error("duplicate station key " + key) {}
};

/// Input that cannot support the requested statistic (empty, too few units, zero spread).
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace elfor
