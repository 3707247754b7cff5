#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace haptic {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Malformed cloud/trajectory input. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyCloudError : public Error {
 public:
  EmptyCloudError() : Error("point cloud contains no points") {}
};

class EmptyLatticeError : public Error {
 public:
  EmptyLatticeError() : Error("no point falls inside the lattice") {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// compare_traces found no tick with meaningful ideal force.
class NoContactError : public Error {
 public:
  NoContactError() : Error("trace has no contact ticks to compare") {}
};

}  // namespace haptic
