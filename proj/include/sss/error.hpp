#pragma once

#include <stdexcept>
#include <string>

namespace sss {

// Bad user configuration: unknown keys, missing columns, incompatible options.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file. Carries the 1-based line number when known.
struct FormatError : std::runtime_error {
  FormatError(const std::string& what, long line = -1)
      : std::runtime_error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation invoked in the wrong lifecycle state (e.g. transform before fit).
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace sss
