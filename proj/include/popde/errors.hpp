#pragma once

#include <stdexcept>
#include <string>

namespace popde {

// Shape/dimension violations (mismatched nvars, bad index sets, ...).
struct StructuralError : std::runtime_error {
  explicit StructuralError(const std::string& m) : std::runtime_error(m) {}
};

// Invalid user-supplied parameter values (nonpositive spacing, bad order, ...).
struct ParameterError : std::runtime_error {
  explicit ParameterError(const std::string& m) : std::runtime_error(m) {}
};

// Unknown names (presets, symbols, config keys).
struct LookupError : std::runtime_error {
  explicit LookupError(const std::string& m) : std::runtime_error(m) {}
};

// Non-finite values or failed numerical preconditions at runtime.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& m) : std::runtime_error(m) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

// Parse failures in polynomial/expression/problem-file input.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace popde
