#pragma once

#include <stdexcept>
#include <string>

namespace docmt {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file (bad JSON, bad model file, ...). Messages carry the
/// offending line number or path where known.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Structural violation of a data invariant (unaligned documents, mention
/// spans outside the document, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or arguments (bad split ratios, decode context not
/// covered by the trained context, empty training corpus, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor shape mismatch. Message names both shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint file problems: missing parameters, shape mismatches,
/// incompatible precision.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace docmt
