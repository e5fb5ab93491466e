#pragma once

#include <stdexcept>
#include <string>

namespace cuq {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad spec parameters, missing mandatory fields,
/// out-of-range settings. Raised before or independent of any data.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Data-dependent failure: empty series, insufficient samples, degenerate
/// covariates. Non-fatal at stream level; the pipeline records these per
/// window and keeps going.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Fatal stream-format violation: header/geometry mismatch, payload kind
/// change mid-stream. Aborts ingestion of the offending stream.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace cuq
