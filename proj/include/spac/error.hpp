// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace spac {

enum class ErrorCode {
  kInvalidArgument,
  kMalformedHeader,
  kMissingAttribute,
  kOutOfRange,
  kDuplicatePoint,
  kWrongColorSpace,
  kGeometryMismatch,
  kNotASubset,
  kIoError,
  kZeroFrequency,
  kTruncatedStream,
  kCorruptChunk,
  kHashMismatch,
  kConfigMismatch,
  kNumericalError,
};

const char* error_code_name(ErrorCode code);

// All library failures are reported through this type. The code is stable
// and is what callers (and the CLI exit-code mapping) dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + what)
    , code_(code)
  {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void
fail(ErrorCode code, const std::string& what)
{
  throw Error(code, what);
}

}  // namespace spac
