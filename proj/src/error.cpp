// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/error.hpp"

namespace spac {

const char*
error_code_name(ErrorCode code)
{
  switch (code) {
  case ErrorCode::kInvalidArgument: return "InvalidArgument";
  case ErrorCode::kMalformedHeader: return "MalformedHeader";
  case ErrorCode::kMissingAttribute: return "MissingAttribute";
  case ErrorCode::kOutOfRange: return "OutOfRange";
  case ErrorCode::kDuplicatePoint: return "DuplicatePoint";
  case ErrorCode::kWrongColorSpace: return "WrongColorSpace";
  case ErrorCode::kGeometryMismatch: return "GeometryMismatch";
  case ErrorCode::kNotASubset: return "NotASubset";
  case ErrorCode::kIoError: return "IoError";
  case ErrorCode::kZeroFrequency: return "ZeroFrequency";
  case ErrorCode::kTruncatedStream: return "TruncatedStream";
  case ErrorCode::kCorruptChunk: return "CorruptChunk";
  case ErrorCode::kHashMismatch: return "HashMismatch";
  case ErrorCode::kConfigMismatch: return "ConfigMismatch";
  case ErrorCode::kNumericalError: return "NumericalError";
  }
  return "Unknown";
}

}  // namespace spac
