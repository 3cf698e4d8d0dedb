// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace notecoder {

// Mirrors nc_status in the public C header; keep the numeric values in sync.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kIo = 2,
  kFormat = 3,
  kShape = 4,
  kNumeric = 5,
  kEmptyNote = 6,
  kCompatibility = 7,
  kProviderUnavailable = 8,
  kMissingEmbedding = 9,
  kUnmappedCode = 10,
  kLoad = 11,
  kConfig = 12,
  kUsage = 13,
  kUndefinedMetric = 14,
  kInternal = 99,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace notecoder
