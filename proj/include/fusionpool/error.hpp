// Copyright 2026 The FusionPool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fusionpool {

// Error categories. The CLI maps each one to its own exit code.
enum class ErrorCode : int {
  kIo = 1,
  kFormat,
  kChecksum,
  kVersion,
  kTruncated,
  kDuplicate,
  kInvalidArgument,
  kDimensionMismatch,
  kUnknownLabel,
  kSchemaMismatch,
  kCollision,
  kTaskReuse,
  kUnsupportedHead,
  kInfeasible,
  kNonFinite,
  kDegenerate,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kChecksum: return "checksum";
    case ErrorCode::kVersion: return "version";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kDuplicate: return "duplicate";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kUnknownLabel: return "unknown-label";
    case ErrorCode::kSchemaMismatch: return "schema-mismatch";
    case ErrorCode::kCollision: return "collision";
    case ErrorCode::kTaskReuse: return "task-reuse";
    case ErrorCode::kUnsupportedHead: return "unsupported-head";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kDegenerate: return "degenerate";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace fusionpool
