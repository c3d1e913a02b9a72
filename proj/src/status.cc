//
// Copyright 2026 The Truthful GLM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "tglm/status.h"

#include <string>

#include "absl/strings/cord.h"
#include "absl/strings/str_cat.h"
#include "absl/types/optional.h"

namespace tglm {
namespace {

constexpr char kKindPayloadUrl[] = "type.tglm/error_kind";

absl::StatusCode CodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNone:
      return absl::StatusCode::kOk;
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kPartitionTooSmall:
      return absl::StatusCode::kInvalidArgument;
    case ErrorKind::kSingularGram:
    case ErrorKind::kDegenerateWeights:
    case ErrorKind::kInsufficientMass:
      return absl::StatusCode::kFailedPrecondition;
    case ErrorKind::kDomainError:
      return absl::StatusCode::kOutOfRange;
    case ErrorKind::kNonConvergence:
      return absl::StatusCode::kAborted;
    case ErrorKind::kIo:
      return absl::StatusCode::kUnavailable;
  }
  return absl::StatusCode::kUnknown;
}

}  // namespace

absl::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNone:
      return "None";
    case ErrorKind::kInvalidArgument:
      return "InvalidArgument";
    case ErrorKind::kSingularGram:
      return "SingularGram";
    case ErrorKind::kDomainError:
      return "DomainError";
    case ErrorKind::kDegenerateWeights:
      return "DegenerateWeights";
    case ErrorKind::kPartitionTooSmall:
      return "PartitionTooSmall";
    case ErrorKind::kInsufficientMass:
      return "InsufficientMass";
    case ErrorKind::kNonConvergence:
      return "NonConvergence";
    case ErrorKind::kIo:
      return "Io";
  }
  return "Unknown";
}

absl::Status MakeError(ErrorKind kind, absl::string_view message) {
  if (kind == ErrorKind::kNone) return absl::OkStatus();
  absl::Status status(CodeFor(kind),
                      absl::StrCat(ErrorKindName(kind), ": ", message));
  status.SetPayload(kKindPayloadUrl,
                    absl::Cord(std::to_string(static_cast<int>(kind))));
  return status;
}

ErrorKind KindOf(const absl::Status& status) {
  if (status.ok()) return ErrorKind::kNone;
  absl::optional<absl::Cord> payload = status.GetPayload(kKindPayloadUrl);
  if (payload.has_value()) {
    return static_cast<ErrorKind>(std::stoi(std::string(*payload)));
  }
  if (status.code() == absl::StatusCode::kInvalidArgument) {
    return ErrorKind::kInvalidArgument;
  }
  return ErrorKind::kIo;
}

}  // namespace tglm
