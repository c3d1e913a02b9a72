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

#ifndef TGLM_STATUS_H_
#define TGLM_STATUS_H_

#include "absl/status/status.h"
#include "absl/strings/string_view.h"

namespace tglm {

// Library-specific failure classes. Each maps onto a canonical absl code and
// is additionally attached to the status as a payload so callers can tell,
// e.g., a singular Gram matrix apart from a degenerate importance sampler even
// though both are FAILED_PRECONDITION.
enum class ErrorKind {
  kNone,
  kInvalidArgument,
  kSingularGram,
  kDomainError,
  kDegenerateWeights,
  kPartitionTooSmall,
  kInsufficientMass,
  kNonConvergence,
  kIo,
};

absl::Status MakeError(ErrorKind kind, absl::string_view message);

// Returns kNone for OK statuses and kInvalidArgument for foreign statuses
// carrying an INVALID_ARGUMENT code without a payload.
ErrorKind KindOf(const absl::Status& status);

absl::string_view ErrorKindName(ErrorKind kind);

}  // namespace tglm

#endif  // TGLM_STATUS_H_
