// Copyright 2026 The Aegis Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "aegis/error.h"

namespace aegis {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedDocument:
      return "MalformedDocument";
    case ErrorCode::kDuplicateAttribute:
      return "DuplicateAttribute";
    case ErrorCode::kDuplicateValue:
      return "DuplicateValue";
    case ErrorCode::kDomainTooSmall:
      return "DomainTooSmall";
    case ErrorCode::kUnknownAttribute:
      return "UnknownAttribute";
    case ErrorCode::kUnknownValue:
      return "UnknownValue";
    case ErrorCode::kOverlappingPartition:
      return "OverlappingPartition";
    case ErrorCode::kKExceedsDomain:
      return "KExceedsDomain";
    case ErrorCode::kTrueValueNotInCover:
      return "TrueValueNotInCover";
    case ErrorCode::kUnknownTopic:
      return "UnknownTopic";
    case ErrorCode::kIoError:
      return "IoError";
    case ErrorCode::kCorruptFile:
      return "CorruptFile";
    case ErrorCode::kInsufficientPersonas:
      return "InsufficientPersonas";
    case ErrorCode::kLevelMismatch:
      return "LevelMismatch";
    case ErrorCode::kNoCandidates:
      return "NoCandidates";
    case ErrorCode::kStaleSuggestion:
      return "StaleSuggestion";
    case ErrorCode::kDuplicateTopic:
      return "DuplicateTopic";
    case ErrorCode::kNotSatisfied:
      return "NotSatisfied";
    case ErrorCode::kInfeasibleSpec:
      return "InfeasibleSpec";
    case ErrorCode::kPreconditionViolation:
      return "PreconditionViolation";
    case ErrorCode::kInvalidArgument:
      return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code),
      message_(message) {}

}  // namespace aegis
