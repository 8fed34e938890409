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

#ifndef AEGIS_ERROR_H_
#define AEGIS_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace aegis {

// Every domain failure the engine can report. The CLI prints the name of the
// code in its JSON error object and the service maps codes to HTTP statuses.
enum class ErrorCode {
  kMalformedDocument,
  kDuplicateAttribute,
  kDuplicateValue,
  kDomainTooSmall,
  kUnknownAttribute,
  kUnknownValue,
  kOverlappingPartition,
  kKExceedsDomain,
  kTrueValueNotInCover,
  kUnknownTopic,
  kIoError,
  kCorruptFile,
  kInsufficientPersonas,
  kLevelMismatch,
  kNoCandidates,
  kStaleSuggestion,
  kDuplicateTopic,
  kNotSatisfied,
  kInfeasibleSpec,
  kPreconditionViolation,
  kInvalidArgument,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }
  // The message without the code prefix that what() carries.
  const std::string& message() const { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace aegis

#endif  // AEGIS_ERROR_H_
