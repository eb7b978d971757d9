// Copyright 2026 The NegMerge Authors.
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

#ifndef NEGMERGE_ERROR_HPP_
#define NEGMERGE_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace negmerge {

enum class ErrorCode {
  kIo,
  kMalformedHeader,
  kHeaderTooLarge,
  kOffsetOutOfBounds,
  kOverlappingData,
  kUnknownDtype,
  kDuplicateName,
  kNonFiniteValue,
  kSchemaMismatch,
  kEmptyPool,
  kPoolTooSmall,
  kInvalidConfig,
  kIndexOutOfRange,
  kNoVectorsAbsorbed,
  kNoFeasibleLambda,
  kGroupingOverlap,
  kNoLayerIndices,
  kInfeasibleSeparation,
  kEmptyPartition,
  kTrainingDiverged,
  kExperimentStage,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported as negmerge::Error. `subject()` names the
// tensor, configuration entry or pipeline stage the failure refers to, when
// there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string subject = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  ErrorCode code_;
  std::string subject_;
};

// Schema mismatches carry the first offending tensor name and a short reason
// ("missing", "shape", "dtype").
class SchemaMismatch : public Error {
 public:
  SchemaMismatch(std::string name, std::string reason);

  const std::string& name() const noexcept { return subject(); }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
};

}  // namespace negmerge

#endif  // NEGMERGE_ERROR_HPP_
