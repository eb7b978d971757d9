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

#include "negmerge/error.hpp"

#include <utility>

namespace negmerge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kHeaderTooLarge: return "HeaderTooLarge";
    case ErrorCode::kOffsetOutOfBounds: return "OffsetOutOfBounds";
    case ErrorCode::kOverlappingData: return "OverlappingData";
    case ErrorCode::kUnknownDtype: return "UnknownDtype";
    case ErrorCode::kDuplicateName: return "DuplicateName";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kEmptyPool: return "EmptyPool";
    case ErrorCode::kPoolTooSmall: return "PoolTooSmall";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kNoVectorsAbsorbed: return "NoVectorsAbsorbed";
    case ErrorCode::kNoFeasibleLambda: return "NoFeasibleLambda";
    case ErrorCode::kGroupingOverlap: return "GroupingOverlap";
    case ErrorCode::kNoLayerIndices: return "NoLayerIndices";
    case ErrorCode::kInfeasibleSeparation: return "InfeasibleSeparation";
    case ErrorCode::kEmptyPartition: return "EmptyPartition";
    case ErrorCode::kTrainingDiverged: return "TrainingDiverged";
    case ErrorCode::kExperimentStage: return "ExperimentStage";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string message, std::string subject)
    : std::runtime_error(std::move(message)),
      code_(code),
      subject_(std::move(subject)) {}

SchemaMismatch::SchemaMismatch(std::string name, std::string reason)
    : Error(ErrorCode::kSchemaMismatch,
            "schema mismatch at tensor '" + name + "': " + reason, name),
      reason_(std::move(reason)) {}

}  // namespace negmerge
