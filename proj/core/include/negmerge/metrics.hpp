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

#ifndef NEGMERGE_METRICS_HPP_
#define NEGMERGE_METRICS_HPP_

#include <optional>
#include <span>

#include <nlohmann/json.hpp>

#include "negmerge/dataset.hpp"
#include "negmerge/mlp.hpp"
#include "negmerge/tensor_store.hpp"

namespace negmerge {

struct EvalReport {
  double acc_forget = 0.0;
  double acc_retain = 0.0;
  double acc_test = 0.0;
  double mia_efficacy = 0.0;
  bool mia_degenerate = false;
  std::optional<double> avg_gap;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

nlohmann::json to_json(const EvalReport& report);

// Top-1 accuracies on the forget, retain and test partitions; MIA fields are
// left at zero. Throws SchemaMismatch when the model does not fit cfg and
// kEmptyPartition when a partition is empty.
EvalReport evaluate(const TensorMap& model, const Dataset& ds,
                    const MlpConfig& cfg);

struct MiaResult {
  double efficacy = 0.0;
  double threshold = 0.0;  // losses above it are called non-members
  double balanced_accuracy = 0.5;
  bool degenerate = false;
};

// Fits the loss threshold with the best member/non-member balanced accuracy
// (earliest threshold on ties) and reports the fraction of target losses
// above it. When every member and non-member loss is equal the result is
// degenerate with efficacy 0.
MiaResult mia_from_losses(std::span<const double> member_losses,
                          std::span<const double> nonmember_losses,
                          std::span<const double> target_losses);

// Members: retain split; non-members: test split; targets: forget split.
MiaResult mia_efficacy(const TensorMap& model, const Dataset& ds,
                       const MlpConfig& cfg);

// Accuracies plus MIA.
EvalReport evaluate_full(const TensorMap& model, const Dataset& ds,
                         const MlpConfig& cfg);

// Mean of the four absolute metric differences, times 100.
double avg_gap(const EvalReport& report, const EvalReport& reference);

}  // namespace negmerge

#endif  // NEGMERGE_METRICS_HPP_
