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

#ifndef NEGMERGE_ANALYSIS_HPP_
#define NEGMERGE_ANALYSIS_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "negmerge/merging.hpp"
#include "negmerge/parallel.hpp"
#include "negmerge/task_vector.hpp"
#include "negmerge/tensor_store.hpp"

namespace negmerge {

inline constexpr std::string_view kOtherGroup = "other";

// Maps every tensor name to exactly one group label; names that match no
// group land in "other".
class GroupingRule {
 public:
  enum class Mode { kDepth, kNameRegex, kCustom };

  // Label is the first capture group of `pattern` (regex_search).
  static GroupingRule by_name_regex(std::string pattern);
  // (label, regex) pairs; a name matched by two different labels is an error.
  static GroupingRule custom(std::vector<std::pair<std::string, std::string>>
                                 groups);

  Mode mode() const noexcept { return mode_; }

  // Throws kGroupingOverlap when a name matches more than one custom group.
  std::string assign(std::string_view name) const;

  // Declared labels in report order (depth and custom modes).
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  // Inclusive layer-index range per depth label.
  const std::map<std::string, std::pair<std::uint64_t, std::uint64_t>>&
  ranges() const noexcept {
    return ranges_;
  }

 private:
  friend GroupingRule depth_groups(const Schema& schema, std::size_t n_groups);

  Mode mode_ = Mode::kCustom;
  std::vector<std::string> labels_;
  std::string pattern_;
  std::vector<std::pair<std::string, std::string>> custom_;
  std::map<std::string, std::string, std::less<>> assignment_;
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> ranges_;
};

// Layer index of names like "...layers.<k>..." or "...blocks.<k>...".
std::optional<std::uint64_t> layer_index(std::string_view name);

// Splits layer indices 0..L-1 into n_groups contiguous, near-equal ranges
// (shallow/middle/deep for three groups). Tensors without a layer index go to
// "other". Throws kNoLayerIndices if no name carries one.
GroupingRule depth_groups(const Schema& schema, std::size_t n_groups = 3);

struct TensorSparsity {
  std::string name;
  std::string group;
  std::size_t elements = 0;
  std::size_t zeros = 0;
};

struct GroupSparsity {
  std::string label;
  std::size_t elements = 0;
  std::size_t zeros = 0;
  double zero_fraction = 0.0;  // 0 for an empty group
  std::optional<std::pair<std::uint64_t, std::uint64_t>> layer_range;
};

struct SparsityReport {
  std::size_t total_elements = 0;
  std::size_t zero_elements = 0;
  double zero_fraction = 0.0;
  std::vector<TensorSparsity> per_tensor;
  std::vector<GroupSparsity> per_group;
  // Present when a pool was supplied: zeros of tau that were zero in every
  // pool member, and the remaining zeros of tau.
  std::optional<std::size_t> frozen_zero_elements;
  std::optional<std::size_t> masked_zero_elements;
};

SparsityReport sparsity_report(const TaskVector& tau,
                               const GroupingRule& grouping,
                               std::optional<Pool> pool = std::nullopt);

nlohmann::json to_json(const SparsityReport& report);
// Rows: kind,name,elements,zeros,zero_fraction (kind in total/group/tensor).
std::string to_csv(const SparsityReport& report);

struct RetainForget {
  double retain = 0.0;
  double forget = 0.0;
};

using SweepEvalFn = std::function<RetainForget(const TensorMap&)>;

struct LambdaPoint {
  double lambda = 0.0;
  double retain = 0.0;
  double forget = 0.0;
  bool feasible = false;
};

struct LambdaSweep {
  std::vector<LambdaPoint> points;  // grid order
  double retain_floor_ratio = 0.95;
  double baseline_retain = 0.0;
  double baseline_forget = 0.0;
  double selected_lambda = 0.0;
  std::size_t selected_index = 0;

  const LambdaPoint& selected() const { return points.at(selected_index); }
};

// 0.05, 0.10, ..., 1.00.
std::vector<double> default_lambda_grid();

// Evaluates the base model once and apply(base, tau, lambda, negate) at every
// grid point, then selects the largest lambda whose retain metric is at least
// floor * baseline retain. Throws kNoFeasibleLambda if none qualifies and
// kInvalidConfig for an empty, unsorted or negative grid.
LambdaSweep sweep_lambda(const TensorMap& base, const TaskVector& tau,
                         const std::vector<double>& grid,
                         const SweepEvalFn& eval, double floor = 0.95,
                         const Exec& exec = {});

nlohmann::json to_json(const LambdaSweep& sweep);
// Rows: lambda,retain,forget,feasible,selected.
std::string to_csv(const LambdaSweep& sweep);

// Shortest round-trip decimal form of a double, for machine-readable output.
std::string format_double(double value);

}  // namespace negmerge

#endif  // NEGMERGE_ANALYSIS_HPP_
