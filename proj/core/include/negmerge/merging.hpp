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

// Batch merging of task-vector pools.
//
// NegMerge keeps only the elements whose sign is identical and non-zero
// across the pool and reduces them (mean by default); every other element of
// the merged vector is exactly zero. The comparator strategies (conflict-only,
// uniform mean, TIES, MagMax, greedy soup) share the same pool conventions:
// all members must have one schema, and every reduction accumulates in
// 64-bit in pool order before rounding to the tensor dtype.

#ifndef NEGMERGE_MERGING_HPP_
#define NEGMERGE_MERGING_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "negmerge/parallel.hpp"
#include "negmerge/task_vector.hpp"
#include "negmerge/tensor_store.hpp"

namespace negmerge {

enum class MergeMethod { kNegMerge, kConflict, kUniform, kTies, kMagMax };

// kMinMag / kMaxMag pick the agreeing value of smallest / largest magnitude.
// kMin / kMax pick by signed value instead.
enum class ReduceOp { kAvg, kMinMag, kMaxMag, kMin, kMax };

std::string_view to_string(MergeMethod method);
std::string_view to_string(ReduceOp op);
std::optional<MergeMethod> parse_merge_method(std::string_view name);
std::optional<ReduceOp> parse_reduce_op(std::string_view name);

struct MergeSpec {
  MergeMethod method = MergeMethod::kNegMerge;
  ReduceOp reduce = ReduceOp::kAvg;        // NegMerge only
  double consensus_threshold = 1.0;        // q in (0.5, 1]
  double ties_trim_fraction = 0.20;        // k in (0, 1]

  // Throws kInvalidConfig for q or k outside their ranges.
  void validate() const;
};

// {"method", "reduce", "q", "ties_trim_fraction"}; missing keys keep their
// defaults, unknown keys and bad values throw kInvalidConfig.
nlohmann::json to_json(const MergeSpec& spec);
MergeSpec merge_spec_from_json(const nlohmann::json& j);

// Per tensor, 1 where the element is sign-consistent (active).
struct ConsensusMask {
  std::map<std::string, std::vector<std::uint8_t>, std::less<>> active;

  std::size_t active_count() const;
  std::size_t element_count() const;
  // True iff every active element here is also active in `other`.
  bool subset_of(const ConsensusMask& other) const;

  friend bool operator==(const ConsensusMask&,
                         const ConsensusMask&) = default;
};

using Pool = std::span<const TaskVector>;

// Smallest integer m with m >= fraction * n, tolerant to the rounding of the
// product (0.7 * 10 requires 7, not 8).
std::size_t ceil_fraction(double fraction, std::size_t n);

ConsensusMask consensus_mask(Pool pool, double q = 1.0, const Exec& exec = {});

TaskVector merge_negmerge(Pool pool, const MergeSpec& spec,
                          const Exec& exec = {});
// Mean over all members at elements where two non-zero inputs disagree in
// sign; zero elsewhere. Needs at least two members.
TaskVector merge_conflict(Pool pool, const Exec& exec = {});
TaskVector merge_uniform(Pool pool, const Exec& exec = {});
TaskVector merge_ties(Pool pool, const MergeSpec& spec, const Exec& exec = {});
// Largest-magnitude value per element; ties go to the lowest pool index.
TaskVector merge_magmax(Pool pool, const Exec& exec = {});

// Dispatches on spec.method.
TaskVector merge(Pool pool, const MergeSpec& spec, const Exec& exec = {});

// TIES trim stage for one vector: keeps the ceil(k * N) largest-magnitude
// elements across all its tensors (earlier canonical position wins ties) and
// zeroes the rest.
TaskVector ties_trim(const TaskVector& tau, double k);

enum class GreedyOrder { kDescendingLoss, kAscendingLoss };

using LossFn = std::function<double(const TensorMap&)>;

struct GreedySoupResult {
  TaskVector tau;                    // diff(final soup, base)
  std::vector<std::size_t> order;    // candidate indices in visiting order
  std::vector<std::size_t> accepted; // accepted candidate indices, in order
  std::vector<double> candidate_loss;
  double soup_loss = 0.0;
};

// Visits candidates sorted by their own retain loss (descending by default,
// ties by index) and adds each to a running uniform soup iff the soup's loss
// does not increase. The first visited candidate is always accepted.
GreedySoupResult greedy_soup(std::span<const TensorMap> candidates,
                             const TensorMap& base, const LossFn& retain_loss,
                             GreedyOrder order = GreedyOrder::kDescendingLoss);

}  // namespace negmerge

#endif  // NEGMERGE_MERGING_HPP_
