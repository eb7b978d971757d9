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

#ifndef NEGMERGE_CONSENSUS_STREAM_HPP_
#define NEGMERGE_CONSENSUS_STREAM_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "negmerge/merging.hpp"
#include "negmerge/parallel.hpp"
#include "negmerge/task_vector.hpp"
#include "negmerge/tensor_store.hpp"

namespace negmerge {

// Streaming sign-unanimity accumulator. Absorbs task vectors one at a time
// and finalizes to the same result as merge_negmerge with q = 1, holding
// O(elements) state regardless of how many vectors were absorbed.
//
// An element is alive while every absorbed value had the same non-zero sign
// as the first one. A zero in the first vector kills the element for good.
class SignConsensusState {
 public:
  // Per-tensor accumulator arrays.
  struct Slot {
    std::vector<std::int8_t> ref_sign;
    std::vector<std::uint8_t> alive;
    std::vector<double> sum;
    std::vector<double> min_mag;
    std::vector<double> max_mag;
  };

  SignConsensusState() = default;
  explicit SignConsensusState(Schema schema);

  // Throws SchemaMismatch if tau's schema differs from the state's.
  void update(const TaskVector& tau, const Exec& exec = {});

  // Throws kNoVectorsAbsorbed when nothing has been absorbed.
  TaskVector finalize(ReduceOp reduce = ReduceOp::kAvg) const;

  ConsensusMask mask() const;

  const Schema& schema() const noexcept { return schema_; }
  std::uint64_t count() const noexcept { return count_; }
  const Slot& slot(std::string_view name) const;

  // Container form: "<name>.sign" (F32 in {-1, 0, 1}; 0 marks a dead element
  // once count > 0), "<name>.sum", "<name>.min_mag", "<name>.max_mag" (F64),
  // with metadata {"n": count, "schema": <schema JSON>}.
  TensorMap to_tensor_map() const;
  static SignConsensusState from_tensor_map(const TensorMap& map);

  void save(const std::filesystem::path& path) const;
  static SignConsensusState load(const std::filesystem::path& path);

 private:
  Schema schema_;
  std::uint64_t count_ = 0;
  std::map<std::string, Slot, std::less<>> slots_;
};

}  // namespace negmerge

#endif  // NEGMERGE_CONSENSUS_STREAM_HPP_
