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

#ifndef NEGMERGE_TASK_VECTOR_HPP_
#define NEGMERGE_TASK_VECTOR_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "negmerge/parallel.hpp"
#include "negmerge/tensor_store.hpp"

namespace negmerge {

// A weight delta (fine-tuned minus base) with the base model's schema.
// Zeros produced by the library are always +0.0.
struct TaskVector {
  TensorMap delta;
  std::string origin;

  Schema schema() const { return schema_of(delta); }
  friend bool operator==(const TaskVector& a, const TaskVector& b) {
    return a.delta == b.delta;
  }
};

enum class Direction { kAdd, kNegate };

struct NegationConfig {
  double lambda = 1.0;
  Direction direction = Direction::kNegate;

  // Throws kInvalidConfig unless lambda is finite and non-negative.
  void validate() const;
};

// Active-weight lookup table: per tensor, strictly increasing row-major flat
// indices and their non-zero values.
struct SparseTensor {
  std::vector<std::uint64_t> indices;
  std::vector<double> values;
};

struct SparseTaskVector {
  Schema schema;
  std::map<std::string, SparseTensor, std::less<>> tensors;
  std::size_t nnz_total = 0;
  std::string origin;
};

TaskVector diff(const TensorMap& fine_tuned, const TensorMap& base,
                const Exec& exec = {});

// base ± lambda * tau, computed in 64-bit and rounded to each tensor's dtype.
// Elements whose scaled delta is zero keep the base value bit-for-bit.
TensorMap apply(const TensorMap& base, const TaskVector& tau,
                const NegationConfig& cfg, const Exec& exec = {});

SparseTaskVector sparsify(const TaskVector& tau);
TaskVector densify(const SparseTaskVector& sparse);

// Equal to apply(base, densify(sparse), cfg); touches only stored elements.
// Throws kIndexOutOfRange for an index past the end of its tensor.
TensorMap apply_sparse(const TensorMap& base, const SparseTaskVector& sparse,
                       const NegationConfig& cfg);

// Container encoding: "<name>.idx" (F64 ordinals) and "<name>.val" tensors,
// with metadata {"sparse": "1", "schema": <schema JSON>}.
TensorMap encode_sparse(const SparseTaskVector& sparse);
SparseTaskVector decode_sparse(const TensorMap& map);
bool is_sparse(const TensorMap& map);

void save_task_vector(const TaskVector& tau,
                      const std::filesystem::path& path);
void save_sparse(const SparseTaskVector& sparse,
                 const std::filesystem::path& path);
// Loads dense or sparse task-vector files; sparse ones are densified.
TaskVector load_task_vector(const std::filesystem::path& path);

}  // namespace negmerge

#endif  // NEGMERGE_TASK_VECTOR_HPP_
