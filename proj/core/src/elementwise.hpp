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

// Internal helpers for chunked element-wise kernels over a schema.

#ifndef NEGMERGE_SRC_ELEMENTWISE_HPP_
#define NEGMERGE_SRC_ELEMENTWISE_HPP_

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "negmerge/parallel.hpp"
#include "negmerge/tensor_store.hpp"

namespace negmerge::detail {

struct Chunk {
  std::size_t tensor;  // position in canonical name order
  std::size_t begin;
  std::size_t end;
};

inline std::vector<Chunk> make_chunks(const Schema& schema) {
  std::vector<Chunk> chunks;
  std::size_t t = 0;
  for (const auto& [_, sig] : schema) {
    const std::size_t n = element_count(sig.shape);
    for (std::size_t b = 0; b < n; b += kChunkElements) {
      chunks.push_back({t, b, std::min(n, b + kChunkElements)});
    }
    ++t;
  }
  return chunks;
}

// Per-tensor output buffers in canonical order.
inline std::vector<std::vector<double>> make_buffers(const Schema& schema) {
  std::vector<std::vector<double>> out;
  out.reserve(schema.size());
  for (const auto& [_, sig] : schema) {
    out.emplace_back(element_count(sig.shape), 0.0);
  }
  return out;
}

inline TensorMap assemble(const Schema& schema,
                          std::vector<std::vector<double>> buffers) {
  TensorMap map;
  std::size_t t = 0;
  for (const auto& [name, sig] : schema) {
    map.insert(name, Tensor(sig.dtype, sig.shape, std::move(buffers[t++])));
  }
  return map;
}

// Tensor pointers of `map` in canonical order.
inline std::vector<const Tensor*> tensors_of(const TensorMap& map) {
  std::vector<const Tensor*> out;
  out.reserve(map.size());
  for (const auto& [_, t] : map) out.push_back(&t);
  return out;
}

// Normalizes -0.0 to +0.0.
inline double canonical_zero(double v) { return v == 0.0 ? 0.0 : v; }

// Mean of `count` same-signed values given their sum and extremes. Equal
// extremes mean every value is the same, and that value is returned exactly.
inline double agreeing_mean(double sum, std::size_t count, double lo,
                            double hi) {
  return lo == hi ? lo : sum / static_cast<double>(count);
}

}  // namespace negmerge::detail

#endif  // NEGMERGE_SRC_ELEMENTWISE_HPP_
