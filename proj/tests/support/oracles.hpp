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

// Test-only reference implementations. Each oracle walks elements one at a
// time with the most literal arithmetic and shares no code with the library
// beyond reading tensors.

#ifndef NEGMERGE_TESTS_SUPPORT_ORACLES_HPP_
#define NEGMERGE_TESTS_SUPPORT_ORACLES_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "negmerge/merging.hpp"
#include "negmerge/task_vector.hpp"
#include "negmerge/tensor_store.hpp"

namespace negmerge::testing {

// ---- generators ------------------------------------------------------------

struct SchemaLimits {
  std::size_t max_tensors = 3;
  std::size_t max_elements = 64;  // per tensor
  bool allow_f32 = true;
};

Schema random_schema(std::mt19937_64& rng, const SchemaLimits& limits = {});

// Values ~ N(0, 1) with exact zeros at rate `zero_rate`.
TaskVector random_task_vector(std::mt19937_64& rng, const Schema& schema,
                              double zero_rate = 0.3);

std::vector<TaskVector> random_pool(std::mt19937_64& rng, std::size_t n,
                                    const Schema& schema,
                                    double zero_rate = 0.3);

TensorMap random_model(std::mt19937_64& rng, const Schema& schema);

// A fine-tune-like perturbation of `base`: every non-zero element moves by
// at most 40% of its magnitude, zero elements get small absolute noise.
TensorMap perturb(std::mt19937_64& rng, const TensorMap& base);

TaskVector negated(const TaskVector& tau);

// ---- comparison ------------------------------------------------------------

// |a - b| <= tol * max(|a|, |b|); exact zeros must match exactly.
bool rel_close(double a, double b, double tol);

// Empty on success, otherwise the first discrepancy.
std::string compare_values(const TaskVector& got,
                           const std::map<std::string, std::vector<double>>&
                               want,
                           double tol);
std::string compare_signs(const TaskVector& got,
                          const std::map<std::string, std::vector<double>>&
                              want);
std::string compare_mask(const ConsensusMask& got,
                         const std::map<std::string, std::vector<std::uint8_t>>&
                             want);

bool bit_equal(double a, double b);

// ---- oracles ---------------------------------------------------------------

// Exact ceil(num * n / den) in integers.
std::size_t ceil_ratio(std::size_t num, std::size_t den, std::size_t n);

struct OracleMerge {
  std::map<std::string, std::vector<std::uint8_t>> mask;
  std::map<std::string, std::vector<double>> values;
};

// Sign-consensus merge with threshold q = q_num / q_den.
OracleMerge oracle_negmerge(const std::vector<TaskVector>& pool,
                            ReduceOp reduce, std::size_t q_num = 1,
                            std::size_t q_den = 1);
OracleMerge oracle_conflict(const std::vector<TaskVector>& pool);
OracleMerge oracle_uniform(const std::vector<TaskVector>& pool);
OracleMerge oracle_magmax(const std::vector<TaskVector>& pool);
// Trim fraction k = k_num / k_den.
OracleMerge oracle_ties(const std::vector<TaskVector>& pool, std::size_t k_num,
                        std::size_t k_den);

struct OracleSoup {
  std::vector<std::size_t> accepted;
  std::map<std::string, std::vector<double>> tau;  // soup minus base
  double soup_loss = 0.0;
};

// Sequential acceptance: visit by descending (or ascending) loss, stable,
// recompute the candidate soup from scratch each step, keep it when loss
// does not rise.
OracleSoup oracle_greedy(const std::vector<TensorMap>& candidates,
                         const TensorMap& base,
                         const std::function<double(const TensorMap&)>& loss,
                         bool ascending = false);

}  // namespace negmerge::testing

#endif  // NEGMERGE_TESTS_SUPPORT_ORACLES_HPP_
