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

#ifndef NEGMERGE_EXPERIMENT_HPP_
#define NEGMERGE_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "negmerge/analysis.hpp"
#include "negmerge/dataset.hpp"
#include "negmerge/metrics.hpp"
#include "negmerge/mlp.hpp"
#include "negmerge/parallel.hpp"
#include "negmerge/task_vector.hpp"

namespace negmerge {

// Hyperparameter axes of the fine-tuning pool. Configurations are the cross
// product in the order learning rate, epochs, weight decay, label smoothing,
// input jitter, seed (last axis fastest), truncated to pool_size.
struct FinetuneGrid {
  std::vector<double> learning_rates = {0.05};
  std::vector<std::size_t> epochs = {10};
  std::vector<double> weight_decays = {0.0};
  std::vector<double> label_smoothings = {0.0};
  std::vector<double> input_jitters = {0.0};
  std::vector<std::uint64_t> seeds = {0};
  std::size_t pool_size = 10;
  bool enforce_pool_range = true;  // pool size must lie in [5, 30]
  std::size_t batch = 32;
  double momentum = 0.9;

  // Throws kInvalidConfig for empty axes or a pool size out of range.
  void validate() const;
  std::vector<TrainHyper> enumerate() const;
};

// Fine-tunes a copy of `base` on `forget_data` for every grid configuration.
// A diverging member raises kTrainingDiverged naming its configuration.
std::vector<TensorMap> finetune_pool(const TensorMap& base,
                                     const LabeledData& forget_data,
                                     const FinetuneGrid& grid,
                                     const MlpConfig& cfg,
                                     const Exec& exec = {});

inline constexpr const char* kAllMethods[] = {
    "negmerge", "negmerge_min", "negmerge_max", "conflict",   "uniform",
    "ties",     "magmax",       "single_best",  "greedy"};

struct ExperimentConfig {
  std::size_t n_classes = 10;
  std::size_t dim = 16;
  std::size_t samples_per_class = 200;
  double separation = 4.0;
  ForgetMode forget = ForgetMode::random_fraction(0.1);
  std::vector<std::size_t> hidden = {32};
  DType dtype = DType::kF32;
  TrainHyper base_training;
  FinetuneGrid finetune;
  std::vector<std::string> methods;
  double consensus_threshold = 1.0;
  double ties_trim_fraction = 0.2;
  std::vector<double> lambda_grid;
  double retain_floor = 0.95;
  std::optional<double> forced_lambda;
  std::vector<std::uint64_t> seeds = {0};

  MlpConfig model() const;
  // Throws kInvalidConfig naming the offending field.
  void validate() const;
};

// 0.05, 0.10, ..., 5.00.
std::vector<double> toy_lambda_grid();

// The standard toy setup: 10 classes, dim 16, 200 samples per class, 10%
// random forgetting, a 10-member pool, retain floor 0.95 and seeds 0..9.
ExperimentConfig toy_config();

nlohmann::json to_json(const ExperimentConfig& cfg);
// Missing keys keep the toy defaults; unknown keys and ill-typed values
// throw kInvalidConfig.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct MethodResult {
  std::string method;
  double lambda = 0.0;
  EvalReport report;
  LambdaSweep sweep;
  double zero_fraction = 0.0;
  std::optional<std::size_t> member;     // single_best: chosen pool index
  std::vector<std::size_t> accepted;     // greedy: accepted pool indices
};

// Intermediate products, kept on request for verification.
struct SeedArtifacts {
  Dataset data;
  TensorMap base;
  TensorMap retrain;
  std::vector<TaskVector> pool;
  std::map<std::string, TaskVector> merged;
};

struct SeedReport {
  std::uint64_t seed = 0;
  EvalReport original;
  EvalReport retrain;
  std::size_t pool_size = 0;
  std::vector<MethodResult> methods;
  std::optional<SeedArtifacts> artifacts;

  const MethodResult& method(std::string_view name) const;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<SeedReport> seeds;
};

struct RunOptions {
  bool keep_artifacts = false;
  Exec exec;
};

// Per seed: data, base model on train, Retrain reference on retain, pool
// fine-tuned on forget, task vectors, then merge, lambda sweep and
// evaluation for every method. Errors surface as kExperimentStage with the
// stage name as subject.
ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const RunOptions& options = {});

// The sweep's retain and forget metrics: validation and forget accuracy.
RetainForget sweep_metrics(const TensorMap& model, const Dataset& ds,
                           const MlpConfig& cfg);

nlohmann::json to_json(const SeedReport& report);
nlohmann::json to_json(const ExperimentReport& report);
// Columns seed,method,acc_Dr,acc_Df,acc_Dtest,mia,avg_gap,lambda; one
// Retrain row then one row per method for every seed.
std::string to_csv(const ExperimentReport& report);

}  // namespace negmerge

#endif  // NEGMERGE_EXPERIMENT_HPP_
