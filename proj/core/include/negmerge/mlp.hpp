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

#ifndef NEGMERGE_MLP_HPP_
#define NEGMERGE_MLP_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "negmerge/dataset.hpp"
#include "negmerge/tensor_store.hpp"

namespace negmerge {

// Fully connected ReLU network. Parameters are named "layers.<k>.weight"
// ([out, in]) and "layers.<k>.bias" ([out]).
struct MlpConfig {
  std::size_t input_dim = 16;
  std::vector<std::size_t> hidden = {32};
  std::size_t n_classes = 10;
  DType dtype = DType::kF32;

  // Throws kInvalidConfig for zero sizes or no hidden layer.
  void validate() const;
  Schema schema() const;
};

struct TrainHyper {
  double lr = 0.1;
  std::size_t epochs = 10;
  double weight_decay = 0.0;
  double label_smoothing = 0.0;
  std::size_t batch = 32;
  double momentum = 0.9;
  double input_jitter = 0.0;  // std of Gaussian noise added to inputs
  std::uint64_t seed = 0;

  // Throws kInvalidConfig for non-positive lr or batch, negative decay,
  // jitter or momentum >= 1, and smoothing outside [0, 1).
  void validate() const;
};

nlohmann::json to_json(const TrainHyper& hyper);

// He-initialized weights and zero biases, deterministic per seed.
TensorMap init_mlp(const MlpConfig& cfg, std::uint64_t seed);

// Class scores for one sample.
std::vector<double> mlp_logits(const MlpConfig& cfg, const TensorMap& params,
                               std::span<const double> x);

// Mean smoothed cross-entropy over `data` plus 0.5 * weight_decay * |theta|^2.
double mlp_loss(const MlpConfig& cfg, const TensorMap& params,
                const LabeledData& data, double weight_decay = 0.0,
                double label_smoothing = 0.0);

struct LossAndGradient {
  double loss = 0.0;
  TensorMap gradient;  // F64, same names and shapes as the parameters
};

LossAndGradient mlp_loss_and_gradient(const MlpConfig& cfg,
                                      const TensorMap& params,
                                      const LabeledData& data,
                                      double weight_decay = 0.0,
                                      double label_smoothing = 0.0);

// Minibatch SGD with momentum from `init` (or init_mlp(cfg, hyper.seed)).
// Computation is in double; the result is stored in cfg.dtype. Throws
// kTrainingDiverged when the loss or a parameter becomes non-finite.
TensorMap train(const MlpConfig& cfg, const LabeledData& data,
                const TrainHyper& hyper,
                const std::optional<TensorMap>& init = std::nullopt);

// Per-sample unsmoothed cross-entropy and top-1 correctness.
std::vector<double> sample_losses(const MlpConfig& cfg,
                                  const TensorMap& params,
                                  const LabeledData& data);
double accuracy(const MlpConfig& cfg, const TensorMap& params,
                const LabeledData& data);

}  // namespace negmerge

#endif  // NEGMERGE_MLP_HPP_
