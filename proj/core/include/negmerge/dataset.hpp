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

#ifndef NEGMERGE_DATASET_HPP_
#define NEGMERGE_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace negmerge {

// Deterministic generator for one (seed, stream) pair. Streams separate the
// randomness of independent consumers that share a seed.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

// Synthetic classification data with train/val/test splits and a
// forget/retain partition of the train split.
struct Dataset {
  std::size_t dim = 0;
  std::size_t n_classes = 0;
  std::vector<double> features;  // samples x dim, row-major
  std::vector<int> labels;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::vector<std::size_t> forget;  // subset of train
  std::vector<std::size_t> retain;  // train minus forget

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Gaussian clusters (unit noise per dimension) around class centers placed
// at pairwise distance >= separation; shuffled into an 80/10/10
// train/val/test split. The forget partition starts empty and retain equals
// train. Throws kInfeasibleSeparation when centers cannot be placed and
// kInvalidConfig for zero counts or a negative separation.
Dataset gen_dataset(std::size_t n_classes, std::size_t dim,
                    std::size_t samples_per_class, double separation,
                    std::uint64_t seed);

struct ForgetMode {
  enum class Kind { kRandomFraction, kClassWise };
  Kind kind = Kind::kRandomFraction;
  double fraction = 0.1;
  int cls = 0;

  static ForgetMode random_fraction(double p) {
    return {Kind::kRandomFraction, p, 0};
  }
  static ForgetMode class_wise(int c) { return {Kind::kClassWise, 0.0, c}; }
};

// Chooses round(p * |train|) random train samples (or every train sample of
// one class) as the forget set. Throws kEmptyPartition if either side would
// be empty and kInvalidConfig for p outside (0, 1) or an unknown class.
Dataset split_forget(const Dataset& ds, const ForgetMode& mode,
                     std::uint64_t seed);

// Features and labels of selected samples, copied out of a dataset.
struct LabeledData {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }
};

LabeledData subset(const Dataset& ds, std::span<const std::size_t> indices);

}  // namespace negmerge

#endif  // NEGMERGE_DATASET_HPP_
