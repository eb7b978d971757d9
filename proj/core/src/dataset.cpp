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

#include "negmerge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "negmerge/error.hpp"

namespace negmerge {
namespace {

constexpr int kPlacementRestarts = 200;
constexpr int kAttemptsPerCenter = 2000;

std::vector<std::vector<double>> place_centers(std::size_t n_classes,
                                               std::size_t dim,
                                               double separation,
                                               std::mt19937_64& rng) {
  // Radius of the ball the centers are drawn from: large enough that random
  // placement usually succeeds, small enough that clusters stay comparable.
  const double radius =
      separation *
      std::max(1.0, std::pow(static_cast<double>(n_classes), 1.0 / dim));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  auto draw = [&] {
    std::vector<double> c(dim);
    double norm = 0.0;
    for (auto& x : c) {
      x = normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    const double r = radius * std::pow(uniform(rng), 1.0 / dim);
    for (auto& x : c) x = norm > 0.0 ? x / norm * r : 0.0;
    return c;
  };

  for (int restart = 0; restart < kPlacementRestarts; ++restart) {
    std::vector<std::vector<double>> centers;
    bool stuck = false;
    while (centers.size() < n_classes && !stuck) {
      stuck = true;
      for (int attempt = 0; attempt < kAttemptsPerCenter; ++attempt) {
        auto c = draw();
        const bool ok = std::all_of(
            centers.begin(), centers.end(), [&](const auto& other) {
              double d2 = 0.0;
              for (std::size_t j = 0; j < dim; ++j) {
                d2 += (c[j] - other[j]) * (c[j] - other[j]);
              }
              return std::sqrt(d2) >= separation;
            });
        if (ok) {
          centers.push_back(std::move(c));
          stuck = false;
          break;
        }
      }
    }
    if (!stuck) return centers;
  }
  throw Error(ErrorCode::kInfeasibleSeparation,
              "cannot place " + std::to_string(n_classes) +
                  " class centers at separation " + std::to_string(separation) +
                  " in dimension " + std::to_string(dim));
}

}  // namespace

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

Dataset gen_dataset(std::size_t n_classes, std::size_t dim,
                    std::size_t samples_per_class, double separation,
                    std::uint64_t seed) {
  if (n_classes == 0 || dim == 0 || samples_per_class == 0) {
    throw Error(ErrorCode::kInvalidConfig, "dataset counts must be positive");
  }
  if (!std::isfinite(separation) || separation < 0.0) {
    throw Error(ErrorCode::kInvalidConfig,
                "separation must be finite and non-negative", "separation");
  }
  auto rng = make_rng(seed, 0);
  const auto centers = place_centers(n_classes, dim, separation, rng);

  Dataset ds;
  ds.dim = dim;
  ds.n_classes = n_classes;
  const std::size_t total = n_classes * samples_per_class;
  ds.features.reserve(total * dim);
  ds.labels.reserve(total);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t s = 0; s < samples_per_class; ++s) {
      for (std::size_t j = 0; j < dim; ++j) {
        ds.features.push_back(centers[c][j] + noise(rng));
      }
      ds.labels.push_back(static_cast<int>(c));
    }
  }

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = total * 8 / 10;
  const std::size_t n_val = total / 10;
  ds.train.assign(order.begin(), order.begin() + n_train);
  ds.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  ds.test.assign(order.begin() + n_train + n_val, order.end());
  for (auto* split : {&ds.train, &ds.val, &ds.test}) {
    std::sort(split->begin(), split->end());
  }
  ds.retain = ds.train;
  return ds;
}

Dataset split_forget(const Dataset& ds, const ForgetMode& mode,
                     std::uint64_t seed) {
  Dataset out = ds;
  out.forget.clear();
  out.retain.clear();
  if (mode.kind == ForgetMode::Kind::kRandomFraction) {
    if (!(mode.fraction > 0.0 && mode.fraction < 1.0)) {
      throw Error(ErrorCode::kInvalidConfig,
                  "forget fraction must lie in (0, 1)", "fraction");
    }
    auto rng = make_rng(seed, 1);
    auto shuffled = ds.train;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto k = static_cast<std::size_t>(
        std::llround(mode.fraction * static_cast<double>(shuffled.size())));
    out.forget.assign(shuffled.begin(), shuffled.begin() + k);
    out.retain.assign(shuffled.begin() + k, shuffled.end());
  } else {
    if (mode.cls < 0 || static_cast<std::size_t>(mode.cls) >= ds.n_classes) {
      throw Error(ErrorCode::kInvalidConfig,
                  "forget class " + std::to_string(mode.cls) + " is not valid",
                  "class");
    }
    for (auto i : ds.train) {
      (ds.labels[i] == mode.cls ? out.forget : out.retain).push_back(i);
    }
  }
  if (out.forget.empty() || out.retain.empty()) {
    throw Error(ErrorCode::kEmptyPartition,
                "forget/retain split leaves an empty partition");
  }
  std::sort(out.forget.begin(), out.forget.end());
  std::sort(out.retain.begin(), out.retain.end());
  return out;
}

LabeledData subset(const Dataset& ds, std::span<const std::size_t> indices) {
  LabeledData out;
  out.dim = ds.dim;
  out.features.reserve(indices.size() * ds.dim);
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    const auto r = ds.row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

}  // namespace negmerge
