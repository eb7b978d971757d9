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

#include "negmerge/consensus_stream.hpp"

#include <charconv>
#include <cmath>
#include <utility>

#include "elementwise.hpp"
#include "negmerge/error.hpp"

namespace negmerge {
namespace {

constexpr std::string_view kSign = ".sign";
constexpr std::string_view kSum = ".sum";
constexpr std::string_view kMinMag = ".min_mag";
constexpr std::string_view kMaxMag = ".max_mag";

std::int8_t sign_of(double v) {
  return static_cast<std::int8_t>((v > 0.0) - (v < 0.0));
}

[[noreturn]] void bad_state(const std::string& what) {
  throw Error(ErrorCode::kMalformedHeader, "bad consensus state: " + what);
}

}  // namespace

SignConsensusState::SignConsensusState(Schema schema)
    : schema_(std::move(schema)) {
  for (const auto& [name, sig] : schema_) {
    const std::size_t n = element_count(sig.shape);
    Slot s;
    s.ref_sign.assign(n, 0);
    s.alive.assign(n, 1);
    s.sum.assign(n, 0.0);
    s.min_mag.assign(n, 0.0);
    s.max_mag.assign(n, 0.0);
    slots_.emplace(name, std::move(s));
  }
}

const SignConsensusState::Slot& SignConsensusState::slot(
    std::string_view name) const {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw SchemaMismatch(std::string(name), "missing");
  return it->second;
}

void SignConsensusState::update(const TaskVector& tau, const Exec& exec) {
  check_compatible(tau.schema(), schema_);
  const bool first = count_ == 0;

  std::vector<Slot*> slots;
  for (auto& [_, s] : slots_) slots.push_back(&s);
  const auto src = detail::tensors_of(tau.delta);
  const auto chunks = detail::make_chunks(schema_);
  parallel_for(chunks.size(), exec.threads, [&](std::size_t u) {
    const auto& c = chunks[u];
    Slot& s = *slots[c.tensor];
    const auto values = src[c.tensor]->values();
    for (std::size_t i = c.begin; i < c.end; ++i) {
      const double v = values[i];
      const std::int8_t sg = sign_of(v);
      if (first) {
        s.ref_sign[i] = sg;
        s.alive[i] = sg != 0;
        if (sg != 0) {
          s.sum[i] = v;
          s.min_mag[i] = v;
          s.max_mag[i] = v;
        }
        continue;
      }
      if (!s.alive[i]) continue;
      if (sg != s.ref_sign[i]) {
        s.alive[i] = 0;
        continue;
      }
      s.sum[i] += v;
      if (std::abs(v) < std::abs(s.min_mag[i])) s.min_mag[i] = v;
      if (std::abs(v) > std::abs(s.max_mag[i])) s.max_mag[i] = v;
    }
  });
  ++count_;
}

TaskVector SignConsensusState::finalize(ReduceOp reduce) const {
  if (count_ == 0) {
    throw Error(ErrorCode::kNoVectorsAbsorbed,
                "finalize called before any task vector was absorbed");
  }
  TaskVector tau;
  tau.origin = "negmerge";
  for (const auto& [name, sig] : schema_) {
    const Slot& s = slots_.at(name);
    std::vector<double> values(s.alive.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!s.alive[i]) continue;
      const bool positive = s.ref_sign[i] > 0;
      double v = 0.0;
      switch (reduce) {
        case ReduceOp::kAvg:
          v = detail::agreeing_mean(s.sum[i], count_, s.min_mag[i],
                                    s.max_mag[i]);
          break;
        case ReduceOp::kMinMag: v = s.min_mag[i]; break;
        case ReduceOp::kMaxMag: v = s.max_mag[i]; break;
        case ReduceOp::kMin: v = positive ? s.min_mag[i] : s.max_mag[i]; break;
        case ReduceOp::kMax: v = positive ? s.max_mag[i] : s.min_mag[i]; break;
      }
      values[i] = detail::canonical_zero(round_to(sig.dtype, v));
    }
    tau.delta.insert(name, Tensor(sig.dtype, sig.shape, std::move(values)));
  }
  return tau;
}

ConsensusMask SignConsensusState::mask() const {
  ConsensusMask m;
  for (const auto& [name, s] : slots_) {
    m.active.emplace(name, count_ == 0
                               ? std::vector<std::uint8_t>(s.alive.size(), 0)
                               : s.alive);
  }
  return m;
}

TensorMap SignConsensusState::to_tensor_map() const {
  TensorMap map;
  for (const auto& [name, s] : slots_) {
    const std::uint64_t n = s.alive.size();
    std::vector<double> sign(n);
    for (std::size_t i = 0; i < n; ++i) {
      sign[i] = (count_ == 0 || s.alive[i]) ? s.ref_sign[i] : 0.0;
    }
    map.insert(name + std::string(kSign), Tensor(DType::kF32, {n}, sign));
    map.insert(name + std::string(kSum), Tensor(DType::kF64, {n}, s.sum));
    map.insert(name + std::string(kMinMag),
               Tensor(DType::kF64, {n}, s.min_mag));
    map.insert(name + std::string(kMaxMag),
               Tensor(DType::kF64, {n}, s.max_mag));
  }
  map.metadata()["kind"] = "sign_consensus_state";
  map.metadata()["n"] = std::to_string(count_);
  map.metadata()["schema"] = schema_to_json(schema_).dump();
  return map;
}

SignConsensusState SignConsensusState::from_tensor_map(const TensorMap& map) {
  const auto& meta = map.metadata();
  auto n_it = meta.find("n");
  auto schema_it = meta.find("schema");
  if (n_it == meta.end() || schema_it == meta.end()) {
    bad_state("missing n or schema metadata");
  }
  std::uint64_t count = 0;
  const auto& n_text = n_it->second;
  auto [ptr, ec] =
      std::from_chars(n_text.data(), n_text.data() + n_text.size(), count);
  if (ec != std::errc() || ptr != n_text.data() + n_text.size()) {
    bad_state("n is not a count");
  }
  Schema schema;
  try {
    schema = schema_from_json(nlohmann::json::parse(schema_it->second));
  } catch (const nlohmann::json::exception& e) {
    bad_state(e.what());
  }

  SignConsensusState state(schema);
  state.count_ = count;
  for (auto& [name, s] : state.slots_) {
    const auto& sign = map.at(name + std::string(kSign));
    const auto& sum = map.at(name + std::string(kSum));
    const auto& min_mag = map.at(name + std::string(kMinMag));
    const auto& max_mag = map.at(name + std::string(kMaxMag));
    const std::size_t n = s.alive.size();
    if (sign.size() != n || sum.size() != n || min_mag.size() != n ||
        max_mag.size() != n) {
      bad_state("array length mismatch for '" + name + "'");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double sg = sign[i];
      if (sg != -1.0 && sg != 0.0 && sg != 1.0) bad_state("sign out of range");
      s.ref_sign[i] = static_cast<std::int8_t>(sg);
      s.alive[i] = count == 0 ? 1 : sg != 0.0;
    }
    s.sum.assign(sum.values().begin(), sum.values().end());
    s.min_mag.assign(min_mag.values().begin(), min_mag.values().end());
    s.max_mag.assign(max_mag.values().begin(), max_mag.values().end());
  }
  if (map.size() != 4 * schema.size()) {
    bad_state("tensors not described by the schema");
  }
  return state;
}

void SignConsensusState::save(const std::filesystem::path& path) const {
  negmerge::save(to_tensor_map(), path);
}

SignConsensusState SignConsensusState::load(
    const std::filesystem::path& path) {
  return from_tensor_map(negmerge::load(path));
}

}  // namespace negmerge
