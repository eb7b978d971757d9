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

#include "negmerge/merging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "elementwise.hpp"
#include "negmerge/error.hpp"

namespace negmerge {
namespace {

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

Schema check_pool(Pool pool) {
  if (pool.empty()) {
    throw Error(ErrorCode::kEmptyPool, "merge pool is empty");
  }
  Schema schema = pool.front().schema();
  for (std::size_t k = 1; k < pool.size(); ++k) {
    check_compatible(schema, pool[k].schema());
  }
  return schema;
}

// Runs `fn(values, n) -> double` on every element, where `values` holds the
// pool's entries for that element in pool order.
template <typename Fn>
TaskVector reduce_pool(Pool pool, const Exec& exec, Fn fn) {
  const Schema schema = check_pool(pool);
  std::vector<std::vector<const Tensor*>> members;
  members.reserve(pool.size());
  for (const auto& tau : pool) members.push_back(detail::tensors_of(tau.delta));

  std::vector<DType> dtypes;
  for (const auto& [_, sig] : schema) dtypes.push_back(sig.dtype);

  auto out = detail::make_buffers(schema);
  const auto chunks = detail::make_chunks(schema);
  const std::size_t n = pool.size();
  parallel_for(chunks.size(), exec.threads, [&](std::size_t u) {
    const auto& c = chunks[u];
    std::vector<double> column(n);
    std::vector<const double*> src(n);
    for (std::size_t k = 0; k < n; ++k) {
      src[k] = members[k][c.tensor]->values().data();
    }
    auto& dst = out[c.tensor];
    for (std::size_t i = c.begin; i < c.end; ++i) {
      for (std::size_t k = 0; k < n; ++k) column[k] = src[k][i];
      dst[i] = detail::canonical_zero(
          round_to(dtypes[c.tensor], fn(column.data(), n)));
    }
  });
  return TaskVector{detail::assemble(schema, std::move(out)), {}};
}

// Sign shared by at least `required` members, or 0.
int agreeing_sign(const double* v, std::size_t n, std::size_t required) {
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    pos += v[k] > 0.0;
    neg += v[k] < 0.0;
  }
  if (pos >= required) return 1;
  if (neg >= required) return -1;
  return 0;
}

double reduce_agreeing(const double* v, std::size_t n, int sign,
                       ReduceOp op) {
  double sum = 0.0;
  std::size_t count = 0;
  double min_mag = 0.0;
  double max_mag = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (sign_of(v[k]) != sign) continue;
    if (count == 0) {
      min_mag = max_mag = v[k];
    } else {
      if (std::abs(v[k]) < std::abs(min_mag)) min_mag = v[k];
      if (std::abs(v[k]) > std::abs(max_mag)) max_mag = v[k];
    }
    sum += v[k];
    ++count;
  }
  switch (op) {
    case ReduceOp::kAvg:
      return detail::agreeing_mean(sum, count, min_mag, max_mag);
    case ReduceOp::kMinMag: return min_mag;
    case ReduceOp::kMaxMag: return max_mag;
    case ReduceOp::kMin: return sign > 0 ? min_mag : max_mag;
    case ReduceOp::kMax: return sign > 0 ? max_mag : min_mag;
  }
  return 0.0;
}

}  // namespace

std::string_view to_string(MergeMethod method) {
  switch (method) {
    case MergeMethod::kNegMerge: return "negmerge";
    case MergeMethod::kConflict: return "conflict";
    case MergeMethod::kUniform: return "uniform";
    case MergeMethod::kTies: return "ties";
    case MergeMethod::kMagMax: return "magmax";
  }
  return "unknown";
}

std::string_view to_string(ReduceOp op) {
  switch (op) {
    case ReduceOp::kAvg: return "avg";
    case ReduceOp::kMinMag: return "min_mag";
    case ReduceOp::kMaxMag: return "max_mag";
    case ReduceOp::kMin: return "min";
    case ReduceOp::kMax: return "max";
  }
  return "unknown";
}

std::optional<MergeMethod> parse_merge_method(std::string_view name) {
  for (auto m : {MergeMethod::kNegMerge, MergeMethod::kConflict,
                 MergeMethod::kUniform, MergeMethod::kTies,
                 MergeMethod::kMagMax}) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

std::optional<ReduceOp> parse_reduce_op(std::string_view name) {
  for (auto op : {ReduceOp::kAvg, ReduceOp::kMinMag, ReduceOp::kMaxMag,
                  ReduceOp::kMin, ReduceOp::kMax}) {
    if (name == to_string(op)) return op;
  }
  return std::nullopt;
}

void MergeSpec::validate() const {
  if (!(consensus_threshold > 0.5 && consensus_threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig,
                "consensus threshold q must lie in (0.5, 1], got " +
                    std::to_string(consensus_threshold),
                "q");
  }
  if (!(ties_trim_fraction > 0.0 && ties_trim_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig,
                "TIES trim fraction must lie in (0, 1], got " +
                    std::to_string(ties_trim_fraction),
                "ties_trim_fraction");
  }
}

nlohmann::json to_json(const MergeSpec& spec) {
  return {{"method", to_string(spec.method)},
          {"reduce", to_string(spec.reduce)},
          {"q", spec.consensus_threshold},
          {"ties_trim_fraction", spec.ties_trim_fraction}};
}

MergeSpec merge_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kInvalidConfig, "merge spec must be a JSON object");
  }
  MergeSpec spec;
  for (const auto& [key, value] : j.items()) {
    if (key == "method") {
      auto m = value.is_string() ? parse_merge_method(value.get<std::string>())
                                 : std::nullopt;
      if (!m) throw Error(ErrorCode::kInvalidConfig, "unknown merge method", key);
      spec.method = *m;
    } else if (key == "reduce") {
      auto r = value.is_string() ? parse_reduce_op(value.get<std::string>())
                                 : std::nullopt;
      if (!r) throw Error(ErrorCode::kInvalidConfig, "unknown reduce op", key);
      spec.reduce = *r;
    } else if (key == "q" || key == "ties_trim_fraction") {
      if (!value.is_number()) {
        throw Error(ErrorCode::kInvalidConfig, key + " must be a number", key);
      }
      (key == "q" ? spec.consensus_threshold : spec.ties_trim_fraction) =
          value.get<double>();
    } else {
      throw Error(ErrorCode::kInvalidConfig,
                  "unknown merge spec key '" + key + "'", key);
    }
  }
  spec.validate();
  return spec;
}

std::size_t ConsensusMask::active_count() const {
  std::size_t n = 0;
  for (const auto& [_, m] : active) n += std::count(m.begin(), m.end(), 1);
  return n;
}

std::size_t ConsensusMask::element_count() const {
  std::size_t n = 0;
  for (const auto& [_, m] : active) n += m.size();
  return n;
}

bool ConsensusMask::subset_of(const ConsensusMask& other) const {
  for (const auto& [name, m] : active) {
    auto it = other.active.find(name);
    if (it == other.active.end() || it->second.size() != m.size()) return false;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] && !it->second[i]) return false;
    }
  }
  return true;
}

std::size_t ceil_fraction(double fraction, std::size_t n) {
  const double x = fraction * static_cast<double>(n);
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, x)) {
    return static_cast<std::size_t>(r);
  }
  return static_cast<std::size_t>(std::ceil(x));
}

ConsensusMask consensus_mask(Pool pool, double q, const Exec& exec) {
  MergeSpec spec;
  spec.consensus_threshold = q;
  spec.validate();
  const std::size_t required = ceil_fraction(q, pool.size());
  const TaskVector flags = reduce_pool(
      pool, exec, [required](const double* v, std::size_t n) {
        return agreeing_sign(v, n, required) != 0 ? 1.0 : 0.0;
      });
  ConsensusMask mask;
  for (const auto& [name, t] : flags.delta) {
    std::vector<std::uint8_t> m(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) m[i] = t[i] != 0.0;
    mask.active.emplace(name, std::move(m));
  }
  return mask;
}

TaskVector merge_negmerge(Pool pool, const MergeSpec& spec, const Exec& exec) {
  spec.validate();
  const std::size_t required =
      ceil_fraction(spec.consensus_threshold, pool.size());
  const ReduceOp op = spec.reduce;
  auto tau = reduce_pool(pool, exec,
                         [required, op](const double* v, std::size_t n) {
                           const int s = agreeing_sign(v, n, required);
                           return s == 0 ? 0.0 : reduce_agreeing(v, n, s, op);
                         });
  tau.origin = "negmerge";
  return tau;
}

TaskVector merge_conflict(Pool pool, const Exec& exec) {
  if (pool.empty()) throw Error(ErrorCode::kEmptyPool, "merge pool is empty");
  if (pool.size() < 2) {
    throw Error(ErrorCode::kPoolTooSmall,
                "conflict merge needs at least two task vectors");
  }
  auto tau = reduce_pool(pool, exec, [](const double* v, std::size_t n) {
    bool pos = false;
    bool neg = false;
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      pos |= v[k] > 0.0;
      neg |= v[k] < 0.0;
      sum += v[k];
    }
    return pos && neg ? sum / static_cast<double>(n) : 0.0;
  });
  tau.origin = "conflict";
  return tau;
}

TaskVector merge_uniform(Pool pool, const Exec& exec) {
  auto tau = reduce_pool(pool, exec, [](const double* v, std::size_t n) {
    double sum = 0.0;
    bool constant = true;
    for (std::size_t k = 0; k < n; ++k) {
      sum += v[k];
      constant = constant && v[k] == v[0];
    }
    return constant ? v[0] : sum / static_cast<double>(n);
  });
  tau.origin = "uniform";
  return tau;
}

TaskVector merge_magmax(Pool pool, const Exec& exec) {
  auto tau = reduce_pool(pool, exec, [](const double* v, std::size_t n) {
    double best = v[0];
    for (std::size_t k = 1; k < n; ++k) {
      if (std::abs(v[k]) > std::abs(best)) best = v[k];
    }
    return best;
  });
  tau.origin = "magmax";
  return tau;
}

TaskVector ties_trim(const TaskVector& tau, double k) {
  if (!(k > 0.0 && k <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "TIES trim fraction must lie in (0, 1]",
                "ties_trim_fraction");
  }
  // Flat view over all tensors in canonical order.
  std::vector<double> flat;
  flat.reserve(tau.delta.element_count());
  for (const auto& [_, t] : tau.delta) {
    flat.insert(flat.end(), t.values().begin(), t.values().end());
  }
  const std::size_t keep = std::min(flat.size(), ceil_fraction(k, flat.size()));

  std::vector<std::size_t> order(flat.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto larger = [&](std::size_t a, std::size_t b) {
    const double ma = std::abs(flat[a]);
    const double mb = std::abs(flat[b]);
    return ma != mb ? ma > mb : a < b;
  };
  if (keep < order.size()) {
    std::nth_element(order.begin(), order.begin() + keep, order.end(), larger);
  }
  std::vector<std::uint8_t> kept(flat.size(), 0);
  for (std::size_t r = 0; r < keep; ++r) kept[order[r]] = 1;

  TaskVector out;
  out.origin = tau.origin;
  std::size_t offset = 0;
  for (const auto& [name, t] : tau.delta) {
    std::vector<double> values(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      values[i] = kept[offset + i] ? t[i] : 0.0;
    }
    offset += t.size();
    out.delta.insert(name, Tensor(t.dtype(), t.shape(), std::move(values)));
  }
  return out;
}

TaskVector merge_ties(Pool pool, const MergeSpec& spec, const Exec& exec) {
  spec.validate();
  check_pool(pool);
  std::vector<TaskVector> trimmed(pool.size());
  parallel_for(pool.size(), exec.threads, [&](std::size_t k) {
    trimmed[k] = ties_trim(pool[k], spec.ties_trim_fraction);
  });

  auto tau = reduce_pool(trimmed, exec, [](const double* v, std::size_t n) {
    // Positive vs negative mass, each summed in ascending order.
    std::vector<double> pos;
    std::vector<double> neg;
    for (std::size_t k = 0; k < n; ++k) {
      if (v[k] > 0.0) pos.push_back(v[k]);
      if (v[k] < 0.0) neg.push_back(-v[k]);
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    const double pos_mass = std::accumulate(pos.begin(), pos.end(), 0.0);
    const double neg_mass = std::accumulate(neg.begin(), neg.end(), 0.0);
    if (pos_mass == neg_mass) return 0.0;
    const int elected = pos_mass > neg_mass ? 1 : -1;
    double sum = 0.0;
    std::size_t count = 0;
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (sign_of(v[k]) != elected) continue;
      lo = count == 0 ? v[k] : std::min(lo, v[k]);
      hi = count == 0 ? v[k] : std::max(hi, v[k]);
      sum += v[k];
      ++count;
    }
    return detail::agreeing_mean(sum, count, lo, hi);
  });
  tau.origin = "ties";
  return tau;
}

TaskVector merge(Pool pool, const MergeSpec& spec, const Exec& exec) {
  switch (spec.method) {
    case MergeMethod::kNegMerge: return merge_negmerge(pool, spec, exec);
    case MergeMethod::kConflict: return merge_conflict(pool, exec);
    case MergeMethod::kUniform: return merge_uniform(pool, exec);
    case MergeMethod::kTies: return merge_ties(pool, spec, exec);
    case MergeMethod::kMagMax: return merge_magmax(pool, exec);
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown merge method");
}

namespace {

TensorMap soup_model(const Schema& schema,
                     const std::vector<std::vector<double>>& sums,
                     std::size_t count) {
  auto buffers = sums;
  for (auto& b : buffers) {
    for (auto& v : b) v /= static_cast<double>(count);
  }
  return detail::assemble(schema, std::move(buffers));
}

void add_into(std::vector<std::vector<double>>& sums, const TensorMap& model) {
  std::size_t t = 0;
  for (const auto& [_, tensor] : model) {
    auto& dst = sums[t++];
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += tensor[i];
  }
}

}  // namespace

GreedySoupResult greedy_soup(std::span<const TensorMap> candidates,
                             const TensorMap& base, const LossFn& retain_loss,
                             GreedyOrder order) {
  if (candidates.empty()) {
    throw Error(ErrorCode::kEmptyPool, "greedy soup has no candidates");
  }
  const Schema schema = schema_of(base);
  for (const auto& c : candidates) check_compatible(schema_of(c), schema);

  GreedySoupResult result;
  for (const auto& c : candidates) result.candidate_loss.push_back(retain_loss(c));
  result.order.resize(candidates.size());
  std::iota(result.order.begin(), result.order.end(), std::size_t{0});
  std::stable_sort(result.order.begin(), result.order.end(),
                   [&](std::size_t a, std::size_t b) {
                     const double la = result.candidate_loss[a];
                     const double lb = result.candidate_loss[b];
                     return order == GreedyOrder::kDescendingLoss ? la > lb
                                                                  : la < lb;
                   });

  auto sums = detail::make_buffers(schema);
  add_into(sums, candidates[result.order.front()]);
  std::size_t count = 1;
  result.accepted.push_back(result.order.front());
  result.soup_loss = retain_loss(soup_model(schema, sums, count));

  for (std::size_t r = 1; r < result.order.size(); ++r) {
    auto trial = sums;
    add_into(trial, candidates[result.order[r]]);
    const double loss = retain_loss(soup_model(schema, trial, count + 1));
    if (loss <= result.soup_loss) {
      sums = std::move(trial);
      ++count;
      result.soup_loss = loss;
      result.accepted.push_back(result.order[r]);
    }
  }
  result.tau = diff(soup_model(schema, sums, count), base);
  result.tau.origin = "greedy";
  return result;
}

}  // namespace negmerge
