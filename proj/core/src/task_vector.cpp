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

#include "negmerge/task_vector.hpp"

#include <cmath>
#include <utility>

#include "elementwise.hpp"
#include "negmerge/error.hpp"

namespace negmerge {
namespace {

constexpr std::string_view kIdxSuffix = ".idx";
constexpr std::string_view kValSuffix = ".val";

double scaled_step(const NegationConfig& cfg, double delta) {
  const double step = cfg.lambda * delta;
  return cfg.direction == Direction::kNegate ? -step : step;
}

}  // namespace

void NegationConfig::validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw Error(ErrorCode::kInvalidConfig,
                "lambda must be finite and non-negative, got " +
                    std::to_string(lambda),
                "lambda");
  }
}

TaskVector diff(const TensorMap& fine_tuned, const TensorMap& base,
                const Exec& exec) {
  const Schema schema = schema_of(base);
  check_compatible(schema_of(fine_tuned), schema);

  const auto ft = detail::tensors_of(fine_tuned);
  const auto b = detail::tensors_of(base);
  auto out = detail::make_buffers(schema);
  const auto chunks = detail::make_chunks(schema);
  parallel_for(chunks.size(), exec.threads, [&](std::size_t u) {
    const auto& c = chunks[u];
    const DType dtype = b[c.tensor]->dtype();
    auto& dst = out[c.tensor];
    for (std::size_t i = c.begin; i < c.end; ++i) {
      dst[i] = detail::canonical_zero(
          round_to(dtype, (*ft[c.tensor])[i] - (*b[c.tensor])[i]));
    }
  });
  return TaskVector{detail::assemble(schema, std::move(out)), {}};
}

TensorMap apply(const TensorMap& base, const TaskVector& tau,
                const NegationConfig& cfg, const Exec& exec) {
  cfg.validate();
  const Schema schema = schema_of(base);
  check_compatible(tau.schema(), schema);
  if (cfg.lambda == 0.0) {
    TensorMap copy = base;
    copy.metadata().clear();
    return copy;
  }

  const auto b = detail::tensors_of(base);
  const auto d = detail::tensors_of(tau.delta);
  auto out = detail::make_buffers(schema);
  const auto chunks = detail::make_chunks(schema);
  parallel_for(chunks.size(), exec.threads, [&](std::size_t u) {
    const auto& c = chunks[u];
    const DType dtype = b[c.tensor]->dtype();
    auto& dst = out[c.tensor];
    for (std::size_t i = c.begin; i < c.end; ++i) {
      const double base_v = (*b[c.tensor])[i];
      const double step = scaled_step(cfg, (*d[c.tensor])[i]);
      dst[i] = step == 0.0 ? base_v : round_to(dtype, base_v + step);
    }
  });
  return detail::assemble(schema, std::move(out));
}

SparseTaskVector sparsify(const TaskVector& tau) {
  SparseTaskVector s;
  s.schema = tau.schema();
  s.origin = tau.origin;
  for (const auto& [name, t] : tau.delta) {
    SparseTensor st;
    const auto values = t.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] != 0.0) {
        st.indices.push_back(i);
        st.values.push_back(values[i]);
      }
    }
    s.nnz_total += st.indices.size();
    s.tensors.emplace(name, std::move(st));
  }
  return s;
}

namespace {

void check_sparse_tensor(const std::string& name, const SparseTensor& st,
                         std::size_t size) {
  if (st.indices.size() != st.values.size()) {
    throw Error(ErrorCode::kInvalidConfig,
                "sparse tensor '" + name + "' has mismatched index/value counts",
                name);
  }
  for (std::size_t k = 0; k < st.indices.size(); ++k) {
    if (st.indices[k] >= size) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "sparse index " + std::to_string(st.indices[k]) +
                      " out of range for tensor '" + name + "' of " +
                      std::to_string(size) + " elements",
                  name);
    }
    if (k > 0 && st.indices[k] <= st.indices[k - 1]) {
      throw Error(ErrorCode::kInvalidConfig,
                  "sparse indices of '" + name + "' are not strictly increasing",
                  name);
    }
  }
}

const SparseTensor& sparse_entry(const SparseTaskVector& s,
                                 const std::string& name) {
  auto it = s.tensors.find(name);
  if (it == s.tensors.end()) throw SchemaMismatch(name, "missing");
  return it->second;
}

}  // namespace

TaskVector densify(const SparseTaskVector& sparse) {
  TaskVector tau;
  tau.origin = sparse.origin;
  for (const auto& [name, sig] : sparse.schema) {
    const std::size_t n = element_count(sig.shape);
    const auto& st = sparse_entry(sparse, name);
    check_sparse_tensor(name, st, n);
    std::vector<double> values(n, 0.0);
    for (std::size_t k = 0; k < st.indices.size(); ++k) {
      values[st.indices[k]] = st.values[k];
    }
    tau.delta.insert(name, Tensor(sig.dtype, sig.shape, std::move(values)));
  }
  return tau;
}

TensorMap apply_sparse(const TensorMap& base, const SparseTaskVector& sparse,
                       const NegationConfig& cfg) {
  cfg.validate();
  check_compatible(sparse.schema, schema_of(base));
  TensorMap out;
  for (const auto& [name, t] : base) {
    const auto& st = sparse_entry(sparse, name);
    check_sparse_tensor(name, st, t.size());
    if (cfg.lambda == 0.0 || st.indices.empty()) {
      out.insert(name, t);
      continue;
    }
    std::vector<double> values(t.values().begin(), t.values().end());
    for (std::size_t k = 0; k < st.indices.size(); ++k) {
      const double step = scaled_step(cfg, st.values[k]);
      auto& v = values[st.indices[k]];
      if (step != 0.0) v = round_to(t.dtype(), v + step);
    }
    out.insert(name, Tensor(t.dtype(), t.shape(), std::move(values)));
  }
  return out;
}

TensorMap encode_sparse(const SparseTaskVector& sparse) {
  TensorMap map;
  for (const auto& [name, sig] : sparse.schema) {
    const auto& st = sparse_entry(sparse, name);
    check_sparse_tensor(name, st, element_count(sig.shape));
    const std::uint64_t nnz = st.indices.size();
    std::vector<double> idx(st.indices.begin(), st.indices.end());
    map.insert(name + std::string(kIdxSuffix),
               Tensor(DType::kF64, {nnz}, std::move(idx)));
    map.insert(name + std::string(kValSuffix),
               Tensor(sig.dtype, {nnz}, st.values));
  }
  map.metadata()["sparse"] = "1";
  map.metadata()["schema"] = schema_to_json(sparse.schema).dump();
  if (!sparse.origin.empty()) map.metadata()["origin"] = sparse.origin;
  return map;
}

bool is_sparse(const TensorMap& map) {
  auto it = map.metadata().find("sparse");
  return it != map.metadata().end() && it->second == "1";
}

SparseTaskVector decode_sparse(const TensorMap& map) {
  if (!is_sparse(map) || !map.metadata().contains("schema")) {
    throw Error(ErrorCode::kMalformedHeader,
                "not a sparse task-vector container");
  }
  SparseTaskVector s;
  try {
    s.schema = schema_from_json(
        nlohmann::json::parse(map.metadata().at("schema")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader,
                std::string("bad sparse schema metadata: ") + e.what());
  }
  if (auto it = map.metadata().find("origin"); it != map.metadata().end()) {
    s.origin = it->second;
  }
  for (const auto& [name, sig] : s.schema) {
    const auto& idx = map.at(name + std::string(kIdxSuffix));
    const auto& val = map.at(name + std::string(kValSuffix));
    if (idx.size() != val.size() || val.dtype() != sig.dtype) {
      throw Error(ErrorCode::kMalformedHeader,
                  "sparse pair for '" + name + "' is inconsistent", name);
    }
    SparseTensor st;
    st.indices.reserve(idx.size());
    for (double v : idx.values()) {
      if (!(v >= 0.0) || v != std::floor(v) || v >= 0x1p53) {
        throw Error(ErrorCode::kIndexOutOfRange,
                    "sparse index is not a valid ordinal in '" + name + "'",
                    name);
      }
      st.indices.push_back(static_cast<std::uint64_t>(v));
    }
    st.values.assign(val.values().begin(), val.values().end());
    check_sparse_tensor(name, st, element_count(sig.shape));
    s.nnz_total += st.indices.size();
    s.tensors.emplace(name, std::move(st));
  }
  const std::size_t expected = 2 * s.schema.size();
  if (map.size() != expected) {
    throw Error(ErrorCode::kMalformedHeader,
                "sparse container holds tensors not described by its schema");
  }
  return s;
}

void save_task_vector(const TaskVector& tau,
                      const std::filesystem::path& path) {
  TensorMap map = tau.delta;
  map.metadata()["kind"] = "task_vector";
  if (!tau.origin.empty()) map.metadata()["origin"] = tau.origin;
  save(map, path);
}

void save_sparse(const SparseTaskVector& sparse,
                 const std::filesystem::path& path) {
  save(encode_sparse(sparse), path);
}

TaskVector load_task_vector(const std::filesystem::path& path) {
  TensorMap map = load(path);
  if (is_sparse(map)) return densify(decode_sparse(map));
  TaskVector tau;
  if (auto it = map.metadata().find("origin"); it != map.metadata().end()) {
    tau.origin = it->second;
  }
  map.metadata().clear();
  tau.delta = std::move(map);
  return tau;
}

}  // namespace negmerge
