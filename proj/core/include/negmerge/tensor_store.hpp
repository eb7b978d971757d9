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

// Checkpoint container: named F32/F64 tensors stored as
//
//   [u64 little-endian N][N bytes UTF-8 JSON header][data section]
//
// The header maps each tensor name to {"dtype", "shape", "data_offsets"}
// (offsets relative to the data section) and may carry a string-to-string
// "__metadata__" object. This is the layout used by safetensors files, so
// F32/F64 checkpoints exported by common ML stacks load directly.

#ifndef NEGMERGE_TENSOR_STORE_HPP_
#define NEGMERGE_TENSOR_STORE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace negmerge {

enum class DType { kF32, kF64 };

std::string_view dtype_name(DType dtype);
std::optional<DType> parse_dtype(std::string_view name);
std::size_t dtype_size(DType dtype);

// Rounds `value` to the precision of `dtype` (identity for F64).
inline double round_to(DType dtype, double value) {
  return dtype == DType::kF32 ? static_cast<double>(static_cast<float>(value))
                              : value;
}

using Shape = std::vector<std::uint64_t>;

// Number of elements described by `shape`; an empty shape is a scalar.
std::size_t element_count(const Shape& shape);

// A dense row-major tensor. Elements are held as doubles; for F32 tensors
// every held value is exactly representable as a float, so conversion to and
// from the on-disk encoding is lossless.
class Tensor {
 public:
  Tensor() = default;
  // Values are rounded to `dtype`. Throws kInvalidConfig if the value count
  // does not match the shape.
  Tensor(DType dtype, Shape shape, std::vector<double> values);

  static Tensor zeros(DType dtype, Shape shape);

  DType dtype() const noexcept { return dtype_; }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool all_finite() const;

  // Bitwise equality of dtype, shape and every element.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  DType dtype_ = DType::kF64;
  Shape shape_;
  std::vector<double> values_ = {0.0};
};

using Metadata = std::map<std::string, std::string>;

// Named tensors, iterated in lexicographic name order. That order is the
// canonical order for every reduction in the library.
class TensorMap {
 public:
  using Entries = std::map<std::string, Tensor, std::less<>>;

  // Throws kDuplicateName for a repeated name and kInvalidConfig for an empty
  // one.
  void insert(std::string name, Tensor tensor);
  void insert_or_assign(std::string name, Tensor tensor);

  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }
  const Entries& entries() const noexcept { return entries_; }

  Metadata& metadata() noexcept { return metadata_; }
  const Metadata& metadata() const noexcept { return metadata_; }

  std::size_t element_count() const;

  // Compares entries bitwise; metadata is ignored.
  friend bool operator==(const TensorMap& a, const TensorMap& b) {
    return a.entries_ == b.entries_;
  }

 private:
  Entries entries_;
  Metadata metadata_;
};

struct TensorSignature {
  DType dtype = DType::kF64;
  Shape shape;

  friend bool operator==(const TensorSignature&,
                         const TensorSignature&) = default;
};

using Schema = std::map<std::string, TensorSignature, std::less<>>;

Schema schema_of(const TensorMap& map);

// Throws SchemaMismatch naming the first (lexicographically) mismatching
// tensor. Reasons: "missing", "dtype", "shape".
void check_compatible(const Schema& a, const Schema& b);

nlohmann::json schema_to_json(const Schema& schema);
Schema schema_from_json(const nlohmann::json& j);

// A zero-filled map with the given schema.
TensorMap zeros_like(const Schema& schema);

struct IoOptions {
  bool allow_nonfinite = false;
};

std::vector<std::uint8_t> encode(const TensorMap& map,
                                 const IoOptions& options = {});
TensorMap decode(std::span<const std::uint8_t> bytes,
                 const IoOptions& options = {});

TensorMap load(const std::filesystem::path& path,
               const IoOptions& options = {});
void save(const TensorMap& map, const std::filesystem::path& path,
          const IoOptions& options = {});

}  // namespace negmerge

#endif  // NEGMERGE_TENSOR_STORE_HPP_
