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

#include "negmerge/tensor_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <utility>

#include "negmerge/error.hpp"

namespace negmerge {
namespace {

using nlohmann::json;

constexpr std::string_view kMetadataKey = "__metadata__";

template <typename T>
T to_little_endian(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return value;
}

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  value = to_little_endian(value);
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T read_le(const std::uint8_t* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return to_little_endian(value);
}

[[noreturn]] void malformed(const std::string& what,
                            const std::string& subject = {}) {
  throw Error(ErrorCode::kMalformedHeader, "malformed header: " + what,
              subject);
}

void check_finite(const std::string& name, const Tensor& t,
                  const IoOptions& options) {
  if (!options.allow_nonfinite && !t.all_finite()) {
    throw Error(ErrorCode::kNonFiniteValue,
                "tensor '" + name + "' contains a non-finite value", name);
  }
}

struct Entry {
  std::string name;
  DType dtype;
  Shape shape;
  std::uint64_t begin;
  std::uint64_t end;
};

// Rejects duplicate top-level keys, which a plain json parse would silently
// collapse.
json parse_header(std::string_view text) {
  std::set<std::string> seen;
  std::string duplicate;
  auto callback = [&](int depth, json::parse_event_t event, json& parsed) {
    if (depth == 1 && event == json::parse_event_t::key) {
      auto key = parsed.get<std::string>();
      if (!seen.insert(key).second && duplicate.empty()) duplicate = key;
    }
    return true;
  };
  json header;
  try {
    header = json::parse(text.begin(), text.end(), callback);
  } catch (const json::parse_error& e) {
    malformed(e.what());
  }
  if (!duplicate.empty()) {
    throw Error(ErrorCode::kDuplicateName,
                "duplicate tensor name '" + duplicate + "'", duplicate);
  }
  if (!header.is_object()) malformed("header is not a JSON object");
  return header;
}

Entry parse_entry(const std::string& name, const json& info) {
  if (name.empty()) malformed("empty tensor name");
  if (!info.is_object()) malformed("entry is not an object", name);
  auto dt = info.find("dtype");
  auto sh = info.find("shape");
  auto off = info.find("data_offsets");
  if (dt == info.end() || !dt->is_string()) malformed("missing dtype", name);
  if (sh == info.end() || !sh->is_array()) malformed("missing shape", name);
  if (off == info.end() || !off->is_array() || off->size() != 2) {
    malformed("missing data_offsets", name);
  }

  Entry e{name, DType::kF64, {}, 0, 0};
  const auto dtype = parse_dtype(dt->get<std::string>());
  if (!dtype) {
    throw Error(ErrorCode::kUnknownDtype,
                "tensor '" + name + "' has unsupported dtype '" +
                    dt->get<std::string>() + "'",
                name);
  }
  e.dtype = *dtype;
  for (const auto& extent : *sh) {
    if (!extent.is_number_unsigned() && !(extent.is_number_integer() &&
                                          extent.get<std::int64_t>() >= 0)) {
      malformed("shape extents must be non-negative integers", name);
    }
    e.shape.push_back(extent.get<std::uint64_t>());
  }
  for (const auto& o : *off) {
    if (!o.is_number_unsigned() &&
        !(o.is_number_integer() && o.get<std::int64_t>() >= 0)) {
      malformed("data_offsets must be non-negative integers", name);
    }
  }
  e.begin = (*off)[0].get<std::uint64_t>();
  e.end = (*off)[1].get<std::uint64_t>();
  return e;
}

}  // namespace

std::string_view dtype_name(DType dtype) {
  return dtype == DType::kF32 ? "F32" : "F64";
}

std::optional<DType> parse_dtype(std::string_view name) {
  if (name == "F32") return DType::kF32;
  if (name == "F64") return DType::kF64;
  return std::nullopt;
}

std::size_t dtype_size(DType dtype) { return dtype == DType::kF32 ? 4 : 8; }

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= static_cast<std::size_t>(extent);
  return n;
}

Tensor::Tensor(DType dtype, Shape shape, std::vector<double> values)
    : dtype_(dtype), shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != element_count(shape_)) {
    throw Error(ErrorCode::kInvalidConfig,
                "tensor value count " + std::to_string(values_.size()) +
                    " does not match shape element count " +
                    std::to_string(element_count(shape_)));
  }
  if (dtype_ == DType::kF32) {
    for (auto& v : values_) v = round_to(DType::kF32, v);
  }
}

Tensor Tensor::zeros(DType dtype, Shape shape) {
  const auto n = element_count(shape);
  return Tensor(dtype, std::move(shape), std::vector<double>(n, 0.0));
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

bool operator==(const Tensor& a, const Tensor& b) {
  if (a.dtype_ != b.dtype_ || a.shape_ != b.shape_ ||
      a.values_.size() != b.values_.size()) {
    return false;
  }
  return a.values_.empty() ||
         std::memcmp(a.values_.data(), b.values_.data(),
                     a.values_.size() * sizeof(double)) == 0;
}

void TensorMap::insert(std::string name, Tensor tensor) {
  if (name.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "tensor names must be non-empty");
  }
  if (entries_.contains(name)) {
    throw Error(ErrorCode::kDuplicateName,
                "duplicate tensor name '" + name + "'", name);
  }
  entries_.emplace(std::move(name), std::move(tensor));
}

void TensorMap::insert_or_assign(std::string name, Tensor tensor) {
  if (name.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "tensor names must be non-empty");
  }
  entries_.insert_or_assign(std::move(name), std::move(tensor));
}

bool TensorMap::contains(std::string_view name) const {
  return entries_.find(name) != entries_.end();
}

const Tensor& TensorMap::at(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw SchemaMismatch(std::string(name), "missing");
  }
  return it->second;
}

std::size_t TensorMap::element_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.size();
  return n;
}

Schema schema_of(const TensorMap& map) {
  Schema schema;
  for (const auto& [name, t] : map) {
    schema.emplace(name, TensorSignature{t.dtype(), t.shape()});
  }
  return schema;
}

void check_compatible(const Schema& a, const Schema& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      throw SchemaMismatch(ia->first, "missing");
    }
    if (ia == a.end() || ib->first < ia->first) {
      throw SchemaMismatch(ib->first, "missing");
    }
    if (ia->second.dtype != ib->second.dtype) {
      throw SchemaMismatch(ia->first, "dtype");
    }
    if (ia->second.shape != ib->second.shape) {
      throw SchemaMismatch(ia->first, "shape");
    }
    ++ia;
    ++ib;
  }
}

json schema_to_json(const Schema& schema) {
  json j = json::object();
  for (const auto& [name, sig] : schema) {
    j[name] = {{"dtype", dtype_name(sig.dtype)}, {"shape", sig.shape}};
  }
  return j;
}

Schema schema_from_json(const json& j) {
  if (!j.is_object()) malformed("schema is not an object");
  Schema schema;
  for (const auto& [name, info] : j.items()) {
    if (!info.is_object() || !info.contains("dtype") ||
        !info.contains("shape")) {
      malformed("bad schema entry", name);
    }
    auto dtype = parse_dtype(info.at("dtype").get<std::string>());
    if (!dtype) {
      throw Error(ErrorCode::kUnknownDtype, "unsupported dtype in schema",
                  name);
    }
    schema.emplace(name, TensorSignature{
                             *dtype, info.at("shape").get<Shape>()});
  }
  return schema;
}

TensorMap zeros_like(const Schema& schema) {
  TensorMap map;
  for (const auto& [name, sig] : schema) {
    map.insert(name, Tensor::zeros(sig.dtype, sig.shape));
  }
  return map;
}

std::vector<std::uint8_t> encode(const TensorMap& map,
                                 const IoOptions& options) {
  json header = json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : map) {
    check_finite(name, t, options);
    const std::uint64_t bytes = t.size() * dtype_size(t.dtype());
    header[name] = {{"dtype", dtype_name(t.dtype())},
                    {"shape", t.shape()},
                    {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  if (!map.metadata().empty()) header[std::string(kMetadataKey)] = map.metadata();

  std::string text = header.dump();
  // Pad the header to an 8-byte boundary.
  text.append((8 - text.size() % 8) % 8, ' ');

  std::vector<std::uint8_t> out;
  out.reserve(8 + text.size() + offset);
  append_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& [_, t] : map) {
    if (t.dtype() == DType::kF32) {
      for (double v : t.values()) append_le(out, static_cast<float>(v));
    } else {
      for (double v : t.values()) append_le(out, v);
    }
  }
  return out;
}

TensorMap decode(std::span<const std::uint8_t> bytes,
                 const IoOptions& options) {
  if (bytes.size() < 8) malformed("file shorter than the length prefix");
  const auto header_len = read_le<std::uint64_t>(bytes.data());
  if (header_len > bytes.size() - 8) {
    throw Error(ErrorCode::kHeaderTooLarge,
                "header length " + std::to_string(header_len) +
                    " exceeds file size");
  }
  const std::string_view text(reinterpret_cast<const char*>(bytes.data() + 8),
                              header_len);
  const json header = parse_header(text);
  const auto data = bytes.subspan(8 + header_len);

  TensorMap map;
  std::vector<Entry> entries;
  for (const auto& [key, info] : header.items()) {
    if (key == kMetadataKey) {
      if (!info.is_object()) malformed("__metadata__ is not an object");
      for (const auto& [mk, mv] : info.items()) {
        if (!mv.is_string()) malformed("metadata values must be strings", mk);
        map.metadata()[mk] = mv.get<std::string>();
      }
      continue;
    }
    entries.push_back(parse_entry(key, info));
  }

  for (const auto& e : entries) {
    if (e.begin > e.end || e.end > data.size()) {
      throw Error(ErrorCode::kOffsetOutOfBounds,
                  "tensor '" + e.name + "' data_offsets [" +
                      std::to_string(e.begin) + ", " + std::to_string(e.end) +
                      "] outside data section of " +
                      std::to_string(data.size()) + " bytes",
                  e.name);
    }
    if (e.end - e.begin != element_count(e.shape) * dtype_size(e.dtype)) {
      malformed("byte length does not match dtype and shape", e.name);
    }
  }
  auto sorted = entries;
  std::sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.begin, a.end) < std::tie(b.begin, b.end);
  });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].begin < sorted[i - 1].end) {
      throw Error(ErrorCode::kOverlappingData,
                  "tensors '" + sorted[i - 1].name + "' and '" +
                      sorted[i].name + "' overlap",
                  sorted[i].name);
    }
  }

  for (auto& e : entries) {
    const std::size_t n = element_count(e.shape);
    std::vector<double> values(n);
    const std::uint8_t* p = data.data() + e.begin;
    if (e.dtype == DType::kF32) {
      for (std::size_t i = 0; i < n; ++i) values[i] = read_le<float>(p + 4 * i);
    } else {
      for (std::size_t i = 0; i < n; ++i) values[i] = read_le<double>(p + 8 * i);
    }
    Tensor t(e.dtype, std::move(e.shape), std::move(values));
    check_finite(e.name, t, options);
    map.insert(std::move(e.name), std::move(t));
  }
  return map;
}

TensorMap load(const std::filesystem::path& path, const IoOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'",
                path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw Error(ErrorCode::kIo, "read failed for '" + path.string() + "'",
                path.string());
  }
  return decode(bytes, options);
}

void save(const TensorMap& map, const std::filesystem::path& path,
          const IoOptions& options) {
  const auto bytes = encode(map, options);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot open '" + path.string() +
                                    "' for writing",
                path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'",
                path.string());
  }
}

}  // namespace negmerge
