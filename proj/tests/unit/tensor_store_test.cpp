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

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <unistd.h>

#include "negmerge/error.hpp"
#include "oracles.hpp"

namespace negmerge {
namespace {

// Hand-assembles a container: length prefix, header text, raw data bytes.
std::vector<std::uint8_t> assemble(const std::string& header,
                                   const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> out(8);
  const std::uint64_t n = header.size();
  for (int b = 0; b < 8; ++b) out[b] = static_cast<std::uint8_t>(n >> (8 * b));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

std::vector<std::uint8_t> f32_bytes(std::initializer_list<float> values) {
  std::vector<std::uint8_t> out;
  for (float v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int b = 0; b < 4; ++b) {
      out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  }
  return out;
}

ErrorCode decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode did not throw";
  return ErrorCode::kIo;
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("negmerge_ts_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::filesystem::path dir_;
};

TEST(DecodeTest, HandAssembledF32) {
  const auto bytes = assemble(
      R"({"w":{"dtype":"F32","shape":[2],"data_offsets":[0,8]}})",
      f32_bytes({1.0f, 2.0f}));
  const TensorMap map = decode(bytes);
  ASSERT_EQ(map.size(), 1u);
  const Tensor& w = map.at("w");
  EXPECT_EQ(w.dtype(), DType::kF32);
  EXPECT_EQ(w.shape(), Shape({2}));
  EXPECT_EQ(w[0], 1.0);
  EXPECT_EQ(w[1], 2.0);
}

TEST(DecodeTest, ZeroLengthTensor) {
  const auto bytes = assemble(
      R"({"e":{"dtype":"F64","shape":[0],"data_offsets":[0,0]}})", {});
  const TensorMap map = decode(bytes);
  EXPECT_EQ(map.at("e").size(), 0u);
  EXPECT_EQ(map.at("e").shape(), Shape({0}));
}

TEST(DecodeTest, ScalarShape) {
  const auto bytes = assemble(
      R"({"s":{"dtype":"F32","shape":[],"data_offsets":[0,4]}})",
      f32_bytes({-3.5f}));
  EXPECT_EQ(decode(bytes).at("s")[0], -3.5);
}

TEST(DecodeTest, OffsetBeyondBuffer) {
  const auto bytes = assemble(
      R"({"w":{"dtype":"F32","shape":[2],"data_offsets":[0,16]}})",
      f32_bytes({1.0f, 2.0f}));
  EXPECT_EQ(decode_error(bytes), ErrorCode::kOffsetOutOfBounds);
}

TEST(DecodeTest, OverlappingOffsets) {
  const auto bytes = assemble(
      R"({"a":{"dtype":"F32","shape":[2],"data_offsets":[0,8]},)"
      R"("b":{"dtype":"F32","shape":[2],"data_offsets":[4,12]}})",
      f32_bytes({1.0f, 2.0f, 3.0f}));
  EXPECT_EQ(decode_error(bytes), ErrorCode::kOverlappingData);
}

TEST(DecodeTest, UnknownDtype) {
  const auto bytes = assemble(
      R"({"w":{"dtype":"BF16","shape":[2],"data_offsets":[0,4]}})",
      {0, 0, 0, 0});
  EXPECT_EQ(decode_error(bytes), ErrorCode::kUnknownDtype);
}

TEST(DecodeTest, DuplicateName) {
  const auto bytes = assemble(
      R"({"w":{"dtype":"F32","shape":[1],"data_offsets":[0,4]},)"
      R"("w":{"dtype":"F32","shape":[1],"data_offsets":[4,8]}})",
      f32_bytes({1.0f, 2.0f}));
  EXPECT_EQ(decode_error(bytes), ErrorCode::kDuplicateName);
}

TEST(DecodeTest, MalformedHeader) {
  EXPECT_EQ(decode_error(assemble("{not json", {})),
            ErrorCode::kMalformedHeader);
  EXPECT_EQ(decode_error(assemble("[1,2]", {})), ErrorCode::kMalformedHeader);
  EXPECT_EQ(decode_error({1, 2, 3}), ErrorCode::kMalformedHeader);
}

TEST(DecodeTest, HeaderLongerThanFile) {
  std::vector<std::uint8_t> bytes(8, 0);
  bytes[0] = 200;
  bytes.push_back('{');
  EXPECT_EQ(decode_error(bytes), ErrorCode::kHeaderTooLarge);
}

TEST(DecodeTest, SizeMismatchIsMalformed) {
  const auto bytes = assemble(
      R"({"w":{"dtype":"F32","shape":[3],"data_offsets":[0,8]}})",
      f32_bytes({1.0f, 2.0f}));
  EXPECT_EQ(decode_error(bytes), ErrorCode::kMalformedHeader);
}

TEST(DecodeTest, MetadataRoundTrips) {
  TensorMap map;
  map.insert("w", Tensor(DType::kF64, {1}, {4.0}));
  map.metadata()["note"] = "hello";
  const TensorMap back = decode(encode(map));
  EXPECT_EQ(back.metadata().at("note"), "hello");
  EXPECT_EQ(back, map);
}

TEST(DecodeTest, NonFiniteRejectedUnlessAllowed) {
  TensorMap map;
  map.insert("w", Tensor(DType::kF64, {2},
                         {1.0, std::numeric_limits<double>::quiet_NaN()}));
  try {
    encode(map);
    FAIL() << "expected NonFiniteValue";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteValue);
    EXPECT_EQ(e.subject(), "w");
  }
  const auto bytes = encode(map, IoOptions{true});
  EXPECT_THROW(decode(bytes), Error);
  EXPECT_TRUE(std::isnan(decode(bytes, IoOptions{true}).at("w")[1]));
}

TEST_F(TempDir, SaveLoadIsIdempotent) {
  TensorMap map;
  map.insert("w", Tensor(DType::kF32, {2}, {1.0, 2.0}));
  const auto path = dir_ / "w.nm";
  save(map, path);
  const auto first = encode(load(path));
  save(load(path), dir_ / "w2.nm");
  EXPECT_EQ(encode(load(dir_ / "w2.nm")), first);
  EXPECT_EQ(first, encode(map));
}

TEST_F(TempDir, MissingFileIsIoError) {
  try {
    load(dir_ / "absent.nm");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(RoundTripTest, RandomF32TensorsAreBitEqual) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> uni(-1e6f, 1e6f);
  TensorMap map;
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> values(1 + rng() % 16);
    for (auto& v : values) v = uni(rng);
    map.insert("t" + std::to_string(k),
               Tensor(DType::kF32, {values.size()}, values));
  }
  const TensorMap back = decode(encode(map));
  ASSERT_EQ(back.size(), map.size());
  for (const auto& [name, t] : map) {
    const Tensor& u = back.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) {
      ASSERT_TRUE(testing::bit_equal(t[i], u[i])) << name;
    }
  }
  EXPECT_EQ(encode(back), encode(map));
}

TEST(TensorTest, ConstructorRoundsToF32) {
  const Tensor t(DType::kF32, {1}, {0.1});
  EXPECT_EQ(t[0], static_cast<double>(0.1f));
  EXPECT_THROW(Tensor(DType::kF32, {3}, {1.0}), Error);
}

TEST(TensorMapTest, InsertRejectsDuplicatesAndEmptyNames) {
  TensorMap map;
  map.insert("a", Tensor::zeros(DType::kF64, {1}));
  try {
    map.insert("a", Tensor::zeros(DType::kF64, {1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateName);
  }
  EXPECT_THROW(map.insert("", Tensor::zeros(DType::kF64, {1})), Error);
}

TEST(SchemaTest, IdenticalMapsAreCompatible) {
  TensorMap a;
  a.insert("w", Tensor(DType::kF32, {2}, {1, 2}));
  EXPECT_NO_THROW(check_compatible(schema_of(a), schema_of(a)));
}

TEST(SchemaTest, ShapeMismatchNamesTensor) {
  TensorMap a;
  TensorMap b;
  a.insert("w", Tensor::zeros(DType::kF32, {2}));
  b.insert("w", Tensor::zeros(DType::kF32, {3}));
  try {
    check_compatible(schema_of(a), schema_of(b));
    FAIL();
  } catch (const SchemaMismatch& e) {
    EXPECT_EQ(e.name(), "w");
    EXPECT_EQ(e.reason(), "shape");
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
  }
}

TEST(SchemaTest, MissingTensorNamesTensor) {
  TensorMap a;
  TensorMap b;
  a.insert("w", Tensor::zeros(DType::kF32, {2}));
  b.insert("w", Tensor::zeros(DType::kF32, {2}));
  b.insert("b", Tensor::zeros(DType::kF32, {2}));
  try {
    check_compatible(schema_of(a), schema_of(b));
    FAIL();
  } catch (const SchemaMismatch& e) {
    EXPECT_EQ(e.name(), "b");
    EXPECT_EQ(e.reason(), "missing");
  }
}

TEST(SchemaTest, DtypeMismatch) {
  TensorMap a;
  TensorMap b;
  a.insert("w", Tensor::zeros(DType::kF32, {2}));
  b.insert("w", Tensor::zeros(DType::kF64, {2}));
  try {
    check_compatible(schema_of(a), schema_of(b));
    FAIL();
  } catch (const SchemaMismatch& e) {
    EXPECT_EQ(e.reason(), "dtype");
  }
}

TEST(SchemaTest, JsonRoundTrip) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Schema s = testing::random_schema(rng);
    EXPECT_EQ(schema_from_json(schema_to_json(s)), s);
  }
}

TEST(DTypeTest, NamesAndSizes) {
  EXPECT_EQ(dtype_name(DType::kF32), "F32");
  EXPECT_EQ(dtype_name(DType::kF64), "F64");
  EXPECT_EQ(parse_dtype("F64"), DType::kF64);
  EXPECT_FALSE(parse_dtype("I8").has_value());
  EXPECT_EQ(dtype_size(DType::kF32), 4u);
  EXPECT_EQ(dtype_size(DType::kF64), 8u);
}

}  // namespace
}  // namespace negmerge
