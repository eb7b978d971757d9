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

#include <filesystem>
#include <random>

#include <gtest/gtest.h>
#include <unistd.h>

#include "negmerge/error.hpp"
#include "negmerge/merging.hpp"
#include "oracles.hpp"

namespace negmerge {
namespace {

TaskVector tv(std::vector<double> values) {
  TaskVector t;
  const Shape shape = {values.size()};
  t.delta.insert("w", Tensor(DType::kF64, shape, std::move(values)));
  return t;
}

TEST(SignConsensusStateTest, FinalizeBeforeUpdateFails) {
  SignConsensusState state(tv({1, 2}).schema());
  try {
    state.finalize();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoVectorsAbsorbed);
  }
}

TEST(SignConsensusStateTest, EmptySchemaIsValid) {
  SignConsensusState state{Schema{}};
  state.update(TaskVector{});
  EXPECT_EQ(state.count(), 1u);
  EXPECT_EQ(state.finalize().delta.size(), 0u);
}

TEST(SignConsensusStateTest, HandTrace) {
  SignConsensusState state(tv({0, 0, 0}).schema());
  state.update(tv({1, -2, 0}));
  const auto& s1 = state.slot("w");
  EXPECT_EQ(s1.ref_sign, (std::vector<std::int8_t>{1, -1, 0}));
  EXPECT_EQ(s1.alive, (std::vector<std::uint8_t>{1, 1, 0}));

  state.update(tv({2, -1, 4}));
  const auto& s2 = state.slot("w");
  EXPECT_EQ(s2.alive, (std::vector<std::uint8_t>{1, 1, 0}));
  EXPECT_EQ(s2.sum[0], 3);
  EXPECT_EQ(s2.sum[1], -3);

  state.update(tv({-1, -1, 1}));
  EXPECT_EQ(state.slot("w").alive, (std::vector<std::uint8_t>{0, 1, 0}));
  const TaskVector out = state.finalize(ReduceOp::kAvg);
  EXPECT_EQ(out.delta.at("w")[0], 0.0);
  EXPECT_EQ(out.delta.at("w")[1], -4.0 / 3.0);
  EXPECT_EQ(out.delta.at("w")[2], 0.0);
  EXPECT_EQ(state.finalize(ReduceOp::kMaxMag).delta.at("w")[1], -2.0);
  EXPECT_EQ(state.finalize(ReduceOp::kMinMag).delta.at("w")[1], -1.0);
}

TEST(SignConsensusStateTest, SingleUpdateIsIdentity) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Schema s = testing::random_schema(rng);
    const TaskVector tau = testing::random_task_vector(rng, s);
    SignConsensusState state(s);
    state.update(tau);
    EXPECT_EQ(state.finalize(), tau);
  }
}

TEST(SignConsensusStateTest, SchemaMismatchOnUpdate) {
  SignConsensusState state(tv({1, 2}).schema());
  EXPECT_THROW(state.update(tv({1, 2, 3})), SchemaMismatch);
}

TEST(SignConsensusStateTest, AliveSetOnlyShrinks) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Schema s = testing::random_schema(rng);
    const auto pool = testing::random_pool(rng, 8, s);
    SignConsensusState state(s);
    state.update(pool[0]);
    ConsensusMask prev = state.mask();
    for (std::size_t k = 1; k < pool.size(); ++k) {
      state.update(pool[k]);
      const ConsensusMask next = state.mask();
      ASSERT_TRUE(next.subset_of(prev));
      prev = next;
    }
  }
}

TEST(SignConsensusStateTest, MatchesBatchMerge) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Schema s = testing::random_schema(rng);
    const auto pool = testing::random_pool(rng, 1 + rng() % 8, s);
    SignConsensusState state(s);
    for (const auto& tau : pool) state.update(tau);
    EXPECT_EQ(state.mask(), consensus_mask(pool));
    for (auto op : {ReduceOp::kAvg, ReduceOp::kMinMag, ReduceOp::kMaxMag}) {
      MergeSpec spec;
      spec.reduce = op;
      // Same absorption order and accumulation: bitwise equal.
      ASSERT_EQ(state.finalize(op), merge_negmerge(pool, spec));
    }
  }
}

TEST(SignConsensusStateTest, StateSizeIndependentOfCount) {
  std::mt19937_64 rng(4);
  const Schema s = testing::random_schema(rng);
  SignConsensusState state(s);
  state.update(testing::random_task_vector(rng, s));
  const std::size_t elements_after_one = state.to_tensor_map().element_count();
  for (int k = 0; k < 20; ++k) state.update(testing::random_task_vector(rng, s));
  EXPECT_EQ(state.to_tensor_map().element_count(), elements_after_one);
}

TEST(SignConsensusStateTest, TensorMapRoundTripResumes) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Schema s = testing::random_schema(rng);
    const auto pool = testing::random_pool(rng, 2 + rng() % 7, s);
    SignConsensusState full(s);
    for (const auto& tau : pool) full.update(tau);

    SignConsensusState head(s);
    const std::size_t cut = pool.size() / 2;
    for (std::size_t k = 0; k < cut; ++k) head.update(pool[k]);
    SignConsensusState resumed =
        SignConsensusState::from_tensor_map(decode(encode(head.to_tensor_map())));
    EXPECT_EQ(resumed.count(), cut);
    for (std::size_t k = cut; k < pool.size(); ++k) resumed.update(pool[k]);
    ASSERT_EQ(resumed.finalize(), full.finalize());
    ASSERT_EQ(resumed.mask(), full.mask());
  }
}

TEST(SignConsensusStateTest, SaveLoad) {
  const auto path = std::filesystem::temp_directory_path() /
                    ("negmerge_state_" + std::to_string(::getpid()) + ".nm");
  SignConsensusState state(tv({0, 0}).schema());
  state.update(tv({1, -1}));
  state.save(path);
  SignConsensusState back = SignConsensusState::load(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.count(), 1u);
  back.update(tv({3, 1}));
  const TaskVector out = back.finalize();
  EXPECT_EQ(out.delta.at("w")[0], 2.0);
  EXPECT_EQ(out.delta.at("w")[1], 0.0);
}

TEST(SignConsensusStateTest, CorruptStateRejected) {
  SignConsensusState state(tv({0, 0}).schema());
  state.update(tv({1, -1}));
  TensorMap map = state.to_tensor_map();
  map.metadata().erase("n");
  EXPECT_THROW(SignConsensusState::from_tensor_map(map), Error);
}

}  // namespace
}  // namespace negmerge
