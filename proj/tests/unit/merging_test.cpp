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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "negmerge/error.hpp"
#include "oracles.hpp"

namespace negmerge {
namespace {

TaskVector tv(std::vector<double> values) {
  TaskVector t;
  const Shape shape = {values.size()};
  t.delta.insert("w", Tensor(DType::kF64, shape, std::move(values)));
  return t;
}

std::vector<double> w(const TaskVector& t) {
  const auto v = t.delta.at("w").values();
  return {v.begin(), v.end()};
}

MergeSpec negmerge_spec(ReduceOp reduce = ReduceOp::kAvg, double q = 1.0) {
  MergeSpec s;
  s.reduce = reduce;
  s.consensus_threshold = q;
  return s;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

// ---- NegMerge ----------------------------------------------------------------

TEST(NegMergeTest, HandExampleAvg) {
  const std::vector<TaskVector> pool = {tv({1, -2, 0, 3}), tv({2, -1, 4, -3})};
  EXPECT_EQ(w(merge_negmerge(pool, negmerge_spec())),
            (std::vector<double>{1.5, -1.5, 0, 0}));
}

TEST(NegMergeTest, HandExampleMaxMag) {
  const std::vector<TaskVector> pool = {tv({1, -2, 0, 3}), tv({2, -1, 4, -3})};
  EXPECT_EQ(w(merge_negmerge(pool, negmerge_spec(ReduceOp::kMaxMag))),
            (std::vector<double>{2, -2, 0, 0}));
  EXPECT_EQ(w(merge_negmerge(pool, negmerge_spec(ReduceOp::kMinMag))),
            (std::vector<double>{1, -1, 0, 0}));
  EXPECT_EQ(w(merge_negmerge(pool, negmerge_spec(ReduceOp::kMin))),
            (std::vector<double>{1, -2, 0, 0}));
  EXPECT_EQ(w(merge_negmerge(pool, negmerge_spec(ReduceOp::kMax))),
            (std::vector<double>{2, -1, 0, 0}));
}

TEST(NegMergeTest, SingleVectorIsIdentity) {
  const std::vector<TaskVector> pool = {tv({0, 1.25, -3, 0})};
  EXPECT_EQ(merge_negmerge(pool, negmerge_spec()), pool[0]);
}

TEST(NegMergeTest, AntipodalPairIsZero) {
  std::mt19937_64 rng(1);
  const Schema s = testing::random_schema(rng);
  const TaskVector tau = testing::random_task_vector(rng, s);
  const std::vector<TaskVector> pool = {tau, testing::negated(tau)};
  const TaskVector out = merge_negmerge(pool, negmerge_spec());
  for (const auto& [_, t] : out.delta) {
    for (double v : t.values()) EXPECT_TRUE(testing::bit_equal(v, 0.0));
  }
}

TEST(NegMergeTest, IdenticalPoolIsIdentity) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Schema s = testing::random_schema(rng);
    const TaskVector tau = testing::random_task_vector(rng, s);
    const std::vector<TaskVector> pool(2 + trial % 7, tau);
    EXPECT_EQ(merge_negmerge(pool, negmerge_spec()), tau);
  }
}

TEST(NegMergeTest, PartialConsensusThreshold) {
  // Three of four agree at index 0; two of four at index 1.
  const std::vector<TaskVector> pool = {tv({1, 1}), tv({2, 1}), tv({3, -1}),
                                        tv({-1, -1})};
  EXPECT_EQ(w(merge_negmerge(pool, negmerge_spec(ReduceOp::kAvg, 0.75))),
            (std::vector<double>{2, 0}));
  EXPECT_EQ(w(merge_negmerge(pool, negmerge_spec(ReduceOp::kAvg, 1.0))),
            (std::vector<double>{0, 0}));
}

TEST(NegMergeTest, MatchesOracleOnRandomPools) {
  std::mt19937_64 rng(3);
  const ReduceOp ops[] = {ReduceOp::kAvg, ReduceOp::kMinMag, ReduceOp::kMaxMag,
                          ReduceOp::kMin, ReduceOp::kMax};
  for (int trial = 0; trial < 300; ++trial) {
    const Schema s = testing::random_schema(rng);
    const auto pool = testing::random_pool(rng, 1 + rng() % 8, s);
    const ReduceOp op = ops[trial % 5];
    const auto want = testing::oracle_negmerge(pool, op);
    const TaskVector got = merge_negmerge(pool, negmerge_spec(op));
    ASSERT_EQ(testing::compare_values(got, want.values, 1e-12), "");
    ASSERT_EQ(testing::compare_mask(consensus_mask(pool), want.mask), "");
  }
}

TEST(NegMergeTest, RationalThresholdsMatchOracle) {
  std::mt19937_64 rng(4);
  const std::pair<std::size_t, std::size_t> qs[] = {{7, 10}, {3, 5}, {2, 3},
                                                    {9, 10}, {51, 100}};
  for (int trial = 0; trial < 200; ++trial) {
    const Schema s = testing::random_schema(rng);
    const auto pool = testing::random_pool(rng, 1 + rng() % 10, s, 0.1);
    const auto [num, den] = qs[trial % 5];
    const double q = static_cast<double>(num) / static_cast<double>(den);
    const auto want = testing::oracle_negmerge(pool, ReduceOp::kAvg, num, den);
    ASSERT_EQ(testing::compare_mask(consensus_mask(pool, q), want.mask), "");
    ASSERT_EQ(testing::compare_values(
                  merge_negmerge(pool, negmerge_spec(ReduceOp::kAvg, q)),
                  want.values, 1e-12),
              "");
  }
}

TEST(NegMergeTest, ThreadCountDoesNotChangeResult) {
  std::mt19937_64 rng(5);
  Schema s;
  s.emplace("a", TensorSignature{DType::kF32, {2 * kChunkElements + 3}});
  s.emplace("b", TensorSignature{DType::kF64, {kChunkElements}});
  const auto pool = testing::random_pool(rng, 6, s, 0.05);
  for (auto op : {ReduceOp::kAvg, ReduceOp::kMaxMag}) {
    EXPECT_EQ(merge_negmerge(pool, negmerge_spec(op), Exec{1}),
              merge_negmerge(pool, negmerge_spec(op), Exec{3}));
  }
  EXPECT_EQ(consensus_mask(pool, 1.0, Exec{1}),
            consensus_mask(pool, 1.0, Exec{4}));
}

TEST(NegMergeTest, Errors) {
  const std::vector<TaskVector> empty;
  EXPECT_EQ(code_of([&] { merge_negmerge(empty, negmerge_spec()); }),
            ErrorCode::kEmptyPool);
  const std::vector<TaskVector> mixed = {tv({1, 2}), tv({1, 2, 3})};
  EXPECT_THROW(merge_negmerge(mixed, negmerge_spec()), SchemaMismatch);
  const std::vector<TaskVector> pool = {tv({1})};
  EXPECT_EQ(code_of([&] {
              merge_negmerge(pool, negmerge_spec(ReduceOp::kAvg, 0.4));
            }),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([&] {
              merge_negmerge(pool, negmerge_spec(ReduceOp::kAvg, 0.5));
            }),
            ErrorCode::kInvalidConfig);
}

// ---- consensus mask -----------------------------------------------------------

TEST(ConsensusMaskTest, HandExample) {
  const std::vector<TaskVector> pool = {tv({1, -1, 0}), tv({2, 1, 0})};
  const ConsensusMask m = consensus_mask(pool);
  EXPECT_EQ(m.active.at("w"), (std::vector<std::uint8_t>{1, 0, 0}));
  EXPECT_EQ(m.active_count(), 1u);
  EXPECT_EQ(m.element_count(), 3u);
}

TEST(ConsensusMaskTest, IdenticalAndAntipodal) {
  const TaskVector tau = tv({1, -2, 3});
  const std::vector<TaskVector> same = {tau, tau, tau};
  EXPECT_EQ(consensus_mask(same).active_count(), 3u);
  const std::vector<TaskVector> anti = {tau, testing::negated(tau)};
  EXPECT_EQ(consensus_mask(anti).active_count(), 0u);
}

TEST(ConsensusMaskTest, EmptyPool) {
  const std::vector<TaskVector> empty;
  EXPECT_EQ(code_of([&] { consensus_mask(empty); }), ErrorCode::kEmptyPool);
}

TEST(ConsensusMaskTest, NestedPoolsShrink) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Schema s = testing::random_schema(rng);
    const auto pool = testing::random_pool(rng, 8, s);
    ConsensusMask prev = consensus_mask(Pool(pool).first(1));
    for (std::size_t k = 2; k <= pool.size(); ++k) {
      const ConsensusMask next = consensus_mask(Pool(pool).first(k));
      ASSERT_TRUE(next.subset_of(prev));
      prev = next;
    }
  }
}

TEST(CeilFractionTest, ExactProducts) {
  EXPECT_EQ(ceil_fraction(0.7, 10), 7u);
  EXPECT_EQ(ceil_fraction(1.0, 10), 10u);
  EXPECT_EQ(ceil_fraction(0.51, 2), 2u);
  EXPECT_EQ(ceil_fraction(0.6, 5), 3u);
  EXPECT_EQ(ceil_fraction(0.2, 14), 3u);
}

// ---- comparators -----------------------------------------------------------------

TEST(ConflictTest, HandExamples) {
  const std::vector<TaskVector> a = {tv({1, -2}), tv({-1, -1})};
  EXPECT_EQ(w(merge_conflict(a)), (std::vector<double>{0, 0}));
  const std::vector<TaskVector> b = {tv({3, -2}), tv({-1, -1})};
  EXPECT_EQ(w(merge_conflict(b)), (std::vector<double>{1, 0}));
}

TEST(ConflictTest, IdenticalPoolIsZero) {
  const std::vector<TaskVector> pool = {tv({1, -2, 0}), tv({1, -2, 0})};
  EXPECT_EQ(w(merge_conflict(pool)), (std::vector<double>{0, 0, 0}));
}

TEST(ConflictTest, NeedsTwoMembers) {
  const std::vector<TaskVector> one = {tv({1})};
  const std::vector<TaskVector> empty;
  EXPECT_EQ(code_of([&] { merge_conflict(one); }), ErrorCode::kPoolTooSmall);
  EXPECT_EQ(code_of([&] { merge_conflict(empty); }), ErrorCode::kEmptyPool);
}

TEST(UniformTest, HandMean) {
  const std::vector<TaskVector> pool = {tv({1, -2}), tv({3, 2})};
  EXPECT_EQ(w(merge_uniform(pool)), (std::vector<double>{2, 0}));
  const std::vector<TaskVector> single = {tv({0.1, -7})};
  EXPECT_EQ(merge_uniform(single), single[0]);
}

TEST(TiesTest, HandExample) {
  MergeSpec spec;
  spec.method = MergeMethod::kTies;
  spec.ties_trim_fraction = 1.0;
  const std::vector<TaskVector> pool = {tv({1, -2}), tv({3, 2})};
  EXPECT_EQ(w(merge_ties(pool, spec)), (std::vector<double>{2, 0}));
  const std::vector<TaskVector> same = {tv({1, -2, 0.5}), tv({1, -2, 0.5})};
  EXPECT_EQ(merge_ties(same, spec), same[0]);
}

TEST(TiesTest, TrimKeepsLargestAcrossTensors) {
  TaskVector t;
  t.delta.insert("a", Tensor(DType::kF64, {3}, {0.5, -4, 1}));
  t.delta.insert("b", Tensor(DType::kF64, {2}, {-2, 1}));
  // k = 0.4 keeps ceil(2) = 2 of 5 elements: -4 and -2.
  const TaskVector trimmed = ties_trim(t, 0.4);
  EXPECT_EQ(trimmed.delta.at("a").values()[1], -4);
  EXPECT_EQ(trimmed.delta.at("b").values()[0], -2);
  EXPECT_EQ(trimmed.delta.at("a").values()[2], 0);
  // Equal magnitudes: the earlier canonical position wins.
  const TaskVector tie = ties_trim(t, 0.6);
  EXPECT_EQ(tie.delta.at("a").values()[2], 1);
  EXPECT_EQ(tie.delta.at("b").values()[1], 0);
}

TEST(MagMaxTest, HandExamples) {
  const std::vector<TaskVector> pool = {tv({1, -2}), tv({-3, 1})};
  EXPECT_EQ(w(merge_magmax(pool)), (std::vector<double>{-3, -2}));
  const TaskVector tau = tv({1, -2, 0});
  const std::vector<TaskVector> anti = {tau, testing::negated(tau)};
  EXPECT_EQ(merge_magmax(anti), tau);
}

TEST(ComparatorTest, MatchOraclesOnRandomPools) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Schema s = testing::random_schema(rng);
    const auto pool = testing::random_pool(rng, 2 + rng() % 7, s);
    ASSERT_EQ(testing::compare_values(merge_uniform(pool),
                                      testing::oracle_uniform(pool).values,
                                      1e-12),
              "");
    ASSERT_EQ(testing::compare_values(merge_magmax(pool),
                                      testing::oracle_magmax(pool).values,
                                      1e-12),
              "");
    ASSERT_EQ(testing::compare_values(merge_conflict(pool),
                                      testing::oracle_conflict(pool).values,
                                      1e-12),
              "");
    MergeSpec spec;
    spec.method = MergeMethod::kTies;
    spec.ties_trim_fraction = 0.5;
    const auto want = testing::oracle_ties(pool, 1, 2);
    ASSERT_EQ(testing::compare_values(merge_ties(pool, spec), want.values,
                                      1e-12),
              "");
  }
}

TEST(ComparatorTest, EmptyAndMismatchedPools) {
  const std::vector<TaskVector> empty;
  const std::vector<TaskVector> mixed = {tv({1, 2}), tv({1})};
  MergeSpec ties;
  ties.method = MergeMethod::kTies;
  EXPECT_EQ(code_of([&] { merge_uniform(empty); }), ErrorCode::kEmptyPool);
  EXPECT_EQ(code_of([&] { merge_magmax(empty); }), ErrorCode::kEmptyPool);
  EXPECT_EQ(code_of([&] { merge_ties(empty, ties); }), ErrorCode::kEmptyPool);
  EXPECT_THROW(merge_uniform(mixed), SchemaMismatch);
  EXPECT_THROW(merge_magmax(mixed), SchemaMismatch);
  EXPECT_THROW(merge_ties(mixed, ties), SchemaMismatch);
}

// ---- greedy soup --------------------------------------------------------------

double distance_to(const TensorMap& m, const std::vector<double>& target) {
  double loss = 0.0;
  const auto v = m.at("w").values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    loss += (v[i] - target[i]) * (v[i] - target[i]);
  }
  return loss;
}

TEST(GreedySoupTest, SingleCandidate) {
  const TensorMap base = tv({1, 1}).delta;
  const std::vector<TensorMap> cands = {tv({3, 0}).delta};
  const auto r = greedy_soup(cands, base, [](const TensorMap&) { return 1.0; });
  EXPECT_EQ(w(r.tau), (std::vector<double>{2, -1}));
  EXPECT_EQ(r.accepted, (std::vector<std::size_t>{0}));
}

TEST(GreedySoupTest, RejectsCandidateThatRaisesLoss) {
  const TensorMap base = tv({0, 0}).delta;
  // Any non-zero second coordinate costs 10.
  const auto loss = [](const TensorMap& m) {
    const auto v = m.at("w").values();
    return std::abs(v[0] - 1.0) + (v[1] != 0.0 ? 10.0 : 0.0);
  };
  const std::vector<TensorMap> cands = {tv({5, 0}).delta, tv({1, 2}).delta};
  const auto r = greedy_soup(cands, base, loss);
  EXPECT_EQ(r.order, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(r.accepted, (std::vector<std::size_t>{1}));
  EXPECT_EQ(w(r.tau), (std::vector<double>{1, 2}));
  EXPECT_EQ(r.soup_loss, 10.0);
}

TEST(GreedySoupTest, AscendingOrder) {
  const TensorMap base = tv({0, 0}).delta;
  const std::vector<double> target = {1, 1};
  const std::vector<TensorMap> pair = {tv({3, 3}).delta, tv({1, 1}).delta};
  const auto r = greedy_soup(
      pair, base, [&](const TensorMap& m) { return distance_to(m, target); },
      GreedyOrder::kAscendingLoss);
  EXPECT_EQ(r.order, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(r.accepted, (std::vector<std::size_t>{1}));
}

TEST(GreedySoupTest, MatchesSequentialOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Schema s = testing::random_schema(rng);
    const TensorMap base = testing::random_model(rng, s);
    std::vector<TensorMap> cands;
    const std::size_t n = 1 + rng() % 5;
    for (std::size_t k = 0; k < n; ++k) {
      cands.push_back(testing::perturb(rng, base));
    }
    const TensorMap target = testing::perturb(rng, base);
    const auto loss = [&](const TensorMap& m) {
      double l = 0.0;
      for (const auto& [name, t] : m) {
        for (std::size_t i = 0; i < t.size(); ++i) {
          const double d = t[i] - target.at(name)[i];
          l += d * d;
        }
      }
      return l;
    };
    const auto got = greedy_soup(cands, base, loss);
    const auto want = testing::oracle_greedy(cands, base, loss);
    ASSERT_EQ(got.accepted, want.accepted);
    ASSERT_EQ(testing::compare_values(got.tau, want.tau, 1e-12), "");
  }
}

TEST(GreedySoupTest, EmptyCandidates) {
  const std::vector<TensorMap> none;
  EXPECT_EQ(code_of([&] {
              greedy_soup(none, tv({1}).delta,
                          [](const TensorMap&) { return 0.0; });
            }),
            ErrorCode::kEmptyPool);
}

// ---- spec parsing -----------------------------------------------------------------

TEST(MergeSpecTest, JsonRoundTripAndErrors) {
  MergeSpec s;
  s.method = MergeMethod::kTies;
  s.reduce = ReduceOp::kMaxMag;
  s.consensus_threshold = 0.8;
  s.ties_trim_fraction = 0.5;
  const MergeSpec back = merge_spec_from_json(to_json(s));
  EXPECT_EQ(back.method, s.method);
  EXPECT_EQ(back.reduce, s.reduce);
  EXPECT_EQ(back.consensus_threshold, 0.8);
  EXPECT_EQ(back.ties_trim_fraction, 0.5);
  EXPECT_THROW(merge_spec_from_json({{"method", "bogus"}}), Error);
  EXPECT_THROW(merge_spec_from_json({{"extra", 1}}), Error);
  EXPECT_THROW(merge_spec_from_json({{"q", 0.3}}), Error);
  EXPECT_THROW(merge_spec_from_json({{"ties_trim_fraction", 0.0}}), Error);
}

TEST(MergeSpecTest, NamesRoundTrip) {
  for (auto m : {MergeMethod::kNegMerge, MergeMethod::kConflict,
                 MergeMethod::kUniform, MergeMethod::kTies,
                 MergeMethod::kMagMax}) {
    EXPECT_EQ(parse_merge_method(to_string(m)), m);
  }
  for (auto r : {ReduceOp::kAvg, ReduceOp::kMinMag, ReduceOp::kMaxMag,
                 ReduceOp::kMin, ReduceOp::kMax}) {
    EXPECT_EQ(parse_reduce_op(to_string(r)), r);
  }
}

}  // namespace
}  // namespace negmerge
