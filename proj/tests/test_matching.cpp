#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "proxyevent/matching.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace proxyevent;
using namespace proxyevent::matching;
using diffcore::Tensor;

namespace {

GoldEventSet gold_set(std::vector<std::size_t> types, std::vector<std::vector<std::size_t>> roles, std::size_t entities) {
  GoldEventSet g;
  g.types = std::move(types);
  g.roles = std::move(roles);
  g.padded.assign(g.types.size(), false);
  g.num_entities = entities;
  return g;
}

decoder::ProxyPredictions uniform_pred(std::size_t n, std::size_t types, std::size_t entities, std::size_t roles) {
  decoder::ProxyPredictions p;
  p.num_proxies = n;
  p.num_entities = entities;
  p.type_probs = Tensor::from({n, types}, std::vector<double>(n * types, 1.0 / static_cast<double>(types)));
  p.arg_probs = Tensor::from({n * entities, roles}, std::vector<double>(n * entities * roles, 1.0 / static_cast<double>(roles)));
  return p;
}

decoder::ProxyPredictions random_pred(std::size_t n, std::size_t types, std::size_t entities, std::size_t roles,
                                      std::mt19937_64& rng) {
  decoder::ProxyPredictions p;
  p.num_proxies = n;
  p.num_entities = entities;
  std::normal_distribution<double> g;
  std::vector<double> tl(n * types), al(n * entities * roles);
  for (auto& x : tl) x = g(rng);
  for (auto& x : al) x = g(rng);
  p.type_probs = diffcore::softmax(Tensor::from({n, types}, tl));
  p.arg_probs = diffcore::softmax(Tensor::from({n * entities, roles}, al));
  return p;
}

}  // namespace

TEST(PairDistance, CertainCorrectPredictionIsZero) {
  decoder::ProxyPredictions p;
  p.num_proxies = 1;
  p.num_entities = 2;
  p.type_probs = Tensor::row({0, 1, 0});
  p.arg_probs = Tensor::from({2, 3}, {0, 0, 1, 1, 0, 0});
  const auto gold = gold_set({1}, {{2, 0}}, 2);
  EXPECT_NEAR(pair_distance(p, 0, gold, 0).item(), 0.0, 1e-12);
}

TEST(PairDistance, UniformClosedForm) {
  const auto p = uniform_pred(1, 4, 2, 3);
  const auto gold = gold_set({2}, {{1, 2}}, 2);
  EXPECT_NEAR(pair_distance(p, 0, gold, 0).item(), std::log(4.0) + std::log(3.0), 1e-12);
  const auto null_gold = pad_gold(gold_set({}, {}, 2), 1);
  EXPECT_NEAR(pair_distance(p, 0, null_gold, 0).item(), std::log(4.0) + std::log(3.0), 1e-12);
}

TEST(PairDistance, NoEntitiesIsTypeTermOnly) {
  auto p = uniform_pred(1, 4, 0, 3);
  const auto gold = gold_set({1}, {{}}, 0);
  EXPECT_NEAR(pair_distance(p, 0, gold, 0).item(), std::log(4.0), 1e-12);
}

TEST(CostMatrix, MatchesTapedPairDistance) {
  std::mt19937_64 rng(12);
  const auto p = random_pred(3, 4, 2, 5, rng);
  const auto gold = pad_gold(gold_set({1, 3}, {{2, 0}, {4, 1}}, 2), 3);
  const auto c = cost_matrix(p, gold);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(c(i, j), pair_distance(p, i, gold, j).item(), 1e-12);
}

TEST(AvgHausdorff, HandValues) {
  EXPECT_EQ(avg_hausdorff(CostMatrix(3, 3, 0.0)), 0.0);
  EXPECT_EQ(avg_hausdorff(CostMatrix(2, 2, {0, 5, 5, 0})), 0.0);
  EXPECT_DOUBLE_EQ(avg_hausdorff(CostMatrix(2, 2, {1, 2, 3, 4})), 3.5);
  EXPECT_THROW(avg_hausdorff(CostMatrix()), DimensionError);
}

TEST(PadGold, Counts) {
  auto two = gold_set({1, 2}, {{0}, {1}}, 1);
  const auto padded = pad_gold(two, 4);
  EXPECT_EQ(padded.size(), 4u);
  EXPECT_EQ(padded.num_real(), 2u);
  EXPECT_EQ(padded.types[3], kNullIndex);
  EXPECT_EQ(pad_gold(gold_set({}, {}, 0), 3).size(), 3u);
  EXPECT_THROW(pad_gold(gold_set({1, 1, 1, 1, 1}, {{}, {}, {}, {}, {}}, 0), 4), ConfigError);
}

TEST(SolveAssignment, HandCases) {
  const auto a = solve_assignment(CostMatrix(2, 2, {0, 5, 5, 0}));
  EXPECT_EQ(a.column, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(a.cost, 0.0);
  const auto b = solve_assignment(CostMatrix(2, 2, {1, 2, 2, 1}));
  EXPECT_EQ(b.column, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(b.cost, 2.0);
}

TEST(SolveAssignment, TiesResolveLexicographically) {
  const auto a = solve_assignment(CostMatrix(3, 3, 1.0));
  EXPECT_EQ(a.column, (std::vector<std::size_t>{0, 1, 2}));
  const auto b = solve_assignment(CostMatrix(2, 2, {1, 1, 1, 1}));
  EXPECT_EQ(b.column, (std::vector<std::size_t>{0, 1}));
}

TEST(SolveAssignment, Errors) {
  EXPECT_THROW(solve_assignment(CostMatrix(2, 3)), DimensionError);
  EXPECT_THROW(solve_assignment(CostMatrix(2, 2, {0, -1, 0, 0})), ValidationError);
  EXPECT_THROW(solve_assignment(CostMatrix(1, 1, {std::nan("")})), ValidationError);
}

TEST(SolveAssignment, MatchesBruteForceOnRandomSixBySix) {
  std::mt19937_64 rng(77);
  for (std::size_t k = 0; k < 1000; ++k) {
    const auto c = testsupport::random_cost(6, rng, k);
    const auto a = solve_assignment(c);
    ASSERT_LT(std::abs(a.cost - testsupport::brute_force_min(c)), 1e-9) << "matrix " << k;
  }
}

TEST(SolveAssignment, IsAPermutation) {
  std::mt19937_64 rng(78);
  for (std::size_t k = 0; k < 100; ++k) {
    const auto a = solve_assignment(testsupport::random_cost(5, rng, k));
    std::vector<bool> seen(5, false);
    for (auto col : a.column) {
      ASSERT_LT(col, 5u);
      EXPECT_FALSE(seen[col]);
      seen[col] = true;
    }
  }
}

TEST(HausdorffRelations, AssignmentBoundsAndInvariance) {
  std::mt19937_64 rng(79);
  for (std::size_t k = 0; k < 300; ++k) {
    const std::size_t n = 2 + k % 5;
    const auto c = testsupport::random_cost(n, rng, k);
    const double assigned = solve_assignment(c).cost;
    const double lower = std::max(testsupport::sum_row_mins(c), testsupport::sum_col_mins(c));
    EXPECT_GE(assigned + 1e-12, lower);
    EXPECT_GE(lower + 1e-12, 0.5 * static_cast<double>(n) * avg_hausdorff(c));
    std::vector<std::size_t> rp(n), cp(n);
    std::iota(rp.begin(), rp.end(), std::size_t{0});
    std::iota(cp.begin(), cp.end(), std::size_t{0});
    std::shuffle(rp.begin(), rp.end(), rng);
    std::shuffle(cp.begin(), cp.end(), rng);
    EXPECT_NEAR(solve_assignment(testsupport::permuted(c, rp, cp)).cost, assigned, 1e-9);
  }
}

TEST(ConstrainedHausdorff, OneHotPermutationIsZero) {
  decoder::ProxyPredictions p;
  p.num_proxies = 3;
  p.num_entities = 1;
  p.type_probs = Tensor::from({3, 3}, {0, 0, 1, 1, 0, 0, 0, 1, 0});
  // Rows k*n + i: entity 0 under proxies 0..2.
  p.arg_probs = Tensor::from({3, 2}, {0, 1, 1, 0, 1, 0});
  const auto gold = pad_gold(gold_set({1, 2}, {{0}, {1}}, 1), 3);
  const auto r = constrained_hausdorff(p, gold);
  EXPECT_NEAR(r.loss.item(), 0.0, 1e-12);
  EXPECT_EQ(r.assignment.column, (std::vector<std::size_t>{1, 2, 0}));
}

TEST(ConstrainedHausdorff, SingleProxyEqualsPairDistance) {
  std::mt19937_64 rng(80);
  const auto p = random_pred(1, 3, 2, 4, rng);
  const auto gold = gold_set({2}, {{1, 3}}, 2);
  EXPECT_NEAR(constrained_hausdorff(p, gold).loss.item(), pair_distance(p, 0, gold, 0).item(), 1e-12);
}

TEST(ConstrainedHausdorff, ThreeByThreeEqualsBruteForce) {
  std::mt19937_64 rng(81);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_pred(3, 3, 2, 3, rng);
    const auto gold = pad_gold(gold_set({1, 2}, {{1, 2}, {0, 1}}, 2), 3);
    const auto r = constrained_hausdorff(p, gold);
    EXPECT_NEAR(r.loss.item(), testsupport::brute_force_min(cost_matrix(p, gold)), 1e-9);
  }
}

TEST(ConstrainedHausdorff, SizeMismatchThrows) {
  const auto p = uniform_pred(2, 3, 1, 2);
  EXPECT_THROW(constrained_hausdorff(p, gold_set({1}, {{1}}, 1)), DimensionError);
}

TEST(ConstrainedHausdorff, GradientWithFixedAssignment) {
  std::mt19937_64 rng(82);
  std::normal_distribution<double> g;
  std::vector<double> tl(3 * 4), al(3 * 2 * 3);
  for (auto& x : tl) x = g(rng);
  for (auto& x : al) x = g(rng);
  Tensor tlog = Tensor::from({3, 4}, tl, true), alog = Tensor::from({6, 3}, al, true);
  const auto gold = pad_gold(gold_set({1, 3}, {{1, 0}, {2, 1}}, 2), 3);
  auto build = [&] {
    decoder::ProxyPredictions p;
    p.num_proxies = 3;
    p.num_entities = 2;
    p.type_probs = diffcore::softmax(tlog);
    p.arg_probs = diffcore::softmax(alog);
    return p;
  };
  Assignment fixed;
  {
    diffcore::NoGradScope off;
    fixed = constrained_hausdorff(build(), gold).assignment;
  }
  const auto r = testsupport::grad_check({tlog, alog}, [&] { return constrained_hausdorff(build(), gold, fixed).loss; });
  EXPECT_EQ(r.failures, 0u) << r.worst;
}

TEST(TotalLoss, Sums) {
  EXPECT_EQ(total_loss(Tensor::scalar(0), Tensor::scalar(0)).item(), 0.0);
  EXPECT_NEAR(total_loss(Tensor::scalar(2.485), Tensor::scalar(1.099)).item(), 3.584, 1e-12);
}
