#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "brute_force.hpp"
#include "dsparse/penalty.hpp"

using namespace dsparse;
using namespace dsparse::penalty;

namespace {

constexpr double kTight = 1e-12;

Vector vec(std::initializer_list<double> values) {
  Vector out(static_cast<Index>(values.size()));
  Index i = 0;
  for (double v : values) out[i++] = v;
  return out;
}

// Random vector mixing dense, sparse and tied entries.
Vector random_mixture(const GroupLayout& layout, Rng& rng) {
  std::uniform_int_distribution<int> kind(0, 3);
  Vector u = standard_normal(layout.p(), rng);
  switch (kind(rng)) {
    case 0:
      break;
    case 1: {
      std::bernoulli_distribution keep(0.2);
      for (Index i = 0; i < u.size(); ++i) {
        if (!keep(rng)) u[i] = 0.0;
      }
      break;
    }
    case 2:
      u = u.array().round();
      break;
    default:
      u = u.array().cube();
  }
  return u;
}

}  // namespace

TEST(Norms, HandExamples) {
  GroupLayout layout(2, 2);
  const Vector u = vec({3, 4, 0, 0});
  EXPECT_DOUBLE_EQ(norm_l1(u), 7.0);
  EXPECT_DOUBLE_EQ(norm_l12(u, layout), 5.0);
  EXPECT_DOUBLE_EQ(norm_sorted_l1(vec({1, 3}), vec({2, 1})), 7.0);
  const Vector g = vec({1, 2, 3, 0});
  EXPECT_NEAR(norm_group_sorted(g, vec({2, 1}), layout), 6.0 + std::sqrt(5.0), kTight);
}

TEST(Norms, IncreasingWeightsRejected) {
  try {
    norm_sorted_l1(vec({1, 2, 3}), vec({1, 2, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WeightOrder);
  }
  EXPECT_THROW(norm_group_sorted(vec({1, 2}), vec({0.5, 1.0}), GroupLayout(2, 1)), Error);
}

TEST(Norms, AgreeWithReferenceImplementation) {
  GroupLayout layout(6, 3);
  const WeightSequences w = make_weights(layout, 2, 1.3);
  for (int trial = 0; trial < 10000; ++trial) {
    Rng rng = make_stream(21, static_cast<std::uint64_t>(trial));
    const Vector u = random_mixture(layout, rng);
    ASSERT_NEAR(norm_sorted_l1(u, w.element()), oracle::sorted_l1(u, w.element()), kTight);
    ASSERT_NEAR(norm_group_sorted(u, w.group(), layout), oracle::group_sorted(u, w.group(), 3), kTight);
    ASSERT_NEAR(norm_l12(u, layout), oracle::l12(u, 3), kTight);
  }
}

TEST(Norms, DualNormsAttainOnSubgradients) {
  GroupLayout layout(4, 3);
  const WeightSequences w = make_weights(layout, 2, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Rng rng = make_stream(22, static_cast<std::uint64_t>(trial));
    const Vector u = standard_normal(layout.p(), rng);
    const Vector g = oracle::sorted_l1_subgradient(u, w.element());
    EXPECT_NEAR(dual_norm_sorted_l1(g, w.element()), 1.0, 1e-12);
    EXPECT_NEAR(g.dot(u), norm_sorted_l1(u, w.element()), 1e-10);
    const Vector h = oracle::group_sorted_subgradient(u, w.group(), 3);
    EXPECT_NEAR(dual_norm_group_sorted(h, w.group(), layout), 1.0, 1e-12);
  }
}

TEST(Weights, WorkedExample) {
  GroupLayout layout(4, 2);
  const WeightSequences w = make_weights(layout, 2, 1.0);
  // lambda_4 = sqrt(log(2e) + log(4e)) = sqrt(2 + 3 log 2)
  EXPECT_NEAR(w.group()[3], std::sqrt(2.0 + 3.0 * std::log(2.0)), kTight);
  EXPECT_NEAR(w.group()[3], 2.0198, 5e-5);
  for (Index j = 0; j < 4; ++j) {
    const double expected = std::sqrt(std::log(2.0 * std::numbers::e) +
                                      std::log(4.0 * std::numbers::e * 4.0 / static_cast<double>(j + 1)));
    EXPECT_NEAR(w.group()[j], expected, kTight);
  }
  // Extension: two copies of each group weight.
  for (Index i = 0; i < 8; ++i) EXPECT_EQ(w.element()[i], w.group()[i / 2]);
}

TEST(Weights, ExtensionPadsWithLastWeight) {
  GroupLayout layout(3, 4);
  const WeightSequences w = make_weights(layout, 2, 1.0);
  ASSERT_EQ(w.element().size(), 12);
  for (Index i = 6; i < 12; ++i) EXPECT_EQ(w.element()[i], w.group()[2]);
  EXPECT_TRUE(std::is_sorted(w.element().begin(), w.element().end(), std::greater<double>()));
}

TEST(Weights, SquaredSumIdentityForEveryS) {
  for (auto [m, d, s0] : std::vector<std::tuple<int, int, int>>{{4, 2, 2}, {10, 5, 3}, {20, 5, 2}, {7, 3, 1}}) {
    GroupLayout layout(m, d);
    const WeightSequences w = make_weights(layout, s0, 0.7);
    for (int s = 1; s <= m; ++s) {
      const double lhs = std::sqrt(w.element().head(s * s0).squaredNorm());
      const double rhs = std::sqrt(static_cast<double>(s0)) * std::sqrt(w.group().head(s).squaredNorm());
      EXPECT_NEAR(lhs, rhs, kTight);
    }
  }
}

TEST(Weights, ZeroSigmaGivesZeroWeights) {
  const WeightSequences w = make_weights(GroupLayout(3, 2), 1, 0.0);
  EXPECT_EQ(w.group().norm(), 0.0);
  EXPECT_EQ(norm_combined_star(Vector::Ones(6), w, GroupLayout(3, 2)), 0.0);
}

TEST(Weights, JsonRoundTrip) {
  GroupLayout layout(5, 3);
  const WeightSequences w = make_weights(layout, 2, 0.4);
  const WeightSequences back = WeightSequences::from_json(w.to_json(), layout);
  EXPECT_EQ(back.group(), w.group());
  EXPECT_EQ(back.element(), w.element());
  EXPECT_EQ(back.s0(), 2);
}

TEST(LambdaSharp, FormulaAndRange) {
  GroupLayout layout(20, 5);
  SparsityBudget budget(3, 2, layout);
  const double sigma = 0.8;
  const double n = 400;
  const WeightSequences w = make_weights(layout, 2, sigma);
  // Same logarithmic level as the s-th group weight.
  const double expected = (4.0 + std::numbers::sqrt2) / (0.5 * std::sqrt(n)) * w.group()[2];
  EXPECT_NEAR(lambda_sharp(0.5, sigma, n, budget, layout), expected, kTight);
  for (double gamma : {0.0, 1.0, -0.2, 1.5}) {
    try {
      lambda_sharp(gamma, sigma, n, budget, layout);
      FAIL() << gamma;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::GammaRange);
    }
  }
}

TEST(Envelope, EqualsCombinedNormOverRootN) {
  GroupLayout layout(5, 3);
  const WeightSequences w = make_weights(layout, 2, 1.0);
  Rng rng = make_stream(4, 0);
  const Vector u = standard_normal(layout.p(), rng);
  // Direct evaluation of the defining sums.
  const Vector sorted = oracle::Vec(sort_elementwise(u).values);
  Vector norms = group_norms(u, layout);
  std::sort(norms.begin(), norms.end(), std::greater<double>());
  const double direct = (std::sqrt(2.0) * norms.dot(w.group()) + sorted.dot(w.element())) / std::sqrt(50.0);
  EXPECT_NEAR(envelope_N(u, w, layout, 50.0), direct, kTight);
}

TEST(Envelope, SingletonGroupsReduceToDoubleSortedL1) {
  GroupLayout layout(7, 1);
  const WeightSequences w = make_weights(layout, 1, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    Rng rng = make_stream(5, static_cast<std::uint64_t>(trial));
    const Vector u = random_mixture(layout, rng);
    const double reduced = 2.0 * oracle::sorted_l1(u, w.group()) / std::sqrt(30.0);
    ASSERT_NEAR(envelope_N(u, w, layout, 30.0), reduced, kTight);
  }
}

TEST(Envelope, SplitBoundHoldsOnRandomVectors) {
  const std::vector<std::tuple<int, int, int, int>> configs{{8, 6, 2, 2}, {20, 5, 3, 2}, {6, 4, 1, 3}};
  for (auto [m, d, s, s0] : configs) {
    GroupLayout layout(m, d);
    const WeightSequences w = make_weights(layout, s0, 1.0);
    const double head_elem = std::sqrt(w.element().head(s * s0).squaredNorm());
    const double head_group = std::sqrt(w.group().head(s).squaredNorm());
    for (int trial = 0; trial < 10000; ++trial) {
      Rng rng = make_stream(6, static_cast<std::uint64_t>(trial));
      const Vector u = random_mixture(layout, rng);
      const Vector sorted = sort_elementwise(u).values;
      const Vector norms = sort_groups(GroupedVector(u, layout)).values;
      const double tail_elem = sorted.tail(layout.p() - s * s0).dot(w.element().tail(layout.p() - s * s0));
      const double tail_group = norms.tail(m - s).dot(w.group().tail(m - s));
      const double bound = head_elem * u.norm() + tail_elem +
                           std::sqrt(static_cast<double>(s0)) * (head_group * u.norm() + tail_group);
      ASSERT_LE(std::sqrt(10.0) * envelope_N(u, w, layout, 10.0), bound * (1 + 1e-12) + 1e-12);
    }
  }
}
