#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "dsparse/conditions.hpp"
#include "dsparse/lowerbound.hpp"

using namespace dsparse;
using namespace dsparse::lowerbound;

namespace {

void expect_exact_supports(const PackingSet& p) {
  const GroupLayout& layout = p.layout;
  for (const Vector& v : p.vectors) {
    ASSERT_TRUE((v.array().abs() == 1.0 || v.array() == 0.0).all());
    Index groups = 0;
    for (Index g = 0; g < layout.m(); ++g) {
      const Index nnz = (v.segment(g * layout.d(), layout.d()).array() != 0.0).count();
      if (nnz == 0) continue;
      ++groups;
      ASSERT_EQ(nnz, p.budget.s0());
    }
    ASSERT_EQ(groups, p.budget.s());
  }
}

Index brute_min_hamming(const std::vector<Vector>& vs) {
  Index best = std::numeric_limits<Index>::max();
  for (std::size_t i = 0; i < vs.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      Index h = 0;
      for (Index k = 0; k < vs[i].size(); ++k) h += vs[i][k] != vs[j][k];
      best = std::min(best, h);
    }
  }
  return best;
}

Matrix correlated_design(Index n, const GroupLayout& layout, double rho, std::uint64_t seed) {
  Rng rng = make_stream(seed, 9);
  const Vector common = standard_normal(n, rng);
  Matrix X(n, layout.p());
  for (Index j = 0; j < layout.p(); ++j) X.col(j) = rho * common + std::sqrt(1 - rho * rho) * standard_normal(n, rng);
  return X;
}

}  // namespace

TEST(Packing, TargetAndRadius) {
  GroupLayout layout(8, 8);
  SparsityBudget b(2, 2, layout);
  const double e = std::exp(1.0);
  EXPECT_NEAR(std::log(packing_target(layout, b)), 0.25 * (2 * std::log(4 * e) + 4 * std::log(4 * e)), 1e-12);
  EXPECT_EQ(std::ceil(packing_target(layout, b)), 36.0);
  EXPECT_EQ(packing_radius(b), 1);
  EXPECT_EQ(packing_radius(SparsityBudget(3, 3, GroupLayout(4, 4))), 3);
  EXPECT_EQ(packing_radius(SparsityBudget(2, 4, GroupLayout(4, 4))), 2);
}

TEST(Packing, MeetsTargetAtDeskScale) {
  PackingOptions opt;
  opt.seed = 3;
  const PackingSet p = build_packing(8, 8, 2, 2, opt);
  EXPECT_EQ(p.method, "exhaustive");
  EXPECT_GE(p.vectors.size(), 36u);
  EXPECT_TRUE(p.meets_target());
  expect_exact_supports(p);
  EXPECT_GE(p.min_hamming, p.radius);
}

TEST(Packing, LargerRadiusAndRandomMode) {
  struct Case {
    Index m, d, s, s0;
  };
  for (const Case c : {Case{6, 4, 3, 2}, Case{5, 5, 2, 3}, Case{12, 10, 4, 3}, Case{4, 4, 2, 2}}) {
    PackingOptions opt;
    opt.seed = 7;
    opt.max_size = 400;
    opt.max_candidates = 20'000;
    const PackingSet p = build_packing(c.m, c.d, c.s, c.s0, opt);
    expect_exact_supports(p);
    ASSERT_GE(p.vectors.size(), 2u);
    EXPECT_EQ(p.min_hamming, brute_min_hamming(p.vectors));
    EXPECT_GE(p.min_hamming, p.radius);
    if (c.m == 12) EXPECT_EQ(p.method, "random");
    EXPECT_TRUE(p.meets_target() || p.vectors.size() == opt.max_size) << c.m << " " << p.vectors.size();
  }
}

TEST(Packing, FullSupportAndErrors) {
  const PackingSet p = build_packing(3, 2, 3, 2);
  ASSERT_EQ(p.vectors.size(), 1u);
  EXPECT_EQ(p.vectors[0], Vector::Ones(6));
  EXPECT_EQ(p.min_hamming, 0);
  EXPECT_THROW(build_packing(3, 2, 4, 1), Error);
  EXPECT_THROW(build_packing(3, 2, 1, 3), Error);
}

TEST(Packing, DeterministicUnderSeedAndJobs) {
  PackingOptions opt;
  opt.seed = 5;
  opt.max_candidates = 5000;
  opt.max_size = 300;
  const PackingSet a = build_packing(12, 10, 3, 3, opt);
  opt.jobs = 4;
  const PackingSet b = build_packing(12, 10, 3, 3, opt);
  EXPECT_EQ(a.to_json(), b.to_json());
  opt.seed = 6;
  EXPECT_NE(build_packing(12, 10, 3, 3, opt).to_json(), a.to_json());
}

TEST(Signing, DesignBoundOnCorrelatedDesigns) {
  GroupLayout layout(8, 8);
  const PackingSet p = build_packing(8, 8, 2, 2, {.seed = 1, .max_size = 500});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix X = correlated_design(60, layout, 0.3 + 0.1 * static_cast<double>(seed), seed);
    const PackingSet q = sign_packing(p, X);
    const double theta = conditions::check_sgnorm(X, layout, 2).value;
    EXPECT_DOUBLE_EQ(q.theta_max, theta);
    expect_exact_supports(q);
    for (std::size_t k = 0; k < q.vectors.size(); ++k) {
      const double norm2 = (X * q.vectors[k]).squaredNorm() / 60.0;
      ASSERT_LE(norm2, theta * theta * 4 * (1 + 1e-12));
      ASSERT_EQ(q.vectors[k].cwiseAbs(), p.vectors[k]);
    }
    EXPECT_TRUE(q.design_bound_holds());
    EXPECT_GE(q.min_hamming, p.min_hamming);
  }
}

TEST(Signing, OrthonormalDesignAnySign) {
  GroupLayout layout(4, 4);
  Rng rng = make_stream(2, 0);
  Matrix G(50, 16);
  for (Index j = 0; j < 16; ++j) G.col(j) = standard_normal(50, rng);
  const Matrix X = std::sqrt(50.0) * Matrix(Eigen::HouseholderQR<Matrix>(G).householderQ() * Matrix::Identity(50, 16));
  const PackingSet q = sign_packing(build_packing(4, 4, 2, 2), X);
  EXPECT_NEAR(q.theta_max, 1.0, 1e-12);
  for (const Vector& v : q.vectors) EXPECT_NEAR((X * v).squaredNorm() / 50.0, 4.0, 1e-10);
}

TEST(Packing, JsonRoundTrip) {
  GroupLayout layout(5, 3);
  const PackingSet p = sign_packing(build_packing(5, 3, 2, 2), correlated_design(30, layout, 0.5, 4));
  const nlohmann::json j = p.to_json();
  EXPECT_EQ(j["vectors"][0].size(), 4u);
  const PackingSet back = PackingSet::from_json(j);
  EXPECT_EQ(back.to_json(), j);
  nlohmann::json broken = j;
  broken["vectors"][0][0][0] = 9;
  EXPECT_THROW(PackingSet::from_json(broken), Error);
  broken.erase("layout");
  EXPECT_THROW(PackingSet::from_json(broken), Error);
}

TEST(LowerBound, Values) {
  EXPECT_NEAR(lower_bound_value(100, 1.0, 1.0, 8, 8, 2, 2), 14.317 / 25600, 1e-7);
  EXPECT_NEAR(lower_bound_value(100, 1.0, 1.0, 8, 8, 2, 2), 5.593e-4, 5e-7);
  EXPECT_DOUBLE_EQ(lower_bound_value(200, 2.0, 1.5, 8, 6, 3, 2), 0.5 * lower_bound_value(100, 2.0, 1.5, 8, 6, 3, 2));
  EXPECT_EQ(lower_bound_value(100, 0.0, 1.0, 8, 8, 2, 2), 0.0);
}

TEST(GapReport, RatiosSlopeAndSkips) {
  std::vector<GapInput> in;
  for (Index n : {100, 200, 400, 800}) {
    GapInput g{n, 0.5, 1.0, 8, 8, 2, 2, 0.0};
    g.squared_error = 3.0 * lower_bound_value(n, 0.5, 1.0, 8, 8, 2, 2);
    in.push_back(g);
  }
  in.push_back({100, 0.0, 1.0, 8, 8, 2, 2, 0.1});
  const GapReport r = gap_report(in);
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(r.notices.size(), 1u);
  EXPECT_NEAR(r.min_ratio, 3.0, 1e-12);
  ASSERT_TRUE(r.slope.has_value());
  EXPECT_NEAR(*r.slope, 0.0, 1e-12);
  EXPECT_TRUE(r.ratios_at_least_one());
  in[0].squared_error *= 0.1;
  EXPECT_FALSE(gap_report(in).ratios_at_least_one());
  EXPECT_FALSE(gap_report({in.back()}).ratios_at_least_one());
}
