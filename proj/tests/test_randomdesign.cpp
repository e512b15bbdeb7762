#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "dsparse/randomdesign.hpp"

using namespace dsparse;
using namespace dsparse::randomdesign;

namespace {

DesignEnsemble ensemble(EnsembleKind kind, Index n, GroupLayout layout, std::uint64_t seed = 1) {
  DesignEnsemble e;
  e.kind = kind;
  e.n = n;
  e.layout = layout;
  e.seed = seed;
  return e;
}

// Gaussian design rescaled so that the sparse group normalization constant is exactly 1.
Matrix normalized_design(Index n, const GroupLayout& layout, Index s0, std::uint64_t seed) {
  Matrix X = generate(ensemble(EnsembleKind::Gaussian, n, layout, seed));
  return X / conditions::check_sgnorm(X, layout, s0).value;
}

Vector random_beta(const GroupLayout& layout, const SparsityBudget& budget, Rng& rng) {
  const IndexSet set = sample_family({Family::S2, budget}, layout, rng);
  Vector beta = Vector::Zero(layout.p());
  const Vector z = standard_normal(static_cast<Index>(set.elements.size()), rng);
  for (std::size_t k = 0; k < set.elements.size(); ++k) beta[set.elements[k]] = z[static_cast<Index>(k)];
  return beta;
}

}  // namespace

TEST(Generate, DeterministicAndRademacherSigns) {
  const GroupLayout layout(3, 4);
  for (EnsembleKind k : {EnsembleKind::Gaussian, EnsembleKind::Rademacher, EnsembleKind::WeakMoment}) {
    const DesignEnsemble e = ensemble(k, 50, layout, 9);
    EXPECT_EQ(generate(e), generate(e));
    DesignEnsemble other = e;
    other.seed = 10;
    EXPECT_NE(generate(e), generate(other));
    EXPECT_EQ(generate(e).bottomRows(20), sample_rows(e, 30, 20));
  }
  const Matrix R = generate(ensemble(EnsembleKind::Rademacher, 200, layout));
  EXPECT_TRUE((R.array().abs() == 1.0).all());
  EXPECT_EQ(ensemble_from_string("weak-moment"), EnsembleKind::WeakMoment);
  EXPECT_THROW(ensemble_from_string("cauchy"), Error);
}

TEST(Generate, SampleCovarianceApproachesSigma) {
  const GroupLayout layout(2, 5);
  const Index n = 10'000;
  const Matrix X = generate(ensemble(EnsembleKind::Gaussian, n, layout, 3));
  const Matrix cov = X.transpose() * X / static_cast<double>(n);
  const double deviation = Eigen::SelfAdjointEigenSolver<Matrix>(cov - Matrix::Identity(10, 10)).eigenvalues().cwiseAbs().maxCoeff();
  EXPECT_LE(deviation, 3.0 * std::sqrt(10.0 / n));

  DesignEnsemble e = ensemble(EnsembleKind::SubGaussianWithCovariance, n, layout, 4);
  Matrix F = Matrix::Identity(10, 10);
  F(0, 1) = F(1, 0) = 0.4;
  e.factor = F;
  const Matrix Y = generate(e);
  const Matrix target = F.transpose() * F;
  const double dev2 = Eigen::SelfAdjointEigenSolver<Matrix>(Y.transpose() * Y / double(n) - target).eigenvalues().cwiseAbs().maxCoeff();
  EXPECT_LE(dev2, 3.0 * std::sqrt(10.0 / n) * target.norm());

  e.factor = Matrix::Identity(3, 3);
  EXPECT_THROW(generate(e), Error);
  e.factor.resize(0, 0);
  e.alpha = 0.3;
  EXPECT_THROW(generate(e), Error);
}

TEST(WeakMoment, UnitVarianceAndMomentGrowth) {
  EXPECT_NEAR(weak_moment_lq(0.5, 2.0), 1.0, 1e-14);
  EXPECT_NEAR(weak_moment_lq(1.0, 2.0), 1.0, 1e-14);
  // alpha = 1: |W| = E / sqrt(2), so ||W||_4 = (24 / 4)^{1/4}.
  EXPECT_NEAR(weak_moment_lq(1.0, 4.0), std::pow(6.0, 0.25), 1e-13);
  const GroupLayout layout(1, 1);
  for (double alpha : {0.5, 1.0}) {
    const double kappa = weak_moment_kappa(alpha, q0(6, 4, 2));
    DesignEnsemble e = ensemble(EnsembleKind::WeakMoment, 200'000, layout, 5);
    e.alpha = alpha;
    const Vector w = generate(e).col(0);
    EXPECT_NEAR(w.squaredNorm() / 200'000.0, 1.0, 0.02 * alpha * 4);
    for (double q : {2.0, 4.0, 8.0}) {
      const Vector pw = w.array().abs().pow(q);
      const double mean = pw.mean();
      const double se = std::sqrt((pw.array() - mean).square().sum() / (pw.size() - 1.0) / pw.size());
      EXPECT_LE(mean, std::pow(kappa * std::pow(q, alpha), q) + 3 * se) << alpha << " " << q;
      EXPECT_NEAR(mean, std::pow(weak_moment_lq(alpha, q), q), 4 * se) << alpha << " " << q;
    }
  }
}

TEST(Complexity, ClosedForms) {
  const ComplexityBounds b = complexity_bounds(8, 8, 2, 2, 0.25);
  EXPECT_DOUBLE_EQ(b.covering, 22400.0);
  EXPECT_NEAR(b.vc, 2 * 14.317, 2e-3);
  EXPECT_NEAR(b.vc, 2 * (2 * std::log(4 * std::numbers::e) + 4 * std::log(4 * std::numbers::e)), 1e-12);
  EXPECT_NEAR(b.gaussian, 6 * std::sqrt(std::log(8.0) + 2 * std::log(20 * std::numbers::e)), 1e-12);
  EXPECT_LT(b.gaussian_ed, b.gaussian);
  EXPECT_NEAR(complexity_bounds(5, 3, 1, 3, 0.1).covering, 5 * std::pow(25.0, 3), 1e-8);
  for (double eps : {0.0, 0.5, -1.0, 0.7}) {
    try {
      complexity_bounds(8, 8, 2, 2, eps);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::EpsRange);
    }
  }
  EXPECT_NEAR(rate_quantity(6, 4, 2, 2), 2 * std::log(12 * std::numbers::e) + 4 * std::log(4 * std::numbers::e), 1e-12);
  EXPECT_NEAR(q0(8, 8, 2), 2 * (std::log(8.0) + 2 * std::log(4 * std::numbers::e)), 1e-12);
}

TEST(Complexity, GaussianMonteCarlo) {
  const MonteCarloEstimate one = gaussian_complexity_mc(SupportFamily::single(5, 2), Matrix(), 20'000, 1);
  EXPECT_NEAR(one.mean, std::sqrt(2.0 / std::numbers::pi), 3 * one.standard_error);

  const GroupLayout layout(6, 4);
  const SupportFamily family = SupportFamily::within_groups(layout, 2);
  EXPECT_EQ(family.supports.size(), 36u);
  const MonteCarloEstimate est = gaussian_complexity_mc(family, Matrix(), 5000, 2);
  EXPECT_LE(est.mean, 6 * std::sqrt(std::log(6.0) + 2 * std::log(10 * std::numbers::e)));
  const MonteCarloEstimate twice = gaussian_complexity_mc(family, 2.0 * Matrix::Identity(24, 24), 5000, 2);
  EXPECT_NEAR(twice.mean, 2 * est.mean, 1e-12);
  EXPECT_THROW(SupportFamily::within_groups(layout, 2, 10), Error);
}

TEST(SmallBall, GaussianTailAndTrivialCases) {
  const GroupLayout layout(6, 4);
  const SparsityBudget budget(2, 2, layout);
  const DesignEnsemble e = ensemble(EnsembleKind::Gaussian, 0, layout, 7);
  const std::uint64_t rows = 20'000;
  const SmallBallReport r = small_ball_probe(e, budget, 0.5, rows, 50, 3);
  const double exact = std::erfc(0.5 / std::numbers::sqrt2);
  const double se = std::sqrt(exact * (1 - exact) / static_cast<double>(rows));
  EXPECT_NEAR(exact, 0.617, 1e-3);
  EXPECT_NEAR(r.mean, exact, 3 * se);
  EXPECT_GE(r.tau, exact - 5 * se);
  EXPECT_NEAR(r.direction.norm(), 1.0, 1e-12);

  EXPECT_EQ(small_ball_probe(e, budget, 0.0, 500, 10).tau, 1.0);
  DesignEnsemble zero = e;
  zero.factor = Matrix::Zero(24, 24);
  EXPECT_EQ(small_ball_probe(zero, budget, 0.1, 500, 10).tau, 0.0);
}

TEST(Maurey, RandomBetasSatisfyTheBound) {
  const GroupLayout layout(6, 4);
  const SparsityBudget budget(2, 2, layout);
  const Matrix X = normalized_design(200, layout, 2, 11);
  Rng rng = make_stream(12, 0);
  for (int k = 0; k < 20; ++k) {
    const Vector beta = random_beta(layout, budget, rng);
    const MaureyReport r = maurey_check(X, beta, budget, layout, 10'000, 1.0, 100 + k);
    EXPECT_TRUE(r.passes()) << k;
    EXPECT_TRUE(r.matches_closed_form()) << k;
    EXPECT_TRUE(r.all_in_ds);
    ASSERT_TRUE(r.theta.has_value());
    ASSERT_TRUE(r.implied_lower_bound.has_value());
    EXPECT_TRUE(*r.implied_lower_bound);
    EXPECT_NEAR(*r.theta_tilde, *r.theta / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(*r.s_tilde, *r.theta * *r.theta / 18.0, 1e-15);
    EXPECT_LE(r.theta_max, 1.0 + 1e-12);
  }
}

TEST(Maurey, SingleGroupIsDegenerate) {
  const GroupLayout layout(4, 3);
  const SparsityBudget budget(2, 2, layout);
  const Matrix X = normalized_design(80, layout, 2, 2);
  Vector beta = Vector::Zero(12);
  beta[3] = 1.0;
  beta[5] = -2.0;
  const MaureyReport r = maurey_check(X, beta, budget, layout, 5000, 1.0, 1);
  EXPECT_DOUBLE_EQ(r.W, r.w[1]);
  EXPECT_DOUBLE_EQ(r.W, std::sqrt(2.0 * 5.0) + 3.0);
  EXPECT_TRUE(r.passes());
  EXPECT_TRUE(r.matches_closed_form());
  // One group, so H lives there and ||X H||_n <= ||H|| bounds the second moment.
  EXPECT_LE(r.lhs_exact, r.rhs);
}

TEST(Maurey, Errors) {
  const GroupLayout layout(4, 3);
  const SparsityBudget budget(2, 2, layout);
  const Matrix X = normalized_design(80, layout, 2, 2);
  Vector beta = Vector::Zero(12);
  beta[0] = 1;
  try {
    maurey_check(2.0 * X, beta, budget, layout);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConditionViolated);
  }
  EXPECT_THROW(maurey_check(X, Vector::Zero(12), budget, layout), Error);
  EXPECT_THROW(maurey_check(X, Vector::Zero(5), budget, layout), Error);
}

TEST(PhaseDiagram, MonotoneAndReaches90) {
  const GroupLayout layout(6, 4);
  PhaseOptions o;
  o.s = 2;
  o.s0 = 2;
  o.reps = 30;
  o.seed = 4;
  const std::vector<Index> grid = {4, 16, 66, 165};
  for (conditions::Condition c : {conditions::Condition::SGNorm, conditions::Condition::DSRE}) {
    o.condition = c;
    const PhaseDiagram pd = phase_diagram(ensemble(EnsembleKind::Gaussian, 0, layout), grid, o);
    ASSERT_EQ(pd.points.size(), 4u);
    EXPECT_TRUE(pd.monotone);
    ASSERT_TRUE(pd.first_n_at_90.has_value());
    EXPECT_LE(static_cast<double>(*pd.first_n_at_90), 10 * pd.rate_quantity);
    for (const PhasePoint& p : pd.points) {
      EXPECT_GE(p.success.rate, 0.0);
      EXPECT_LE(p.success.rate, 1.0);
    }
  }
  o.condition = conditions::Condition::DSRE;
  const PhaseDiagram tiny = phase_diagram(ensemble(EnsembleKind::Gaussian, 0, layout), {1}, o);
  EXPECT_EQ(tiny.points[0].success.rate, 0.0);
  o.jobs = 3;
  EXPECT_EQ(phase_diagram(ensemble(EnsembleKind::Gaussian, 0, layout), {1}, o).to_json(), tiny.to_json());
}

TEST(PhaseDiagram, SgnormConstantStableAcrossTriples) {
  struct Triple {
    Index m, d, s0;
  };
  std::vector<Index> grid;
  for (double n = 4; n < 600; n *= 1.15) {
    if (grid.empty() || grid.back() != static_cast<Index>(n)) grid.push_back(static_cast<Index>(n));
  }
  std::vector<double> fitted;
  for (const Triple t : {Triple{6, 4, 2}, Triple{8, 6, 2}, Triple{10, 5, 3}}) {
    PhaseOptions o;
    o.s0 = t.s0;
    o.reps = 60;
    o.seed = 8;
    const PhaseDiagram pd = phase_diagram(ensemble(EnsembleKind::Gaussian, 0, GroupLayout(t.m, t.d)), grid, o);
    EXPECT_TRUE(pd.monotone);
    ASSERT_TRUE(pd.fitted_constant.has_value());
    fitted.push_back(*pd.fitted_constant);
  }
  const double mid = 0.5 * (*std::max_element(fitted.begin(), fitted.end()) + *std::min_element(fitted.begin(), fitted.end()));
  for (double c : fitted) EXPECT_NEAR(c, mid, 0.5 * mid);
}
