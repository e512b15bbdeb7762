#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsparse/conditions.hpp"
#include "dsparse/core.hpp"
#include "dsparse/stochastic.hpp"

namespace dsparse::randomdesign {

enum class EnsembleKind { Gaussian, Rademacher, SubGaussianWithCovariance, WeakMoment };

std::string to_string(EnsembleKind k);
EnsembleKind ensemble_from_string(const std::string& name);

/// Rows x = Sigma^{1/2} z with z i.i.d. coordinates; X = Z Sigma^{1/2}.
struct DesignEnsemble {
  EnsembleKind kind = EnsembleKind::Gaussian;
  Index n = 0;
  GroupLayout layout{1, 1};
  std::uint64_t seed = 0;
  /// WeakMoment: coordinates are symmetrised Weibull with shape 1/alpha and unit variance.
  double alpha = 0.5;
  /// WeakMoment growth constant; 0 selects weak_moment_kappa(alpha, q0).
  double kappa1 = 0.0;
  /// Sigma^{1/2}, p x p; empty means identity. Used by every kind.
  Matrix factor;

  /// Throws InvalidArgument on alpha < 1/2, kappa1 < 0 or a factor of the wrong size.
  void validate() const;
};

/// n x p design; row i comes from stream (seed, i), so rows are i.i.d. and
/// a fixed seed reproduces X bitwise.
Matrix generate(const DesignEnsemble& ensemble);

/// Rows first, ..., first + count - 1 of the same stream family.
Matrix sample_rows(const DesignEnsemble& ensemble, std::uint64_t first, Index count);

/// sqrt(n) times an n x p matrix with orthonormal columns (n >= p), so every
/// column subset has ||X_S||_op / sqrt(n) = 1 exactly.
Matrix orthonormal_design(Index n, Index p, std::uint64_t seed = 0);

/// ||W||_{L_q} of the unit-variance symmetrised Weibull coordinate.
double weak_moment_lq(double alpha, double q);
/// max over 2 <= q <= q0 of ||W||_{L_q} / q^alpha.
double weak_moment_kappa(double alpha, double q0);

/// log m + s0 log(ed/s0)
double sgnorm_quantity(Index m, Index d, Index s0);
/// s log(4em/s) + s s0 log(2ed/s0)
double rate_quantity(Index m, Index d, Index s, Index s0);
/// C1 (log m + s0 log(ed/s0)), C1 = 2 by default.
double q0(Index m, Index d, Index s0, double c1 = 2.0);

struct ComplexityBounds {
  double covering = 0.0;           ///< m C(d, s0) (5 / (2 eps))^s0
  double gaussian = 0.0;           ///< 6 sqrt(log m + s0 log(5ed/s0))
  double gaussian_ed = 0.0;        ///< 6 sqrt(log m + s0 log(ed/s0))
  double vc = 0.0;                 ///< 2 (s log(em/s) + s s0 log(ed/s0))
  double sgnorm_quantity = 0.0;
  double rate_quantity = 0.0;
  nlohmann::json to_json() const;
};

/// Throws EpsRange unless 0 < eps < 1/2, BudgetInvalid on a bad budget.
ComplexityBounds complexity_bounds(Index m, Index d, Index s, Index s0, double eps);

/// Finite family of supports; the index set V is the union of the unit balls
/// on these supports, so sup_V <v, h> = max_S ||h_S||_2.
struct SupportFamily {
  Index p = 0;
  std::vector<std::vector<Index>> supports;

  /// Every s0-subset of every group. Throws CapExceeded above cap.
  static SupportFamily within_groups(const GroupLayout& layout, Index s0, std::uint64_t cap = kDefaultEnumerationCap);
  static SupportFamily single(Index p, Index coordinate);
};

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::uint64_t trials = 0;
  nlohmann::json to_json() const;
};

/// E sup_{v in V} |<v, Sigma^{1/2} g>| by Monte Carlo. factor empty = identity.
MonteCarloEstimate gaussian_complexity_mc(const SupportFamily& family, const Matrix& factor, std::uint64_t trials,
                                          std::uint64_t seed = 0);

struct SmallBallReport {
  double tau = 0.0;            ///< min over probed directions
  double mean = 0.0;           ///< average over directions
  double standard_error = 0.0; ///< binomial SE of one direction at the minimum
  Vector direction;            ///< unit vector attaining tau
  std::uint64_t rows = 0;
  std::uint64_t directions = 0;
  nlohmann::json to_json() const;
};

/// Estimates inf over unit beta in DS(s, s0) of P(|<beta, x>| >= theta_min)
/// over random directions (plus coordinate and flat ones) and fresh rows.
SmallBallReport small_ball_probe(const DesignEnsemble& ensemble, const SparsityBudget& budget, double theta_min,
                                 std::uint64_t rows, std::uint64_t directions = 200, std::uint64_t seed = 0);

struct MaureyReport {
  Vector w;
  double W = 0.0;
  double theta_max = 0.0;
  std::optional<double> theta;  ///< DSRE constant when the supports can be enumerated
  double design_norm2 = 0.0;    ///< ||X beta||_n^2
  double lhs_exact = 0.0;       ///< E ||X Z||_n^2 in closed form
  double rhs = 0.0;             ///< (1 - 1/s) ||X beta||_n^2 + W^2 / (s s0)
  MonteCarloEstimate lhs_mc;
  double z2_exact = 0.0;        ///< E ||Z||^2
  MonteCarloEstimate z2_mc;
  bool all_in_ds = true;
  /// ||X beta||^2 >= theta^2 ||beta||^2 - W^2 / (s0 (s - 1)); needs theta and s >= 2.
  std::optional<bool> implied_lower_bound;
  std::optional<double> theta_tilde;
  std::optional<double> s_tilde;

  /// Monte Carlo mean of ||X Z||_n^2 at most rhs + 3 SE, the closed form at
  /// most rhs (relative 1e-12) and every sample double-sparse.
  bool passes() const;
  /// Both Monte Carlo means within 3 SE of their closed forms.
  bool matches_closed_form() const;
  nlohmann::json to_json() const;
};

/// Maurey sampler for beta under X / sqrt(n): groups drawn with P(G = j) =
/// w_j / W, w_j = sqrt(s0) ||beta_j||_2 + ||beta_j||_1, then s0 signed
/// coordinates per draw. Throws ConditionViolated if theta_max > 1 + 1e-9
/// or the DSRE constant is zero.
MaureyReport maurey_check(const Matrix& X, const Vector& beta, const SparsityBudget& budget, const GroupLayout& layout,
                          std::uint64_t samples = 10'000, double c0 = 1.0, std::uint64_t seed = 0);

struct PhaseOptions {
  conditions::Condition condition = conditions::Condition::SGNorm;
  Index s = 1;
  Index s0 = 1;
  double c0 = 1.0;
  /// SGNorm: Sigma^{1/2} is scaled by 1 / (1 + theta) on top of the ensemble factor.
  double theta = 0.5;
  /// RE conditions: success when the (estimated) cone minimum is at least this.
  double kappa_min = 0.5;
  std::uint64_t reps = 40;
  std::uint64_t seed = 0;
  int jobs = 1;
  conditions::EigenvalueOptions eigen = [] {
    conditions::EigenvalueOptions e;
    e.restarts = 8;
    e.iterations = 150;
    e.mc_samples = 300;
    return e;
  }();
};

struct PhasePoint {
  Index n = 0;
  stochastic::BinomialEstimate success;  ///< reference 0.9
  double rate_quantity = 0.0;
};

struct PhaseDiagram {
  std::string ensemble;
  conditions::Condition condition = conditions::Condition::SGNorm;
  std::vector<PhasePoint> points;
  double rate_quantity = 0.0;
  double sgnorm_quantity = 0.0;
  /// No later point has its 99% upper limit below an earlier point's lower limit.
  bool monotone = true;
  std::optional<Index> first_n_at_90;
  /// first_n_at_90 / rate_quantity (SGNorm: theta^2 n / sgnorm_quantity).
  std::optional<double> fitted_constant;

  nlohmann::json to_json() const;
};

/// One success rate per n; the ensemble's n and seed are replaced per replicate.
PhaseDiagram phase_diagram(const DesignEnsemble& ensemble, const std::vector<Index>& n_grid, const PhaseOptions& options);

}  // namespace dsparse::randomdesign
