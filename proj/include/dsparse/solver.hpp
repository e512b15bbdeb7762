#pragma once

#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsparse/core.hpp"
#include "dsparse/penalty.hpp"

namespace dsparse::solver {

/// y = X beta* + xi with grouped columns.
struct RegressionProblem {
  Vector y;
  Matrix X;
  GroupLayout layout;
  std::optional<double> sigma;

  Index n() const { return X.rows(); }
  /// Throws DimensionMismatch or InvalidArgument on inconsistent data.
  void validate() const;
};

enum class StepPolicy { Fixed, Backtracking };

struct SolverConfig {
  int max_iters = 20'000;
  double tol = 1e-8;
  StepPolicy step = StepPolicy::Fixed;
  bool restart = true;
  /// Keep the best iterate so the objective trace never increases.
  bool monotone = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FitResult {
  Vector beta_hat;
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  double elapsed = 0.0;

  nlohmann::json to_json() const;
};

/// Mean squared residual ||y - X beta||_n^2.
double residual_term(const Vector& beta, const RegressionProblem& problem);

double objective(const Vector& beta, const RegressionProblem& problem, const penalty::Penalty& h);

/// ||y - X beta||_n^2 + lambda ||beta||_1 + lambda_g ||beta||_{1,2}.
double objective_sglasso(const Vector& beta, const RegressionProblem& problem, double lambda, double lambda_g);

/// Slope scale 2 (4 + sqrt 2) / (sqrt(n) gamma). Requires 0 < gamma < 1.
double slope_scale(double gamma, double n);

/// ||y - X beta||_n^2 + slope_scale(gamma, n) * ||beta||_*.
double objective_sgslope(const Vector& beta, const RegressionProblem& problem,
                         const penalty::WeightSequences& weights, double gamma);

/// Accelerated proximal gradient with function-value restart.
/// On NoConvergence the best iterate is returned with converged = false.
FitResult fit(const RegressionProblem& problem, const penalty::Penalty& h, const SolverConfig& config = {});

/// Prox fixed-point residual ||beta - prox_{t h}(beta - t grad f(beta))|| / t.
double kkt_residual(const Vector& beta, const RegressionProblem& problem, const penalty::Penalty& h,
                    double t = 1.0);

/// Largest eigenvalue of X^T X / n by power iteration.
double gram_operator_norm(const Matrix& X, std::uint64_t seed = 0);

struct TheoreticalTuning {
  double lambda_sharp = 0.0;
  double lambda = 0.0;    ///< 2 lambda_sharp
  double lambda_g = 0.0;  ///< 2 sqrt(s0) lambda_sharp
  double gamma = 0.5;
  double delta0 = 0.0;
  double slope_scale = 0.0;
  penalty::WeightSequences weights;

  penalty::Penalty sglasso(const GroupLayout& layout) const;
  penalty::Penalty sgslope(const GroupLayout& layout) const;
};

/// Default confidence level exp(-C1 sigma^2 (s s0 log(2ed/s0) + 2 s log(4em/s))) with C1 = 1.
double default_delta0(double sigma, const SparsityBudget& budget, const GroupLayout& layout, double c1 = 1.0);

/// Requires problem.sigma (SigmaUnknown otherwise) and gamma in (0, 1).
TheoreticalTuning theoretical_tuning(const RegressionProblem& problem, const SparsityBudget& budget,
                                     double gamma = 0.5, std::optional<double> delta0 = std::nullopt);

struct TheoreticalRate {
  double value = 0.0;          ///< sigma * sqrt(complexity / n)
  double element_part = 0.0;   ///< s s0 log(2ed/s0)
  double group_part = 0.0;     ///< 2 s log(4em/s)
  double gamma = 0.5;
  double delta0 = 0.0;
};

TheoreticalRate theoretical_rate(double sigma, double n, const SparsityBudget& budget, const GroupLayout& layout,
                                 double gamma = 0.5, std::optional<double> delta0 = std::nullopt);

/// Cone parameters for the restricted eigenvalue in the lasso error bound.
/// Two readings exist: 2(1 + gamma)/(1 - gamma) and 4 gamma/(1 - gamma).
double cone_parameter_statement(double gamma);
double cone_parameter_derivation(double gamma);

/// High-probability l2 error bound for the sparse group lasso under theoretical
/// tuning: (1 + gamma) sqrt(s s0) lambda_sharp max{2 / theta^2,
/// log(1/delta0) / (2 s s0 log(1/delta(lambda_sharp)))}.
double sglasso_error_bound(double theta, const TheoreticalTuning& tuning, const SparsityBudget& budget,
                           const GroupLayout& layout);

}  // namespace dsparse::solver
