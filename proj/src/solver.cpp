#include "dsparse/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace dsparse::solver {

namespace {

constexpr double kE = std::numbers::e;

// Smooth part f(beta) = ||y - X beta||_n^2, through the Gram matrix when n > p.
class LeastSquares {
 public:
  explicit LeastSquares(const RegressionProblem& problem) : problem_(problem) {
    const double n = static_cast<double>(problem.n());
    use_gram_ = problem.X.rows() > problem.X.cols();
    if (use_gram_) {
      gram_ = problem.X.transpose() * problem.X / n;
      xty_ = problem.X.transpose() * problem.y / n;
      yy_ = problem.y.squaredNorm() / n;
    }
  }

  double value(const Vector& beta) const {
    if (use_gram_) return std::max(beta.dot(gram_ * beta) - 2.0 * xty_.dot(beta) + yy_, 0.0);
    return residual_term(beta, problem_);
  }

  Vector gradient(const Vector& beta) const {
    if (use_gram_) return 2.0 * (gram_ * beta - xty_);
    return (2.0 / static_cast<double>(problem_.n())) *
           (problem_.X.transpose() * (problem_.X * beta - problem_.y));
  }

 private:
  const RegressionProblem& problem_;
  bool use_gram_ = false;
  Matrix gram_;
  Vector xty_;
  double yy_ = 0.0;
};

// The combined prox is solved to the rounding floor inside the solver.
penalty::ProxOptions tight_prox() {
  penalty::ProxOptions options;
  options.tol = 0.0;
  options.max_iters = 100'000;
  return options;
}

double residual_map(const Vector& beta, const Vector& gradient, const penalty::Penalty& h, double t,
                    penalty::CombinedProxState* state) {
  const Vector moved = h.prox(beta - t * gradient, t, state, tight_prox());
  return (beta - moved).norm() / t;
}

}  // namespace

void RegressionProblem::validate() const {
  if (X.rows() != y.size()) {
    fail(ErrorCode::DimensionMismatch, "X has " + std::to_string(X.rows()) + " rows but y has " +
                                           std::to_string(y.size()) + " entries");
  }
  if (X.cols() != layout.p()) {
    fail(ErrorCode::DimensionMismatch, "X has " + std::to_string(X.cols()) + " columns, layout expects " +
                                           std::to_string(layout.p()));
  }
  if (X.rows() < 1) fail(ErrorCode::InvalidArgument, "need at least one observation");
  if (!X.allFinite() || !y.allFinite()) fail(ErrorCode::InvalidArgument, "data contain non-finite values");
  if (sigma && !(*sigma >= 0.0)) fail(ErrorCode::InvalidArgument, "sigma must be non-negative");
}

void SolverConfig::validate() const {
  if (!(tol > 0.0)) fail(ErrorCode::InvalidArgument, "tol must be positive");
  if (max_iters < 1) fail(ErrorCode::InvalidArgument, "max_iters must be at least 1");
}

nlohmann::json FitResult::to_json() const {
  return nlohmann::json{{"beta_hat", std::vector<double>(beta_hat.begin(), beta_hat.end())},
                        {"objective_trace", objective_trace},
                        {"iterations", iterations},
                        {"converged", converged},
                        {"kkt_residual", kkt_residual},
                        {"elapsed", elapsed}};
}

double residual_term(const Vector& beta, const RegressionProblem& problem) {
  problem.layout.check(beta, "beta");
  if (problem.X.rows() != problem.y.size() || problem.X.cols() != beta.size()) {
    fail(ErrorCode::DimensionMismatch, "problem dimensions do not match beta");
  }
  return (problem.y - problem.X * beta).squaredNorm() / static_cast<double>(problem.n());
}

double objective(const Vector& beta, const RegressionProblem& problem, const penalty::Penalty& h) {
  return residual_term(beta, problem) + h.value(beta);
}

double objective_sglasso(const Vector& beta, const RegressionProblem& problem, double lambda, double lambda_g) {
  return residual_term(beta, problem) + lambda * penalty::norm_l1(beta) +
         lambda_g * penalty::norm_l12(beta, problem.layout);
}

double slope_scale(double gamma, double n) {
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorCode::GammaRange, "gamma must lie in (0, 1)");
  if (!(n > 0.0)) fail(ErrorCode::InvalidArgument, "n must be positive");
  return 2.0 * (4.0 + std::numbers::sqrt2) / (std::sqrt(n) * gamma);
}

double objective_sgslope(const Vector& beta, const RegressionProblem& problem,
                         const penalty::WeightSequences& weights, double gamma) {
  const double scale = slope_scale(gamma, static_cast<double>(problem.n()));
  return residual_term(beta, problem) + scale * penalty::norm_combined_star(beta, weights, problem.layout);
}

double gram_operator_norm(const Matrix& X, std::uint64_t seed) {
  const Index p = X.cols();
  const double n = static_cast<double>(X.rows());
  if (p == 0 || X.rows() == 0) return 0.0;
  Rng rng = make_stream(seed, 0x5eed);
  Vector v = standard_normal(p, rng);
  v.normalize();
  double estimate = 0.0;
  for (int k = 0; k < 1000; ++k) {
    Vector w = X.transpose() * (X * v) / n;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (std::abs(next - estimate) <= 1e-10 * std::abs(next)) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return estimate;
}

double kkt_residual(const Vector& beta, const RegressionProblem& problem, const penalty::Penalty& h, double t) {
  problem.validate();
  problem.layout.check(beta, "beta");
  if (!(t > 0.0)) fail(ErrorCode::InvalidArgument, "t must be positive");
  const LeastSquares f(problem);
  return residual_map(beta, f.gradient(beta), h, t, nullptr);
}

FitResult fit(const RegressionProblem& problem, const penalty::Penalty& h, const SolverConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  problem.validate();
  config.validate();
  if (!(h.layout() == problem.layout)) fail(ErrorCode::DimensionMismatch, "penalty layout differs from problem");

  const LeastSquares f(problem);
  const Index p = problem.layout.p();
  const double estimate = 2.0 * gram_operator_norm(problem.X, config.seed);
  double L = std::max(config.step == StepPolicy::Fixed ? 1.1 * estimate : estimate, 1e-12);

  penalty::CombinedProxState step_state;
  penalty::CombinedProxState check_state;
  auto total = [&](const Vector& beta) { return f.value(beta) + h.value(beta); };

  FitResult result;
  Vector x = Vector::Zero(p);
  Vector y = x;
  double momentum = 1.0;
  double current = total(x);
  Vector best = x;
  double best_value = current;

  for (int k = 1; k <= config.max_iters; ++k) {
    result.iterations = k;
    const Vector grad = f.gradient(y);
    const double fy = f.value(y);
    Vector z;
    while (true) {
      z = h.prox(y - grad / L, 1.0 / L, &step_state, tight_prox());
      const Vector diff = z - y;
      const double model = fy + grad.dot(diff) + 0.5 * L * diff.squaredNorm();
      if (f.value(z) <= model + 1e-12 * std::max(1.0, std::abs(fy))) break;
      L *= 2.0;
    }
    const double fz = total(z);
    if (fz < best_value) {
      best_value = fz;
      best = z;
    }

    // Candidate stationarity: cheap gradient-mapping test, then the exact residual.
    if ((z - y).norm() * L <= config.tol) {
      const double r = residual_map(z, f.gradient(z), h, 1.0, &check_state);
      if (r <= config.tol) {
        result.converged = true;
        result.kkt_residual = r;
        result.objective_trace.push_back(fz);
        x = z;
        break;
      }
    }

    // Restart only when momentum was active; a plain step from x is a descent
    // step, so rejecting it on rounding noise would stall the iteration.
    if (!config.monotone && config.restart && fz > current && momentum > 1.0) {
      momentum = 1.0;
      y = x;
      result.objective_trace.push_back(current);
      continue;
    }

    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    Vector x_next = z;
    if (config.monotone) {
      if (fz > current) x_next = x;
      y = x_next + (momentum / next_momentum) * (z - x_next) + ((momentum - 1.0) / next_momentum) * (x_next - x);
      if (config.restart && fz > current) {
        y = x_next;
        momentum = 1.0;
      } else {
        momentum = next_momentum;
      }
    } else {
      y = x_next + ((momentum - 1.0) / next_momentum) * (x_next - x);
      momentum = next_momentum;
    }
    x = std::move(x_next);
    current = config.monotone ? std::min(current, fz) : fz;
    result.objective_trace.push_back(current);
  }

  if (result.converged) {
    result.beta_hat = x;
  } else {
    result.beta_hat = best;
    result.kkt_residual = residual_map(best, f.gradient(best), h, 1.0, &check_state);
  }
  result.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

penalty::Penalty TheoreticalTuning::sglasso(const GroupLayout& layout) const {
  return penalty::Penalty::sparse_group(lambda, lambda_g, layout);
}

penalty::Penalty TheoreticalTuning::sgslope(const GroupLayout& layout) const {
  return penalty::Penalty::combined_star(weights, layout, slope_scale);
}

namespace {

double complexity_element(const SparsityBudget& budget, const GroupLayout& layout) {
  const double s = static_cast<double>(budget.s());
  const double s0 = static_cast<double>(budget.s0());
  return s * s0 * std::log(2.0 * kE * static_cast<double>(layout.d()) / s0);
}

double complexity_group(const SparsityBudget& budget, const GroupLayout& layout) {
  const double s = static_cast<double>(budget.s());
  return 2.0 * s * std::log(4.0 * kE * static_cast<double>(layout.m()) / s);
}

}  // namespace

double default_delta0(double sigma, const SparsityBudget& budget, const GroupLayout& layout, double c1) {
  return std::exp(-c1 * sigma * sigma * (complexity_element(budget, layout) + complexity_group(budget, layout)));
}

TheoreticalTuning theoretical_tuning(const RegressionProblem& problem, const SparsityBudget& budget, double gamma,
                                     std::optional<double> delta0) {
  if (!problem.sigma) fail(ErrorCode::SigmaUnknown, "theoretical tuning needs the noise level sigma");
  const double sigma = *problem.sigma;
  const double n = static_cast<double>(problem.n());
  const double sharp = penalty::lambda_sharp(gamma, sigma, n, budget, problem.layout);
  TheoreticalTuning tuning{
      .lambda_sharp = sharp,
      .lambda = 2.0 * sharp,
      .lambda_g = 2.0 * std::sqrt(static_cast<double>(budget.s0())) * sharp,
      .gamma = gamma,
      .delta0 = delta0.value_or(default_delta0(sigma, budget, problem.layout)),
      .slope_scale = slope_scale(gamma, n),
      .weights = penalty::make_weights(problem.layout, budget.s0(), sigma),
  };
  return tuning;
}

TheoreticalRate theoretical_rate(double sigma, double n, const SparsityBudget& budget, const GroupLayout& layout,
                                 double gamma, std::optional<double> delta0) {
  if (!(n > 0.0)) fail(ErrorCode::InvalidArgument, "n must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorCode::GammaRange, "gamma must lie in (0, 1)");
  TheoreticalRate rate;
  rate.element_part = complexity_element(budget, layout);
  rate.group_part = complexity_group(budget, layout);
  rate.value = sigma * std::sqrt((rate.element_part + rate.group_part) / n);
  rate.gamma = gamma;
  rate.delta0 = delta0.value_or(default_delta0(sigma, budget, layout));
  return rate;
}

double cone_parameter_statement(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorCode::GammaRange, "gamma must lie in (0, 1)");
  return 2.0 * (1.0 + gamma) / (1.0 - gamma);
}

double cone_parameter_derivation(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorCode::GammaRange, "gamma must lie in (0, 1)");
  return 4.0 * gamma / (1.0 - gamma);
}

double sglasso_error_bound(double theta, const TheoreticalTuning& tuning, const SparsityBudget& budget,
                           const GroupLayout& layout) {
  if (!(theta > 0.0)) return std::numeric_limits<double>::infinity();
  const double s = static_cast<double>(budget.s());
  const double s0 = static_cast<double>(budget.s0());
  // log(1/delta(lambda_sharp)) equals the logarithmic level inside lambda_sharp.
  const double level = std::log(2.0 * kE * static_cast<double>(layout.d()) / s0) +
                       (2.0 / s0) * std::log(4.0 * kE * static_cast<double>(layout.m()) / s);
  const double ratio = std::log(1.0 / tuning.delta0) / (level * s * s0);
  return (1.0 + tuning.gamma) * std::sqrt(s * s0) * tuning.lambda_sharp *
         std::max(2.0 / (theta * theta), 0.5 * ratio);
}

}  // namespace dsparse::solver
