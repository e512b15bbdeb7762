#include "dsparse/randomdesign.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace dsparse::randomdesign {

namespace {

constexpr double kE = std::numbers::e;

double log_binomial_free(Index m, Index d, Index s0) {
  return std::log(static_cast<double>(m)) + static_cast<double>(s0) * std::log(kE * static_cast<double>(d) / static_cast<double>(s0));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  Rng rng = make_stream(seed, a * 0x9E3779B97F4A7C15ULL + b);
  return rng();
}

MonteCarloEstimate summarize(const std::vector<double>& values) {
  MonteCarloEstimate out;
  out.trials = values.size();
  if (values.empty()) return out;
  const double k = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= k;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  out.mean = mean;
  out.standard_error = values.size() > 1 ? std::sqrt(var / (k - 1) / k) : 0.0;
  return out;
}

}  // namespace

std::string to_string(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::Gaussian: return "gaussian";
    case EnsembleKind::Rademacher: return "rademacher";
    case EnsembleKind::SubGaussianWithCovariance: return "subgaussian-covariance";
    case EnsembleKind::WeakMoment: return "weak-moment";
  }
  return "unknown";
}

EnsembleKind ensemble_from_string(const std::string& name) {
  for (EnsembleKind k : {EnsembleKind::Gaussian, EnsembleKind::Rademacher, EnsembleKind::SubGaussianWithCovariance,
                         EnsembleKind::WeakMoment}) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorCode::InvalidArgument, "unknown ensemble '" + name + "'");
}

void DesignEnsemble::validate() const {
  if (n < 0) fail(ErrorCode::InvalidArgument, "n must be non-negative");
  if (!(alpha >= 0.5)) fail(ErrorCode::InvalidArgument, "alpha must be at least 1/2");
  if (!(kappa1 >= 0.0)) fail(ErrorCode::InvalidArgument, "kappa1 must be positive (0 selects the default)");
  if (factor.size() != 0 && (factor.rows() != layout.p() || factor.cols() != layout.p())) {
    fail(ErrorCode::InvalidArgument, "covariance factor must be p x p");
  }
}

double weak_moment_lq(double alpha, double q) {
  return std::exp(std::lgamma(q * alpha + 1.0) / q - 0.5 * std::lgamma(2.0 * alpha + 1.0));
}

double weak_moment_kappa(double alpha, double q0) {
  if (q0 < 2.0) q0 = 2.0;
  double best = 0.0;
  // log ||W||_q - alpha log q is smooth in q; a fine grid plus the endpoints is enough.
  const int steps = 400;
  for (int k = 0; k <= steps; ++k) {
    const double q = 2.0 + (q0 - 2.0) * k / steps;
    best = std::max(best, weak_moment_lq(alpha, q) / std::pow(q, alpha));
  }
  return best;
}

Matrix orthonormal_design(Index n, Index p, std::uint64_t seed) {
  if (n < p || p <= 0) fail(ErrorCode::InvalidArgument, "orthonormal design needs n >= p > 0");
  Rng rng = make_stream(seed, 5);
  Matrix G(n, p);
  for (Index j = 0; j < p; ++j) G.col(j) = standard_normal(n, rng);
  const Matrix Q = Eigen::HouseholderQR<Matrix>(G).householderQ() * Matrix::Identity(n, p);
  return std::sqrt(static_cast<double>(n)) * Q;
}

Matrix sample_rows(const DesignEnsemble& ensemble, std::uint64_t first, Index count) {
  ensemble.validate();
  const Index p = ensemble.layout.p();
  Matrix Z(count, p);
  const double weibull_scale = 1.0 / std::sqrt(std::tgamma(2.0 * ensemble.alpha + 1.0));
  for (Index i = 0; i < count; ++i) {
    Rng rng = make_stream(ensemble.seed, first + static_cast<std::uint64_t>(i));
    switch (ensemble.kind) {
      case EnsembleKind::Gaussian:
      case EnsembleKind::SubGaussianWithCovariance:
        Z.row(i) = standard_normal(p, rng).transpose();
        break;
      case EnsembleKind::Rademacher: {
        std::bernoulli_distribution coin(0.5);
        for (Index j = 0; j < p; ++j) Z(i, j) = coin(rng) ? 1.0 : -1.0;
        break;
      }
      case EnsembleKind::WeakMoment: {
        std::exponential_distribution<double> expo(1.0);
        std::bernoulli_distribution coin(0.5);
        for (Index j = 0; j < p; ++j) {
          const double magnitude = std::pow(expo(rng), ensemble.alpha) * weibull_scale;
          Z(i, j) = coin(rng) ? magnitude : -magnitude;
        }
        break;
      }
    }
  }
  if (ensemble.factor.size() != 0) return Z * ensemble.factor;
  return Z;
}

Matrix generate(const DesignEnsemble& ensemble) { return sample_rows(ensemble, 0, ensemble.n); }

double sgnorm_quantity(Index m, Index d, Index s0) { return log_binomial_free(m, d, s0); }

double rate_quantity(Index m, Index d, Index s, Index s0) {
  const double sd = static_cast<double>(s);
  const double s0d = static_cast<double>(s0);
  return sd * std::log(4.0 * kE * static_cast<double>(m) / sd) + sd * s0d * std::log(2.0 * kE * static_cast<double>(d) / s0d);
}

double q0(Index m, Index d, Index s0, double c1) { return c1 * sgnorm_quantity(m, d, s0); }

nlohmann::json ComplexityBounds::to_json() const {
  return {{"covering", covering},   {"gaussian", gaussian},   {"gaussian_ed", gaussian_ed},
          {"vc", vc},               {"sgnorm_quantity", sgnorm_quantity}, {"rate_quantity", rate_quantity}};
}

ComplexityBounds complexity_bounds(Index m, Index d, Index s, Index s0, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) fail(ErrorCode::EpsRange, "covering needs 0 < eps < 1/2");
  const GroupLayout layout(m, d);
  const SparsityBudget budget(s, s0, layout);
  const double s0d = static_cast<double>(s0);
  const double sd = static_cast<double>(s);
  ComplexityBounds b;
  b.covering = static_cast<double>(m) * binomial(d, s0) * std::pow(5.0 / (2.0 * eps), s0d);
  b.gaussian = 6.0 * std::sqrt(std::log(static_cast<double>(m)) + s0d * std::log(5.0 * kE * static_cast<double>(d) / s0d));
  b.gaussian_ed = 6.0 * std::sqrt(sgnorm_quantity(m, d, s0));
  b.vc = 2.0 * (sd * std::log(kE * static_cast<double>(m) / sd) + sd * s0d * std::log(kE * static_cast<double>(d) / s0d));
  b.sgnorm_quantity = sgnorm_quantity(m, d, s0);
  b.rate_quantity = rate_quantity(m, d, budget.s(), budget.s0());
  return b;
}

SupportFamily SupportFamily::within_groups(const GroupLayout& layout, Index s0, std::uint64_t cap) {
  if (s0 < 1 || s0 > layout.d()) fail(ErrorCode::BudgetInvalid, "need 1 <= s0 <= d");
  const std::uint64_t count = static_cast<std::uint64_t>(layout.m()) * binomial_u64(layout.d(), s0);
  if (count > cap) fail(ErrorCode::CapExceeded, "support family has " + std::to_string(count) + " members");
  SupportFamily f;
  f.p = layout.p();
  for (Index g = 0; g < layout.m(); ++g) {
    for_each_combination(layout.d(), s0, [&](std::span<const Index> rows) {
      std::vector<Index> support;
      for (Index r : rows) support.push_back(layout.index(g, r));
      f.supports.push_back(std::move(support));
    });
  }
  return f;
}

SupportFamily SupportFamily::single(Index p, Index coordinate) {
  if (coordinate < 0 || coordinate >= p) fail(ErrorCode::InvalidArgument, "coordinate out of range");
  return {p, {{coordinate}}};
}

nlohmann::json MonteCarloEstimate::to_json() const {
  return {{"mean", mean}, {"standard_error", standard_error}, {"trials", trials}};
}

MonteCarloEstimate gaussian_complexity_mc(const SupportFamily& family, const Matrix& factor, std::uint64_t trials,
                                          std::uint64_t seed) {
  if (trials == 0) fail(ErrorCode::InvalidArgument, "need trials > 0");
  if (factor.size() != 0 && (factor.rows() != family.p || factor.cols() != family.p)) {
    fail(ErrorCode::DimensionMismatch, "factor must be p x p");
  }
  std::vector<double> sups(trials);
  for (std::uint64_t t = 0; t < trials; ++t) {
    Rng rng = make_stream(seed, t);
    Vector h = standard_normal(family.p, rng);
    if (factor.size() != 0) h = factor * h;
    double best = 0.0;
    for (const auto& support : family.supports) {
      double sq = 0.0;
      for (Index i : support) sq += h[i] * h[i];
      best = std::max(best, sq);
    }
    sups[t] = std::sqrt(best);
  }
  return summarize(sups);
}

nlohmann::json SmallBallReport::to_json() const {
  return {{"tau", tau}, {"mean", mean}, {"standard_error", standard_error}, {"rows", rows}, {"directions", directions}};
}

SmallBallReport small_ball_probe(const DesignEnsemble& ensemble, const SparsityBudget& budget, double theta_min,
                                 std::uint64_t rows, std::uint64_t directions, std::uint64_t seed) {
  if (rows == 0 || directions == 0) fail(ErrorCode::InvalidArgument, "need rows > 0 and directions > 0");
  const GroupLayout& layout = ensemble.layout;
  DesignEnsemble fresh = ensemble;
  fresh.seed = derive_seed(seed, 1, ensemble.seed);
  const Matrix X = sample_rows(fresh, 0, static_cast<Index>(rows));

  SmallBallReport report;
  report.rows = rows;
  report.directions = directions;
  report.tau = INFINITY;
  double total = 0.0;
  for (std::uint64_t k = 0; k < directions; ++k) {
    Rng rng = make_stream(seed, 2 + k);
    Vector beta = Vector::Zero(layout.p());
    if (k == 0) {
      beta[0] = 1.0;
    } else {
      const IndexSet set = sample_family({Family::S2, budget}, layout, rng);
      const Vector z = standard_normal(static_cast<Index>(set.elements.size()), rng);
      for (std::size_t r = 0; r < set.elements.size(); ++r) beta[set.elements[r]] = k == 1 ? 1.0 : z[static_cast<Index>(r)];
      beta /= beta.norm();
    }
    const double rate = static_cast<double>(((X * beta).array().abs() >= theta_min).count()) / static_cast<double>(rows);
    total += rate;
    if (rate < report.tau) {
      report.tau = rate;
      report.direction = beta;
    }
  }
  report.mean = total / static_cast<double>(directions);
  report.standard_error = std::sqrt(report.tau * (1.0 - report.tau) / static_cast<double>(rows));
  return report;
}

bool MaureyReport::passes() const {
  return all_in_ds && lhs_exact <= rhs * (1.0 + 1e-12) && lhs_mc.mean <= rhs + 3.0 * lhs_mc.standard_error;
}

bool MaureyReport::matches_closed_form() const {
  return std::abs(lhs_mc.mean - lhs_exact) <= 3.0 * lhs_mc.standard_error + 1e-12 * lhs_exact &&
         std::abs(z2_mc.mean - z2_exact) <= 3.0 * z2_mc.standard_error + 1e-12 * z2_exact;
}

nlohmann::json MaureyReport::to_json() const {
  nlohmann::json j = {{"W", W},
                      {"theta_max", theta_max},
                      {"design_norm2", design_norm2},
                      {"lhs_exact", lhs_exact},
                      {"rhs", rhs},
                      {"lhs_mc", lhs_mc.to_json()},
                      {"z2_exact", z2_exact},
                      {"z2_mc", z2_mc.to_json()},
                      {"all_in_ds", all_in_ds},
                      {"passes", passes()},
                      {"matches_closed_form", matches_closed_form()}};
  j["theta"] = theta ? nlohmann::json(*theta) : nlohmann::json(nullptr);
  j["implied_lower_bound"] = implied_lower_bound ? nlohmann::json(*implied_lower_bound) : nlohmann::json(nullptr);
  j["theta_tilde"] = theta_tilde ? nlohmann::json(*theta_tilde) : nlohmann::json(nullptr);
  j["s_tilde"] = s_tilde ? nlohmann::json(*s_tilde) : nlohmann::json(nullptr);
  return j;
}

MaureyReport maurey_check(const Matrix& X, const Vector& beta, const SparsityBudget& budget, const GroupLayout& layout,
                          std::uint64_t samples, double c0, std::uint64_t seed) {
  layout.check(beta, "beta");
  if (X.cols() != layout.p()) fail(ErrorCode::DimensionMismatch, "X columns do not match the layout");
  if (samples < 2) fail(ErrorCode::InvalidArgument, "need at least two samples");
  if (beta.norm() == 0.0) fail(ErrorCode::InvalidArgument, "beta must be nonzero");
  const Matrix Xn = X / std::sqrt(static_cast<double>(X.rows()));
  const Index s = budget.s();
  const Index s0 = budget.s0();
  const Index m = layout.m();
  const Index d = layout.d();
  const double sd = static_cast<double>(s);
  const double s0d = static_cast<double>(s0);

  MaureyReport r;
  r.theta_max = conditions::check_sgnorm(X, layout, s0).value;
  if (r.theta_max > 1.0 + 1e-9) {
    fail(ErrorCode::ConditionViolated, "sparse group normalization fails: theta_max = " + std::to_string(r.theta_max));
  }
  try {
    r.theta = conditions::exact_ds_eigenvalue(X, budget, layout).value;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::CapExceeded) throw;
  }
  if (r.theta && !(*r.theta > 1e-12)) fail(ErrorCode::ConditionViolated, "double sparse RE constant is zero");

  r.w = Vector(m);
  for (Index j = 0; j < m; ++j) {
    const auto block = beta.segment(j * d, d);
    r.w[j] = std::sqrt(s0d) * block.norm() + block.lpNorm<1>();
  }
  r.W = r.w.sum();
  const Vector column_sq = Xn.colwise().squaredNorm().transpose();
  r.design_norm2 = (Xn * beta).squaredNorm();

  // Closed forms for E||X Z||^2 and E||Z||^2.
  double xh = 0.0;
  double zh = 0.0;
  for (Index j = 0; j < m; ++j) {
    if (r.w[j] == 0.0) continue;
    const auto block = beta.segment(j * d, d);
    const double l1 = block.lpNorm<1>();
    const double x_block = (Xn.middleCols(j * d, d) * block).squaredNorm();
    const double x_diag = l1 * block.cwiseAbs().dot(column_sq.segment(j * d, d));
    xh += (r.W / r.w[j]) * ((1.0 - 1.0 / s0d) * x_block + x_diag / s0d);
    zh += (r.W / r.w[j]) * ((1.0 - 1.0 / s0d) * block.squaredNorm() + l1 * l1 / s0d);
  }
  r.lhs_exact = (1.0 - 1.0 / sd) * r.design_norm2 + xh / sd;
  r.z2_exact = (1.0 - 1.0 / sd) * beta.squaredNorm() + zh / sd;
  r.rhs = (1.0 - 1.0 / sd) * r.design_norm2 + r.W * r.W / (sd * s0d);

  std::discrete_distribution<Index> group_dist(r.w.data(), r.w.data() + m);
  std::vector<std::discrete_distribution<Index>> entry_dist;
  for (Index j = 0; j < m; ++j) {
    const Vector a = beta.segment(j * d, d).cwiseAbs();
    entry_dist.emplace_back(a.data(), a.data() + d);
  }
  std::vector<double> xz(samples);
  std::vector<double> zz(samples);
  for (std::uint64_t t = 0; t < samples; ++t) {
    Rng rng = make_stream(seed, t);
    std::vector<std::pair<Index, double>> entries;
    for (Index k = 0; k < s; ++k) {
      const Index g = group_dist(rng);
      const double scale = (r.W / r.w[g]) * beta.segment(g * d, d).lpNorm<1>() / (sd * s0d);
      for (Index l = 0; l < s0; ++l) {
        const Index i = g * d + entry_dist[static_cast<std::size_t>(g)](rng);
        entries.emplace_back(i, beta[i] > 0 ? scale : -scale);
      }
    }
    std::sort(entries.begin(), entries.end());
    Vector fit = Vector::Zero(Xn.rows());
    double norm2 = 0.0;
    std::set<Index> groups;
    Index nnz = 0;
    for (std::size_t a = 0; a < entries.size();) {
      std::size_t b = a;
      double value = 0.0;
      while (b < entries.size() && entries[b].first == entries[a].first) value += entries[b++].second;
      fit += value * Xn.col(entries[a].first);
      norm2 += value * value;
      groups.insert(layout.group_of(entries[a].first));
      ++nnz;
      a = b;
    }
    if (static_cast<Index>(groups.size()) > s || nnz > s * s0) r.all_in_ds = false;
    xz[t] = fit.squaredNorm();
    zz[t] = norm2;
  }
  r.lhs_mc = summarize(xz);
  r.z2_mc = summarize(zz);

  if (r.theta) {
    r.theta_tilde = *r.theta / std::numbers::sqrt2;
    r.s_tilde = (sd - 1.0) * *r.theta * *r.theta / (2.0 * (2.0 + c0) * (2.0 + c0));
    if (s >= 2) {
      const double floor = *r.theta * *r.theta * beta.squaredNorm() - r.W * r.W / (s0d * (sd - 1.0));
      r.implied_lower_bound = r.design_norm2 >= floor - 1e-12 * (1.0 + std::abs(floor));
    }
  }
  return r;
}

nlohmann::json PhaseDiagram::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const PhasePoint& p : points) {
    nlohmann::json j = p.success.to_json();
    j["n"] = p.n;
    j["rate_quantity"] = p.rate_quantity;
    pts.push_back(std::move(j));
  }
  nlohmann::json j = {{"ensemble", ensemble},
                      {"condition", conditions::to_string(condition)},
                      {"rate_quantity", rate_quantity},
                      {"sgnorm_quantity", sgnorm_quantity},
                      {"monotone", monotone},
                      {"points", std::move(pts)}};
  j["first_n_at_90"] = first_n_at_90 ? nlohmann::json(*first_n_at_90) : nlohmann::json(nullptr);
  j["fitted_constant"] = fitted_constant ? nlohmann::json(*fitted_constant) : nlohmann::json(nullptr);
  return j;
}

PhaseDiagram phase_diagram(const DesignEnsemble& ensemble, const std::vector<Index>& n_grid, const PhaseOptions& options) {
  ensemble.validate();
  if (options.reps == 0) fail(ErrorCode::InvalidArgument, "need reps > 0");
  const GroupLayout& layout = ensemble.layout;
  const SparsityBudget budget(options.s, options.s0, layout);
  using conditions::Condition;

  PhaseDiagram out;
  out.ensemble = to_string(ensemble.kind);
  out.condition = options.condition;
  out.rate_quantity = rate_quantity(layout.m(), layout.d(), options.s, options.s0);
  out.sgnorm_quantity = sgnorm_quantity(layout.m(), layout.d(), options.s0);

  std::optional<conditions::ConeSpec> cone;
  if (options.condition == Condition::SSGRE || options.condition == Condition::WSGRE) {
    cone = conditions::ConeSpec{options.condition == Condition::SSGRE ? conditions::Cone::SSGRE : conditions::Cone::WSGRE,
                                budget, options.c0, std::nullopt};
    if (options.condition == Condition::WSGRE) cone->weights = penalty::make_weights(layout, options.s0, 1.0);
    cone->validate();
  }

  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    const Index n = n_grid[k];
    if (n < 1) fail(ErrorCode::InvalidArgument, "grid sizes must be positive");
    std::vector<char> ok(options.reps, 0);
    parallel_for(options.reps, options.jobs, [&](std::size_t rep) {
      DesignEnsemble e = ensemble;
      e.n = n;
      e.seed = derive_seed(options.seed, static_cast<std::uint64_t>(n), rep);
      Matrix X = generate(e);
      switch (options.condition) {
        case Condition::SGNorm:
          X /= 1.0 + options.theta;
          ok[rep] = conditions::check_sgnorm(X, layout, options.s0).value <= 1.0;
          break;
        case Condition::DSRE:
          ok[rep] = conditions::exact_ds_eigenvalue(X, budget, layout).value >= options.kappa_min;
          break;
        default: {
          conditions::EigenvalueOptions eo = options.eigen;
          eo.seed = e.seed;
          eo.jobs = 1;
          ok[rep] = conditions::estimate_cone_eigenvalue(X, *cone, layout, eo).value >= options.kappa_min;
        }
      }
    });
    const auto successes = static_cast<std::uint64_t>(std::count(ok.begin(), ok.end(), 1));
    out.points.push_back({n, stochastic::BinomialEstimate::make(successes, options.reps, 0.9), out.rate_quantity});
    if (!out.first_n_at_90 && out.points.back().success.rate >= 0.9) out.first_n_at_90 = n;
  }
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    for (std::size_t j = i + 1; j < out.points.size(); ++j) {
      if (out.points[j].success.upper < out.points[i].success.lower) out.monotone = false;
    }
  }
  if (out.first_n_at_90) {
    const double nstar = static_cast<double>(*out.first_n_at_90);
    out.fitted_constant = options.condition == Condition::SGNorm
                              ? options.theta * options.theta * nstar / out.sgnorm_quantity
                              : nstar / out.rate_quantity;
  }
  return out;
}

}  // namespace dsparse::randomdesign
