// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "brute_force.hpp"
#include "dsparse/conditions.hpp"
#include "dsparse/experiment.hpp"
#include "dsparse/lowerbound.hpp"
#include "dsparse/penalty.hpp"
#include "dsparse/randomdesign.hpp"
#include "dsparse/solver.hpp"
#include "dsparse/stochastic.hpp"

using namespace dsparse;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof buf, pattern, args);
  va_end(args);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// A1 -------------------------------------------------------------------------

Outcome prox_oracle() {
  const auto start = std::chrono::steady_clock::now();
  static const std::vector<std::pair<int, int>> shapes{{1, 2}, {2, 1}, {2, 2}, {4, 1}, {1, 4}, {3, 2}, {2, 3}};
  double worst = 0.0;
  int instances = 0;
  for (std::uint64_t trial = 0; trial < 200; ++trial) {
    Rng rng = make_stream(0xA1, trial);
    const auto [m, d] = shapes[trial % shapes.size()];
    const GroupLayout layout(m, d);
    const Index s0 = std::uniform_int_distribution<Index>(1, d)(rng);
    std::uniform_real_distribution<double> unit(0.1, 1.0);
    const double sigma = unit(rng);
    const double t = unit(rng);
    Vector x = 2.0 * standard_normal(layout.p(), rng);
    if (trial % 5 == 0) x[0] = x[layout.p() - 1];

    // Sorted l1 with a random non-increasing weight vector.
    Vector w = standard_normal(layout.p(), rng).cwiseAbs();
    std::sort(w.begin(), w.end(), std::greater<double>());
    auto h1 = [&](const oracle::Vec& u) { return oracle::sorted_l1(u, w); };
    auto g1 = [&](const oracle::Vec& u) { return oracle::sorted_l1_subgradient(u, w); };
    worst = std::max(worst, (penalty::prox_sorted_l1(x, w) - oracle::prox(h1, g1, x)).norm());

    const double lam = t * sigma, lam_g = 0.7 * t;
    auto h2 = [&](const oracle::Vec& u) { return lam * oracle::l1(u) + lam_g * oracle::l12(u, d); };
    auto g2 = [&](const oracle::Vec& u) {
      return oracle::Vec(lam * oracle::l1_subgradient(u) + lam_g * oracle::l12_subgradient(u, d));
    };
    worst = std::max(worst, (penalty::prox_sparse_group(x, lam, lam_g, layout) - oracle::prox(h2, g2, x)).norm());

    const penalty::WeightSequences ws = penalty::make_weights(layout, s0, sigma);
    const Vector we = t * ws.element();
    const Vector wg = t * std::sqrt(static_cast<double>(s0)) * ws.group();
    auto h3 = [&](const oracle::Vec& u) { return oracle::sorted_l1(u, we) + oracle::group_sorted(u, wg, d); };
    auto g3 = [&](const oracle::Vec& u) {
      return oracle::Vec(oracle::sorted_l1_subgradient(u, we) + oracle::group_sorted_subgradient(u, wg, d));
    };
    worst = std::max(worst, (penalty::prox_combined_star(x, t, ws, layout) - oracle::prox(h3, g3, x)).norm());
    ++instances;
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-6 && elapsed < 60.0,
          fmt("%d instances x 3 maps, worst l2 gap %.2e (<= 1e-6), %.1f s (< 60 s)", instances, worst, elapsed)};
}

// A2 -------------------------------------------------------------------------

Outcome solver_kkt() {
  double worst_kkt = 0.0;
  int unconverged = 0, beaten = 0;
  Index max_n = 0, max_p = 0;
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    Rng rng = make_stream(0xA2, trial);
    const Index n = std::uniform_int_distribution<Index>(40, 400)(rng);
    const Index d = std::uniform_int_distribution<Index>(1, 5)(rng);
    const Index m = std::uniform_int_distribution<Index>(2, 200 / d)(rng);
    const GroupLayout layout(m, d);
    const Index s = std::uniform_int_distribution<Index>(1, std::min<Index>(m, 3))(rng);
    const Index s0 = std::uniform_int_distribution<Index>(1, d)(rng);
    const SparsityBudget budget(s, s0, layout);
    const double sigma = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
    Matrix X(n, layout.p());
    for (Index j = 0; j < X.cols(); ++j) X.col(j) = standard_normal(n, rng);
    Vector beta = Vector::Zero(layout.p());
    for (Index i : sample_family({Family::S2, budget}, layout, rng).elements) beta[i] = standard_normal(1, rng)[0];
    const Vector y = X * beta + sigma * standard_normal(n, rng);
    const solver::RegressionProblem problem{y, X, layout, sigma};
    const solver::TheoreticalTuning tuning = solver::theoretical_tuning(problem, budget);
    const penalty::Penalty h = trial % 2 ? tuning.sgslope(layout) : tuning.sglasso(layout);
    const solver::FitResult fit = solver::fit(problem, h);
    unconverged += !fit.converged;
    worst_kkt = std::max(worst_kkt, fit.kkt_residual);
    const double at_hat = solver::objective(fit.beta_hat, problem, h);
    for (int k = 0; k < 100; ++k) {
      const double scale = std::pow(10.0, -3.0 + 0.04 * k);
      const Vector other = k % 4 == 3 ? Vector(standard_normal(layout.p(), rng))
                                      : Vector(fit.beta_hat + scale * standard_normal(layout.p(), rng));
      beaten += solver::objective(other, problem, h) < at_hat;
    }
    max_n = std::max(max_n, n);
    max_p = std::max(max_p, layout.p());
  }
  return {unconverged == 0 && worst_kkt <= 1e-6 && beaten == 0,
          fmt("50 fits (n <= %ld, p <= %ld), unconverged %d, worst kkt %.2e (<= 1e-6), random points below "
              "objective %d of 5000",
              static_cast<long>(max_n), static_cast<long>(max_p), unconverged, worst_kkt, beaten)};
}

// A3 - A6 --------------------------------------------------------------------

struct StochasticSetup {
  GroupLayout layout{8, 6};
  SparsityBudget budget{2, 2, GroupLayout(8, 6)};
  Matrix X = randomdesign::orthonormal_design(96, 48, 0xA3);
  double sigma = 1.0;
};

Outcome tails(const StochasticSetup& in, stochastic::TailReport& report) {
  const auto start = std::chrono::steady_clock::now();
  stochastic::SuiteOptions o;
  o.trials = 2000;
  o.seed = 0xA3;
  report = stochastic::tail_suite(in.X, in.layout, in.budget, in.sigma, o);
  const double elapsed = seconds_since(start);
  return {report.psi1.within_upper() && report.psi2.within_upper() && elapsed < 120.0,
          fmt("theta_max %.6f, P(Psi1 >= t) %.4f, P(Psi2 >= t) %.4f vs %.4f + %.4f, %.1f s (< 120 s)",
              report.theta_max, report.psi1.rate, report.psi2.rate, report.psi1.reference, report.psi1.margin,
              elapsed)};
}

Outcome omega_event(const stochastic::TailReport& r) {
  return {r.omega.within_lower(),
          fmt("P(Omega) %.4f vs %.2f - %.4f over %lu draws", r.omega.rate, r.omega.reference, r.omega.margin,
              static_cast<unsigned long>(r.omega.trials))};
}

Outcome gauss_bound(const StochasticSetup& in, stochastic::GaussBoundReport& report) {
  stochastic::GaussOptions o;
  o.draws = 200;
  o.directions = 10'000;
  o.seed = 0xA5;
  report = stochastic::gauss_bound_suite(in.X, in.layout, penalty::make_weights(in.layout, 2, in.sigma), in.sigma, o);
  return {report.violations == 0 && report.omega_draws > 0,
          fmt("%lu Omega draws of %lu, max sampled/adversarial %.4f, max dual %.4f, violations %lu",
              static_cast<unsigned long>(report.omega_draws), static_cast<unsigned long>(report.draws),
              report.max_on_omega, report.max_dual_on_omega, static_cast<unsigned long>(report.violations))};
}

Outcome concentration(const stochastic::GaussBoundReport& r) {
  bool ok = r.concentration.size() == 2;
  std::string detail;
  for (const stochastic::ConcentrationResult& c : r.concentration) {
    ok = ok && c.violations.within_upper();
    detail += fmt("delta0 %.2f: %.5f vs %.3f + %.5f; ", c.delta0, c.violations.rate, c.violations.reference,
                  c.violations.margin);
  }
  return {ok, detail};
}

// A7, A8 gap -----------------------------------------------------------------

struct SweepSet {
  std::vector<experiment::ExperimentResult> base;  // (3, 2), one per estimator
  std::vector<experiment::ExperimentResult> others;
  double elapsed = 0.0;
};

SweepSet run_sweeps() {
  const auto start = std::chrono::steady_clock::now();
  SweepSet set;
  for (auto [s, s0] : std::vector<std::pair<Index, Index>>{{3, 2}, {2, 3}, {4, 1}}) {
    for (experiment::Estimator e : {experiment::Estimator::SgLasso, experiment::Estimator::SgSlope}) {
      experiment::ExperimentConfig c;
      c.m = 20;
      c.d = 5;
      c.s = s;
      c.s0 = s0;
      c.sigma = 0.1;
      c.replicates = 11;
      c.seed = 0xA7;
      c.estimator = e;
      (s == 3 ? set.base : set.others).push_back(experiment::run_sweep(c));
    }
  }
  set.elapsed = seconds_since(start);
  return set;
}

Outcome rate_reproduction(const SweepSet& set) {
  bool ok = set.elapsed < 600.0;
  std::string detail;
  for (std::size_t k = 0; k < set.base.size(); ++k) {
    const experiment::ExperimentResult& b = set.base[k];
    const double slope = b.slope.value_or(0.0);
    ok = ok && b.slope && std::abs(slope + 0.5) <= 0.1;
    detail += fmt("%s slope %.3f C %.2f", experiment::to_string(b.config.estimator).c_str(), slope, b.fitted_constant);
    for (std::size_t j = k; j < set.others.size(); j += set.base.size()) {
      const experiment::ExperimentResult& o = set.others[j];
      const double rel = o.fitted_constant / b.fitted_constant - 1.0;
      ok = ok && std::abs(rel) <= 0.3;
      detail += fmt(", (%ld,%ld) C %.2f (%+.0f%%)", static_cast<long>(o.config.s), static_cast<long>(o.config.s0),
                    o.fitted_constant, 100.0 * rel);
    }
    detail += "; ";
  }
  return {ok, detail + fmt("%.0f s (< 600 s)", set.elapsed)};
}

// A8 -------------------------------------------------------------------------

Outcome lower_bound_machinery(const SweepSet& sweeps) {
  lowerbound::PackingOptions o;
  o.seed = 0xA8;
  const lowerbound::PackingSet packing = lowerbound::build_packing(8, 8, 2, 2, o);
  bool ok = packing.vectors.size() >= 36 && packing.min_hamming >= 1;
  std::string detail = fmt("packing %zu vectors (target %.3f), min Hamming %ld; ", packing.vectors.size(),
                           packing.target, static_cast<long>(packing.min_hamming));
  int signed_ok = 0;
  for (std::uint64_t k = 0; k < 5; ++k) {
    randomdesign::DesignEnsemble e;
    e.n = 100;
    e.layout = GroupLayout(8, 8);
    e.seed = 0xA800 + k;
    const lowerbound::PackingSet s = lowerbound::sign_packing(packing, randomdesign::generate(e));
    signed_ok += s.design_bound_holds() && s.min_hamming >= 1;
  }
  ok = ok && signed_ok == 5;
  detail += fmt("signed bound holds on %d of 5 designs; ", signed_ok);
  double min_ratio = std::numeric_limits<double>::infinity();
  std::size_t rows = 0;
  for (const auto* group : {&sweeps.base, &sweeps.others}) {
    for (const experiment::ExperimentResult& r : *group) {
      ok = ok && r.gap.ratios_at_least_one();
      min_ratio = std::min(min_ratio, r.gap.min_ratio);
      rows += r.gap.rows.size();
    }
  }
  return {ok, detail + fmt("gap ratios over %zu sweep points, min %.3g (>= 1)", rows, min_ratio)};
}

// A9 -------------------------------------------------------------------------

Outcome invariant_suites() {
  constexpr int kCases = 10'000;
  std::uint64_t psi = 0, upsilon_order = 0, envelope = 0, axioms = 0, weights = 0;

  for (int trial = 0; trial < kCases; ++trial) {
    Rng rng = make_stream(0xA9, static_cast<std::uint64_t>(trial));
    std::uniform_int_distribution<Index> dim(1, 6);
    const Index d = dim(rng), m = dim(rng);
    const Index s0 = std::uniform_int_distribution<Index>(1, d)(rng);
    const double sigma = std::uniform_real_distribution<double>(0.2, 3.0)(rng);
    Matrix phi(d, m);
    for (Index j = 0; j < m; ++j) phi.col(j) = standard_normal(d, rng);
    if (trial % 4 == 0) phi = phi.array().round();
    const stochastic::NoiseFunctionals f = stochastic::noise_functionals(phi, s0, sigma);
    for (Index s = 1; s <= m; ++s) {
      const auto i = s - 1;
      const double tol = 1e-12 * (1.0 + f.psi1[i]);
      psi += f.psi2[i] > f.psi1[i] + tol;
      if (s > 1) upsilon_order += f.upsilon[i] > f.upsilon[i - 1] || f.upsilon_small[i] > f.upsilon_small[i - 1];
      envelope += f.upsilon[i] * f.upsilon[i] > s0 * sigma * sigma * f.psi2[i] * (1 + 1e-12) + 1e-300;
      envelope += f.upsilon_small[i] * f.upsilon_small[i] > sigma * sigma * f.psi1[i] * (1 + 1e-12) + 1e-300;
    }

    const GroupLayout layout(m, d);
    const penalty::WeightSequences w = penalty::make_weights(layout, s0, sigma);
    const Vector u = standard_normal(layout.p(), rng), v = standard_normal(layout.p(), rng);
    const double a = standard_normal(1, rng)[0];
    auto norm = [&](const Vector& x) { return penalty::norm_combined_star(x, w, layout); };
    const double nu = norm(u);
    axioms += norm(u + v) > nu + norm(v) + 1e-12 * (nu + norm(v));
    axioms += std::abs(norm(a * u) - std::abs(a) * nu) > 1e-12 * std::abs(a) * nu;
    axioms += !(nu > 0.0) || norm(Vector::Zero(layout.p())) != 0.0;
    axioms += std::abs(norm(-u) - nu) > 1e-12 * nu;

    const Vector& ge = w.group();
    const Vector& el = w.element();
    for (Index j = 1; j < m; ++j) weights += ge[j] > ge[j - 1];
    for (Index i = 0; i < layout.p(); ++i) weights += el[i] != ge[std::min(i / s0, m - 1)];
    for (Index s = 1; s <= m; ++s) {
      const double lhs = el.head(s * s0).squaredNorm();
      const double rhs = static_cast<double>(s0) * ge.head(s).squaredNorm();
      weights += std::abs(lhs - rhs) > 1e-12 * rhs;
    }
  }

  std::uint64_t cone = 0;
  const GroupLayout layout(6, 4);
  const SparsityBudget budget(2, 2, layout);
  for (double c0 : {0.1, 1.0, 2.0}) {
    const conditions::InclusionReport r =
        conditions::cone_inclusion_check(layout, budget, c0, penalty::make_weights(layout, 2, 1.0), kCases, 0xA9);
    cone += r.violations();
  }
  const std::uint64_t total = psi + upsilon_order + envelope + axioms + weights + cone;
  return {total == 0, fmt("%d cases per suite; violations: Psi2<=Psi1 %lu, upsilon order %lu, envelope %lu, norm "
                          "axioms %lu, weight identities %lu, cone inclusions %lu (3 x %d)",
                          kCases, static_cast<unsigned long>(psi), static_cast<unsigned long>(upsilon_order),
                          static_cast<unsigned long>(envelope), static_cast<unsigned long>(axioms),
                          static_cast<unsigned long>(weights), static_cast<unsigned long>(cone), kCases)};
}

// A10 ------------------------------------------------------------------------

Outcome random_design_phases() {
  const GroupLayout layout(6, 4);
  const SparsityBudget budget(2, 2, layout);
  const std::vector<Index> grid{4, 8, 16, 33, 66, 100, 165};
  struct Kind {
    randomdesign::EnsembleKind kind;
    double alpha;
    const char* name;
  };
  const std::vector<Kind> kinds{{randomdesign::EnsembleKind::Gaussian, 0.5, "gaussian"},
                                {randomdesign::EnsembleKind::Rademacher, 0.5, "rademacher"},
                                {randomdesign::EnsembleKind::WeakMoment, 0.5, "weak-moment a=0.5"},
                                {randomdesign::EnsembleKind::WeakMoment, 1.0, "weak-moment a=1"}};
  bool ok = true;
  std::string detail;
  for (const Kind& k : kinds) {
    randomdesign::DesignEnsemble e;
    e.kind = k.kind;
    e.layout = layout;
    e.alpha = k.alpha;
    detail += std::string(k.name) + ":";
    for (conditions::Condition c : {conditions::Condition::SGNorm, conditions::Condition::SSGRE}) {
      randomdesign::PhaseOptions o;
      o.condition = c;
      o.s = 2;
      o.s0 = 2;
      o.reps = 40;
      o.seed = 0xA10;
      const randomdesign::PhaseDiagram pd = randomdesign::phase_diagram(e, grid, o);
      const bool reached = pd.first_n_at_90 && static_cast<double>(*pd.first_n_at_90) <= 10.0 * pd.rate_quantity;
      ok = ok && pd.monotone && reached;
      detail += fmt(" %s %s n90=%ld", conditions::to_string(c).c_str(), pd.monotone ? "monotone" : "NOT-monotone",
                    pd.first_n_at_90 ? static_cast<long>(*pd.first_n_at_90) : -1L);
    }
    detail += "; ";
  }

  randomdesign::DesignEnsemble e;
  e.n = 200;
  e.layout = layout;
  e.seed = 0xA10;
  Matrix X = randomdesign::generate(e);
  X /= conditions::check_sgnorm(X, layout, 2).value;
  Rng rng = make_stream(0xA10, 1);
  int maurey_ok = 0;
  for (int k = 0; k < 20; ++k) {
    const IndexSet set = sample_family({Family::S2, budget}, layout, rng);
    Vector beta = Vector::Zero(layout.p());
    for (Index i : set.elements) beta[i] = standard_normal(1, rng)[0];
    maurey_ok += randomdesign::maurey_check(X, beta, budget, layout, 10'000, 1.0, 0xA100 + k).passes();
  }
  ok = ok && maurey_ok == 20;
  return {ok, detail + fmt("10R = %.1f; Maurey holds within 3 SE on %d of 20", 10.0 * randomdesign::rate_quantity(6, 4, 2, 2),
                           maurey_ok)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("A%d %s %s: %s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("threw: ") + e.what()};
    }
  };

  report(1, "prox oracle equivalence", guarded(prox_oracle));
  report(2, "solver kkt and optimality", guarded(solver_kkt));

  const StochasticSetup setup;
  stochastic::TailReport tail;
  stochastic::GaussBoundReport gauss;
  const Outcome a3 = guarded([&] { return tails(setup, tail); });
  report(3, "noise functional tails", a3);
  report(4, "event Omega probability", a3.detail.rfind("threw", 0) == 0 ? a3 : omega_event(tail));
  const Outcome a5 = guarded([&] { return gauss_bound(setup, gauss); });
  report(5, "uniform Gaussian process bound on Omega", a5);
  report(6, "concentration inequality", a5.detail.rfind("threw", 0) == 0 ? a5 : concentration(gauss));

  SweepSet sweeps;
  const Outcome a7 = guarded([&] {
    sweeps = run_sweeps();
    return rate_reproduction(sweeps);
  });
  report(7, "rate reproduction", a7);
  report(8, "lower bound machinery", guarded([&] { return lower_bound_machinery(sweeps); }));
  report(9, "invariant suites", guarded(invariant_suites));
  report(10, "random design phases", guarded(random_design_phases));

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
