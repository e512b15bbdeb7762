#include "dsparse/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "dsparse/conditions.hpp"

namespace dsparse::stochastic {

namespace {

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) fail(ErrorCode::InvalidArgument, "sigma must be positive");
}

void check_budget(const Matrix& phi, Index s, Index s0) {
  if (s < 1 || s > phi.cols() || s0 < 1 || s0 > phi.rows()) {
    fail(ErrorCode::BudgetInvalid, "need 1 <= s <= m and 1 <= s0 <= d");
  }
}

// Squared entries of each column, sorted non-increasing.
Matrix sorted_squares(const Matrix& phi) {
  Matrix out = phi.cwiseAbs2();
  for (Index j = 0; j < out.cols(); ++j) std::sort(out.col(j).begin(), out.col(j).end(), std::greater<double>());
  return out;
}

double union_top(const Matrix& squares, std::span<const Index> columns, Index k) {
  std::vector<double> pool;
  pool.reserve(columns.size() * static_cast<std::size_t>(squares.rows()));
  for (Index j : columns) pool.insert(pool.end(), squares.col(j).begin(), squares.col(j).end());
  const auto cut = pool.begin() + std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(pool.size()));
  std::nth_element(pool.begin(), cut, pool.end(), std::greater<double>());
  double total = 0.0;
  for (auto it = pool.begin(); it != cut; ++it) total += *it;
  return total;
}

Vector aligned(const Vector& phi, const std::function<double(double)>& shape) {
  Vector u(phi.size());
  for (Index i = 0; i < phi.size(); ++i) u[i] = phi[i] == 0.0 ? 0.0 : std::copysign(shape(std::abs(phi[i])), phi[i]);
  return u;
}

// Directions that match the ordering of u to the ordering of phi, in the
// spirit of splitting each column into its top-s0 part and the rest.
std::vector<Vector> adversarial_directions(const Vector& phi, const GroupLayout& layout, Index s0) {
  std::vector<Vector> out;
  out.push_back(phi);
  for (double q : {0.0, 0.5, 2.0, 3.0}) out.push_back(aligned(phi, [q](double a) { return std::pow(a, q); }));
  const SortedMagnitudes entries = sort_elementwise(phi);
  for (Index k = 1; k <= phi.size(); ++k) {
    Vector ones = Vector::Zero(phi.size());
    Vector values = Vector::Zero(phi.size());
    for (Index r = 0; r < k; ++r) {
      const Index i = entries.order[static_cast<std::size_t>(r)];
      ones[i] = phi[i] >= 0 ? 1.0 : -1.0;
      values[i] = phi[i];
    }
    out.push_back(ones);
    out.push_back(values);
  }
  // Top-s0 part of each column, restricted to the k best columns.
  const Index d = layout.d();
  Vector head = Vector::Zero(phi.size());
  for (Index g = 0; g < layout.m(); ++g) {
    const SortedMagnitudes col = sort_elementwise(phi.segment(g * d, d));
    for (Index r = 0; r < s0; ++r) {
      const Index i = g * d + col.order[static_cast<std::size_t>(r)];
      head[i] = phi[i];
    }
  }
  out.push_back(phi - head);
  const SortedMagnitudes groups = sort_groups(GroupedVector(head, layout));
  for (Index k = 1; k <= layout.m(); ++k) {
    Vector part = Vector::Zero(phi.size());
    for (Index r = 0; r < k; ++r) {
      const Index g = groups.order[static_cast<std::size_t>(r)];
      part.segment(g * d, d) = head.segment(g * d, d);
    }
    out.push_back(part);
    out.push_back(part.cwiseSign());
    out.push_back(part + 0.5 * (phi - head));
  }
  return out;
}

// Random direction: dense, double-sparse, group-sparse, single entry, heavy tailed or signs.
Vector random_direction(const GroupLayout& layout, Index s0, Rng& rng) {
  std::uniform_int_distribution<int> kind(0, 5);
  const Index p = layout.p();
  Vector u = standard_normal(p, rng);
  switch (kind(rng)) {
    case 0:
      break;
    case 1: {
      const Index s = std::uniform_int_distribution<Index>(1, layout.m())(rng);
      const IndexSet set = sample_family({Family::S2, SparsityBudget(s, s0, layout)}, layout, rng);
      Vector v = Vector::Zero(p);
      for (Index i : set.elements) v[i] = u[i];
      u = v;
      break;
    }
    case 2: {
      const Index g = std::uniform_int_distribution<Index>(0, layout.m() - 1)(rng);
      Vector v = Vector::Zero(p);
      v.segment(g * layout.d(), layout.d()) = u.segment(g * layout.d(), layout.d());
      u = v;
      break;
    }
    case 3: {
      const Index i = std::uniform_int_distribution<Index>(0, p - 1)(rng);
      Vector v = Vector::Zero(p);
      v[i] = u[i];
      u = v;
      break;
    }
    case 4:
      u = u.array().cube();
      break;
    default:
      u = u.cwiseSign();
  }
  if (u.norm() == 0.0) u[0] = 1.0;
  return u;
}

double theta_max_exact(const Matrix& X, const GroupLayout& layout, Index s0) {
  return conditions::check_sgnorm(X, layout, s0).value;
}

}  // namespace

Matrix compute_phi(const Matrix& X, const Vector& xi, const GroupLayout& layout) {
  if (X.rows() != xi.size()) fail(ErrorCode::DimensionMismatch, "xi length differs from the rows of X");
  if (X.cols() != layout.p()) fail(ErrorCode::DimensionMismatch, "X columns do not match the layout");
  const Vector phi = X.transpose() * xi / std::sqrt(static_cast<double>(X.rows()));
  return layout.matrix_view(phi);
}

double psi2(const Matrix& phi, Index s, Index s0, double sigma) {
  check_sigma(sigma);
  check_budget(phi, s, s0);
  const Matrix squares = sorted_squares(phi);
  Vector scores = squares.topRows(s0).colwise().sum().transpose();
  std::sort(scores.begin(), scores.end(), std::greater<double>());
  return scores.head(s).sum() / (static_cast<double>(s * s0) * sigma * sigma);
}

double psi1(const Matrix& phi, Index s, Index s0, double sigma, Psi1Mode mode, std::uint64_t cap) {
  check_sigma(sigma);
  check_budget(phi, s, s0);
  const Matrix squares = sorted_squares(phi);
  const Index m = phi.cols();
  const Index k = s * s0;
  double best = 0.0;
  if (mode == Psi1Mode::Exact) {
    const std::uint64_t count = binomial_u64(m, s);
    if (count > cap) fail(ErrorCode::CapExceeded, "Psi_1 needs " + std::to_string(count) + " column sets");
    for_each_combination(m, s, [&](std::span<const Index> columns) { best = std::max(best, union_top(squares, columns, k)); });
  } else {
    std::vector<Index> chosen;
    std::vector<bool> used(static_cast<std::size_t>(m), false);
    for (Index step = 0; step < s; ++step) {
      double step_best = -1.0;
      Index pick = 0;
      for (Index j = 0; j < m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        chosen.push_back(j);
        const double value = union_top(squares, chosen, k);
        chosen.pop_back();
        if (value > step_best) {
          step_best = value;
          pick = j;
        }
      }
      used[static_cast<std::size_t>(pick)] = true;
      chosen.push_back(pick);
      best = step_best;
    }
    // The best columns by top-s0 score already reach Psi_2.
    Vector scores = squares.topRows(s0).colwise().sum().transpose();
    std::vector<Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });
    order.resize(static_cast<std::size_t>(s));
    best = std::max(best, union_top(squares, order, k));
  }
  return best / (static_cast<double>(k) * sigma * sigma);
}

Upsilons upsilons(const Matrix& phi, Index s0) {
  check_budget(phi, 1, s0);
  const Index m = phi.cols();
  const Matrix magnitudes = phi.cwiseAbs();
  Upsilons out{Vector(m), Vector(m)};

  Vector heads = sorted_squares(phi).topRows(s0).colwise().sum().transpose().cwiseSqrt();
  std::sort(heads.begin(), heads.end(), std::greater<double>());
  out.group = heads;

  std::vector<double> candidates(magnitudes.data(), magnitudes.data() + magnitudes.size());
  std::sort(candidates.begin(), candidates.end(), std::greater<double>());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::vector<Index> counts(static_cast<std::size_t>(m));
  // s columns can supply s*s0 entries of magnitude >= tau.
  auto feasible = [&](double tau, Index s) {
    for (Index j = 0; j < m; ++j) counts[static_cast<std::size_t>(j)] = (magnitudes.col(j).array() >= tau).count();
    std::sort(counts.begin(), counts.end(), std::greater<Index>());
    Index total = 0;
    for (Index j = 0; j < s; ++j) total += counts[static_cast<std::size_t>(j)];
    return total >= s * s0;
  };
  for (Index s = 1; s <= m; ++s) {
    // candidates are decreasing; find the first feasible one.
    std::size_t lo = 0;
    std::size_t hi = candidates.size() - 1;  // the smallest magnitude is always feasible
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (feasible(candidates[mid], s)) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    out.element[s - 1] = candidates[lo];
  }
  return out;
}

NoiseFunctionals noise_functionals(const Matrix& phi, Index s0, double sigma, Psi1Mode mode, std::uint64_t cap) {
  const Index m = phi.cols();
  NoiseFunctionals out{phi, Vector(m), Vector(m), Vector(), Vector()};
  for (Index s = 1; s <= m; ++s) {
    out.psi1[s - 1] = psi1(phi, s, s0, sigma, mode, cap);
    out.psi2[s - 1] = psi2(phi, s, s0, sigma);
  }
  Upsilons u = upsilons(phi, s0);
  out.upsilon = std::move(u.group);
  out.upsilon_small = std::move(u.element);
  return out;
}

bool event_omega(const Matrix& phi, const penalty::WeightSequences& weights) {
  if (weights.group().size() != phi.cols()) fail(ErrorCode::DimensionMismatch, "weights do not match Phi");
  const Upsilons u = upsilons(phi, weights.s0());
  const double root_s0 = std::sqrt(static_cast<double>(weights.s0()));
  for (Index j = 0; j < phi.cols(); ++j) {
    if (u.group[j] > 4.0 * root_s0 * weights.group()[j]) return false;
    if (u.element[j] > 4.0 * weights.group()[j]) return false;
  }
  return true;
}

double tail_threshold(const SparsityBudget& budget, const GroupLayout& layout, double constant) {
  const double s = static_cast<double>(budget.s());
  const double s0 = static_cast<double>(budget.s0());
  const double e = std::numbers::e;
  return constant * (std::log(2.0 * e * static_cast<double>(layout.d()) / s0) +
                     (2.0 / s0) * std::log(4.0 * e * static_cast<double>(layout.m()) / s));
}

BinomialEstimate BinomialEstimate::make(std::uint64_t count, std::uint64_t trials, double reference) {
  if (trials == 0) fail(ErrorCode::InvalidArgument, "binomial estimate needs trials > 0");
  BinomialEstimate b;
  b.count = count;
  b.trials = trials;
  b.reference = reference;
  const double N = static_cast<double>(trials);
  const double z2 = kZ99 * kZ99;
  b.rate = static_cast<double>(count) / N;
  const double center = (b.rate + z2 / (2 * N)) / (1 + z2 / N);
  const double half = kZ99 * std::sqrt(b.rate * (1 - b.rate) / N + z2 / (4 * N * N)) / (1 + z2 / N);
  b.lower = std::max(0.0, center - half);
  b.upper = std::min(1.0, center + half);
  b.margin = kZ99 * std::sqrt(reference * (1 - reference) / N);
  return b;
}

nlohmann::json BinomialEstimate::to_json() const {
  return {{"count", count}, {"trials", trials}, {"rate", rate},     {"wilson99_lower", lower},
          {"wilson99_upper", upper}, {"reference", reference}, {"margin99", margin}};
}

nlohmann::json TailReport::to_json() const {
  return {{"theta_max", theta_max},          {"threshold", threshold},   {"threshold_tight", threshold_tight},
          {"psi1", psi1.to_json()},          {"psi2", psi2.to_json()},   {"psi1_tight", psi1_tight.to_json()},
          {"psi2_tight", psi2_tight.to_json()}, {"omega", omega.to_json()}};
}

TailReport tail_suite(const Matrix& X, const GroupLayout& layout, const SparsityBudget& budget, double sigma,
                      const SuiteOptions& options) {
  check_sigma(sigma);
  if (options.trials == 0) fail(ErrorCode::InvalidArgument, "tail suite needs trials > 0");
  TailReport report;
  report.theta_max = theta_max_exact(X, layout, budget.s0());
  if (report.theta_max > 1.0 + 1e-9) {
    fail(ErrorCode::ConditionViolated, "sparse group normalization fails: theta_max = " + std::to_string(report.theta_max));
  }
  report.threshold = tail_threshold(budget, layout);
  report.threshold_tight = tail_threshold(budget, layout, 8.0 / 3.0);
  const penalty::WeightSequences weights = penalty::make_weights(layout, budget.s0(), sigma);
  report.rows.resize(options.trials);
  parallel_for(options.trials, options.jobs, [&](std::size_t t) {
    Rng rng = make_stream(options.seed, t);
    const Vector xi = sigma * standard_normal(X.rows(), rng);
    const Matrix phi = compute_phi(X, xi, layout);
    report.rows[t] = {t, psi1(phi, budget.s(), budget.s0(), sigma, options.mode),
                      psi2(phi, budget.s(), budget.s0(), sigma), event_omega(phi, weights)};
  });
  std::uint64_t c1 = 0, c2 = 0, t1 = 0, t2 = 0, om = 0;
  for (const TailRow& r : report.rows) {
    c1 += r.psi1 >= report.threshold;
    c2 += r.psi2 >= report.threshold;
    t1 += r.psi1 >= report.threshold_tight;
    t2 += r.psi2 >= report.threshold_tight;
    om += r.omega;
  }
  const double target = static_cast<double>(budget.s()) / (4.0 * static_cast<double>(layout.m()));
  report.psi1 = BinomialEstimate::make(c1, options.trials, target);
  report.psi2 = BinomialEstimate::make(c2, options.trials, target);
  report.psi1_tight = BinomialEstimate::make(t1, options.trials, target);
  report.psi2_tight = BinomialEstimate::make(t2, options.trials, target);
  report.omega = BinomialEstimate::make(om, options.trials, 0.5);
  return report;
}

std::pair<double, Vector> dual_combined_norm(const Vector& phi, const penalty::WeightSequences& weights,
                                             const GroupLayout& layout) {
  layout.check(phi, "phi");
  const Vector ew = weights.element();
  const Vector gw = std::sqrt(static_cast<double>(weights.s0())) * weights.group();
  const double scale = phi.norm();
  if (scale == 0.0) return {0.0, Vector::Zero(phi.size())};
  const double floor_weight = ew[ew.size() - 1];
  if (!(floor_weight > 0.0)) return {std::numeric_limits<double>::infinity(), phi};
  penalty::ProxOptions options;
  options.tol = 1e-12;
  penalty::CombinedProxState state;
  auto residual = [&](double t) { return penalty::prox_combined(phi, t * ew, t * gw, layout, options, &state).point; };
  // phi^T u <= ||phi||_inf ||u||_1 <= ||phi||_inf ||u||_* / min weight.
  double lo = 0.0;
  double hi = phi.cwiseAbs().maxCoeff() / floor_weight;
  Vector direction = phi;
  for (int it = 0; it < 60 && hi - lo > 1e-10 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Vector r = residual(mid);
    if (r.norm() <= 1e-9 * scale) {
      hi = mid;
    } else {
      lo = mid;
      direction = r;
    }
  }
  return {hi, direction};
}

nlohmann::json GaussBoundReport::to_json() const {
  nlohmann::json conc = nlohmann::json::array();
  for (const ConcentrationResult& c : concentration) {
    conc.push_back({{"delta0", c.delta0}, {"violations", c.violations.to_json()}});
  }
  return {{"draws", draws},
          {"omega_draws", omega_draws},
          {"max_on_omega", max_on_omega},
          {"max_dual_on_omega", max_dual_on_omega},
          {"violations", violations},
          {"concentration", conc}};
}

GaussBoundReport gauss_bound_suite(const Matrix& X, const GroupLayout& layout, const penalty::WeightSequences& weights,
                                   double sigma, const GaussOptions& options) {
  check_sigma(sigma);
  if (X.cols() != layout.p()) fail(ErrorCode::DimensionMismatch, "X columns do not match the layout");
  if (options.draws == 0) fail(ErrorCode::InvalidArgument, "gauss suite needs draws > 0");
  for (double d0 : options.delta0) {
    if (!(d0 > 0.0 && d0 < 1.0)) fail(ErrorCode::InvalidArgument, "delta0 must lie in (0, 1)");
  }
  const double n = static_cast<double>(X.rows());
  const Index p = layout.p();
  const Index s0 = weights.s0();

  // Shared random directions scaled to N(u) = 1, with their ||X u||_n.
  Matrix U(p, static_cast<Index>(options.directions));
  for (std::uint64_t k = 0; k < options.directions; ++k) {
    Rng rng = make_stream(options.seed, 0x6a000000 + k);
    const Vector u = random_direction(layout, s0, rng);
    U.col(static_cast<Index>(k)) = u / penalty::envelope_N(u, weights, layout, n);
  }
  const Vector xu_norm = (X * U).colwise().norm().transpose() / std::sqrt(n);

  struct DrawResult {
    GaussRow row;
    std::vector<bool> violated;
  };
  std::vector<DrawResult> results(options.draws);
  parallel_for(options.draws, options.jobs, [&](std::size_t t) {
    Rng rng = make_stream(options.seed, t);
    const Vector xi = sigma * standard_normal(X.rows(), rng);
    const Vector phi = X.transpose() * xi / std::sqrt(n);
    DrawResult& out = results[t];
    out.row.draw = t;
    out.row.omega = event_omega(layout.matrix_view(phi), weights);
    out.violated.assign(options.delta0.size(), false);

    // (1/n) xi^T X u = phi^T u / sqrt(n).
    auto check_concentration = [&](double value, double envelope, double design_norm) {
      for (std::size_t k = 0; k < options.delta0.size(); ++k) {
        const double rhs = (4.0 + std::numbers::sqrt2) *
                           std::max(envelope, design_norm * sigma * std::sqrt(std::log(1.0 / options.delta0[k]) / n));
        if (value > rhs) out.violated[k] = true;
      }
    };
    const Vector sampled = U.transpose() * phi / std::sqrt(n);
    out.row.sampled = sampled.maxCoeff();
    for (Index k = 0; k < sampled.size(); ++k) check_concentration(sampled[k], 1.0, xu_norm[k]);

    auto [dual, direction] = dual_combined_norm(phi, weights, layout);
    out.row.dual = dual;
    std::vector<Vector> adversarial = adversarial_directions(phi, layout, s0);
    adversarial.push_back(direction);
    out.row.adversarial = -std::numeric_limits<double>::infinity();
    for (const Vector& u : adversarial) {
      const double envelope = penalty::envelope_N(u, weights, layout, n);
      if (envelope == 0.0) continue;
      const double value = phi.dot(u) / std::sqrt(n) / envelope;
      out.row.adversarial = std::max(out.row.adversarial, value);
      check_concentration(value, 1.0, (X * u).norm() / std::sqrt(n) / envelope);
    }
  });

  GaussBoundReport report;
  report.draws = options.draws;
  std::vector<std::uint64_t> counts(options.delta0.size(), 0);
  for (const DrawResult& r : results) {
    report.rows.push_back(r.row);
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += r.violated[k];
    if (!r.row.omega) continue;
    ++report.omega_draws;
    const double value = std::max(r.row.sampled, r.row.adversarial);
    report.max_on_omega = std::max(report.max_on_omega, value);
    report.max_dual_on_omega = std::max(report.max_dual_on_omega, r.row.dual);
    report.violations += value > 4.0;
  }
  for (std::size_t k = 0; k < counts.size(); ++k) {
    report.concentration.push_back(
        {options.delta0[k], BinomialEstimate::make(counts[k], options.draws, options.delta0[k] / 2.0)});
  }
  return report;
}

}  // namespace dsparse::stochastic
