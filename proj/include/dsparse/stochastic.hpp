#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "dsparse/core.hpp"
#include "dsparse/penalty.hpp"

namespace dsparse::stochastic {

/// Phi = X^T xi / sqrt(n) as a d x m matrix (column j = group j).
Matrix compute_phi(const Matrix& X, const Vector& xi, const GroupLayout& layout);

/// Psi_2(s): s largest column scores (sum of the top-s0 squared entries),
/// summed and divided by s s0 sigma^2.
double psi2(const Matrix& phi, Index s, Index s0, double sigma);

enum class Psi1Mode { Exact, Greedy };

/// Psi_1(s): best s columns by the sum of the top s*s0 squared entries of
/// their union, divided by s s0 sigma^2. Exact enumerates C(m, s) column sets
/// (CapExceeded above cap); Greedy returns a lower bound.
double psi1(const Matrix& phi, Index s, Index s0, double sigma, Psi1Mode mode = Psi1Mode::Exact,
            std::uint64_t cap = kDefaultEnumerationCap);

struct Upsilons {
  Vector group;    ///< Upsilon_s, s = 1..m: s-th largest top-s0 column norm
  Vector element;  ///< upsilon_s: largest possible (s s0)-th magnitude over S1(s, s0)
};

/// Both sequences for every s in [m]; upsilon_s by bisection over the
/// entry magnitudes with a counting feasibility test.
Upsilons upsilons(const Matrix& phi, Index s0);

struct NoiseFunctionals {
  Matrix phi;
  Vector psi1;  ///< index s - 1
  Vector psi2;
  Vector upsilon;
  Vector upsilon_small;
};

NoiseFunctionals noise_functionals(const Matrix& phi, Index s0, double sigma, Psi1Mode mode = Psi1Mode::Exact,
                                   std::uint64_t cap = kDefaultEnumerationCap);

/// Upsilon_j <= 4 sqrt(s0) lambda_j and upsilon_j <= 4 lambda_j for all j.
bool event_omega(const Matrix& phi, const penalty::WeightSequences& weights);

/// c * (log(2ed/s0) + (2/s0) log(4em/s)); c = 16/3 for the stated tail bound.
double tail_threshold(const SparsityBudget& budget, const GroupLayout& layout, double constant = 16.0 / 3.0);

inline constexpr double kZ99 = 2.5758293035489004;

/// Count of successes with a 99% Wilson interval; margin is the normal
/// half-width z sqrt(q (1 - q) / N) around a reference probability q.
struct BinomialEstimate {
  std::uint64_t count = 0;
  std::uint64_t trials = 0;
  double rate = 0.0;
  double lower = 0.0;
  double upper = 1.0;
  double reference = 0.0;
  double margin = 0.0;

  static BinomialEstimate make(std::uint64_t count, std::uint64_t trials, double reference);
  /// rate <= reference + margin
  bool within_upper() const { return rate <= reference + margin; }
  /// rate >= reference - margin
  bool within_lower() const { return rate >= reference - margin; }
  nlohmann::json to_json() const;
};

struct TailRow {
  std::uint64_t trial = 0;
  double psi1 = 0.0;
  double psi2 = 0.0;
  bool omega = false;
};

struct TailReport {
  double theta_max = 0.0;
  double threshold = 0.0;        ///< 16/3 constant
  double threshold_tight = 0.0;  ///< 8/3 constant, informational
  BinomialEstimate psi1;         ///< P(Psi_1 >= threshold) against s/(4m)
  BinomialEstimate psi2;
  BinomialEstimate psi1_tight;
  BinomialEstimate psi2_tight;
  BinomialEstimate omega;  ///< P(Omega) against 1/2
  std::vector<TailRow> rows;

  nlohmann::json to_json() const;
};

struct SuiteOptions {
  std::uint64_t trials = 2000;
  std::uint64_t seed = 0;
  int jobs = 1;
  Psi1Mode mode = Psi1Mode::Exact;
};

/// Draws xi ~ N(0, sigma^2 I) and records Psi_1(s), Psi_2(s) and Omega.
/// Throws ConditionViolated when theta_max > 1 + 1e-9, InvalidArgument when trials == 0.
TailReport tail_suite(const Matrix& X, const GroupLayout& layout, const SparsityBudget& budget, double sigma,
                      const SuiteOptions& options = {});

struct GaussRow {
  std::uint64_t draw = 0;
  bool omega = false;
  double sampled = 0.0;      ///< max of (1/n) xi^T X u over random u with N(u) = 1
  double adversarial = 0.0;  ///< same over aligned directions
  double dual = 0.0;         ///< sup over N(u) <= 1 by bisection on the prox
};

struct ConcentrationResult {
  double delta0 = 0.0;
  BinomialEstimate violations;  ///< against delta0 / 2
};

struct GaussBoundReport {
  std::uint64_t draws = 0;
  std::uint64_t omega_draws = 0;
  double max_on_omega = 0.0;      ///< sampled and adversarial, Omega draws only
  double max_dual_on_omega = 0.0;
  std::uint64_t violations = 0;   ///< Omega draws with a value above 4
  std::vector<ConcentrationResult> concentration;
  std::vector<GaussRow> rows;

  nlohmann::json to_json() const;
};

struct GaussOptions {
  std::uint64_t draws = 200;
  std::uint64_t directions = 10'000;
  std::vector<double> delta0 = {0.05, 0.2};
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// The uniform Gaussian-process bound and its concentration form at each delta0.
GaussBoundReport gauss_bound_suite(const Matrix& X, const GroupLayout& layout, const penalty::WeightSequences& weights,
                                   double sigma, const GaussOptions& options = {});

/// sup { phi^T u : ||u||_* <= 1 }, the dual of the combined norm, by
/// bisection on t for prox_{t ||.||_*}(phi) = 0. Also returns an almost
/// maximising direction.
std::pair<double, Vector> dual_combined_norm(const Vector& phi, const penalty::WeightSequences& weights,
                                             const GroupLayout& layout);

}  // namespace dsparse::stochastic
