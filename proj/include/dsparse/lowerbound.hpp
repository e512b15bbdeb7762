#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsparse/core.hpp"

namespace dsparse::lowerbound {

/// Double-sparse code: every vector has exactly s nonzero groups with exactly
/// s0 nonzero entries each, all in {-1, 1}.
struct PackingSet {
  GroupLayout layout;
  SparsityBudget budget;
  std::vector<Vector> vectors;
  Index radius = 0;       ///< required pairwise Hamming distance, ceil(s s0 / 4)
  Index min_hamming = 0;  ///< verified over all pairs; 0 for fewer than two vectors
  double target = 0.0;    ///< exp((s log(em/s) + s s0 log(ed/s0)) / 4)
  std::string method;     ///< "exhaustive" or "random"
  std::uint64_t candidates = 0;
  bool is_signed = false;
  /// Signed sets only: theta_max used and max over vectors of ||X b||_n^2.
  double theta_max = 0.0;
  double max_design_norm2 = 0.0;

  bool meets_target() const { return static_cast<double>(vectors.size()) >= target; }
  /// ||X b||_n^2 <= theta_max^2 s s0 for every vector.
  bool design_bound_holds() const;

  /// Vectors as sparse triplets [group, offset, sign].
  nlohmann::json to_json() const;
  static PackingSet from_json(const nlohmann::json& j);
};

double packing_target(const GroupLayout& layout, const SparsityBudget& budget);
Index packing_radius(const SparsityBudget& budget);

/// Coordinates where the entries differ, sign included.
Index hamming(const Vector& a, const Vector& b);
Index min_pairwise_hamming(const std::vector<Vector>& vectors, int jobs = 1);

struct PackingOptions {
  std::uint64_t seed = 0;
  /// Supports are enumerated (in seeded random order) up to this many.
  std::uint64_t exhaustive_limit = 100'000;
  std::uint64_t max_candidates = 200'000;  ///< random mode
  std::size_t max_size = 2'000;            ///< stop once this many are kept
  int jobs = 1;
};

/// Greedy Gilbert-Varshamov construction over (s, s0)-exact supports with
/// {0, 1} entries. Throws BudgetInvalid.
PackingSet build_packing(Index m, Index d, Index s, Index s0, const PackingOptions& options = {});

/// Adds groups one at a time and keeps whichever sign of the new group gives
/// the smaller ||X b||_n. theta_max defaults to the exact sparse group
/// normalization constant of X.
PackingSet sign_packing(const PackingSet& packing, const Matrix& X, std::optional<double> theta_max = std::nullopt);

/// sigma^2 / (256 n theta_max^2) * (s log(em/s) + s s0 log(ed/s0)).
double lower_bound_value(Index n, double sigma, double theta_max, Index m, Index d, Index s, Index s0);

struct GapInput {
  Index n = 0;
  double sigma = 0.0;
  double theta_max = 1.0;
  Index m = 0, d = 0, s = 0, s0 = 0;
  double squared_error = 0.0;  ///< observed ||beta_hat - beta*||^2
};

struct GapRow {
  GapInput input;
  double lower_bound = 0.0;
  double ratio = 0.0;
};

struct GapReport {
  std::vector<GapRow> rows;
  std::vector<std::string> notices;  ///< skipped inputs
  double min_ratio = 0.0;
  /// Least-squares slope of log ratio on log n; nullopt with fewer than two n.
  std::optional<double> slope;

  bool ratios_at_least_one() const { return !rows.empty() && min_ratio >= 1.0; }
  nlohmann::json to_json() const;
};

GapReport gap_report(const std::vector<GapInput>& inputs);

}  // namespace dsparse::lowerbound
