#pragma once

#include <nlohmann/json.hpp>

#include "dsparse/core.hpp"

namespace dsparse::penalty {

double norm_l1(const Vector& u);

/// Sum of group l2 norms.
double norm_l12(const Vector& u, const GroupLayout& layout);

/// Sorted l1 norm: sum_i w_i |u|_(i) with |u|_(1) >= |u|_(2) >= ...
/// Weights must be non-negative and non-increasing (WeightOrder otherwise).
double norm_sorted_l1(const Vector& u, const Vector& weights);

/// Sum_j w_j times the j-th largest group norm.
double norm_group_sorted(const Vector& u, const Vector& group_weights, const GroupLayout& layout);

/// Dual norms of the two sorted norms. Infinite when a zero weight would
/// have to absorb a non-zero entry.
double dual_norm_sorted_l1(const Vector& z, const Vector& weights);
double dual_norm_group_sorted(const Vector& z, const Vector& group_weights, const GroupLayout& layout);

/// Throws WeightOrder unless w is non-negative and non-increasing.
void check_weight_order(const Vector& w, const char* what);

/// Group weights lambda_1..lambda_m and their element-level extension
/// (lambda_tilde_i = lambda_ceil(i/s0) for i <= s0*m, lambda_m after).
class WeightSequences {
 public:
  /// Extends validated group weights to length p.
  WeightSequences(Vector group, const GroupLayout& layout, Index s0, double sigma);

  const Vector& group() const { return group_; }
  const Vector& element() const { return element_; }
  Index s0() const { return s0_; }
  double sigma() const { return sigma_; }

  nlohmann::json to_json() const;
  static WeightSequences from_json(const nlohmann::json& j, const GroupLayout& layout);

 private:
  Vector group_;
  Vector element_;
  Index s0_;
  double sigma_;
};

/// lambda_j = sigma * sqrt(log(2ed/s0) + (2/s0) log(4em/j)), j = 1..m.
WeightSequences make_weights(const GroupLayout& layout, Index s0, double sigma);

/// ||u||_* = sorted l1 with element weights + sqrt(s0) * group-sorted norm.
double norm_combined_star(const Vector& u, const WeightSequences& weights, const GroupLayout& layout);

/// Tuning level ((4 + sqrt 2) sigma / (gamma sqrt n)) *
/// sqrt(log(2ed/s0) + (2/s0) log(4em/s)). Requires 0 < gamma < 1.
double lambda_sharp(double gamma, double sigma, double n, const SparsityBudget& budget,
                    const GroupLayout& layout);

/// Bound envelope N(u) = ||u||_* / sqrt(n).
double envelope_N(const Vector& u, const WeightSequences& weights, const GroupLayout& layout, double n);

/// Soft thresholding.
Vector prox_l1(const Vector& x, double threshold);

/// Block shrinkage u_g * max(0, 1 - threshold / ||u_g||).
Vector prox_group_l2(const Vector& x, double threshold, const GroupLayout& layout);

/// Prox of threshold_l1 ||.||_1 + threshold_group ||.||_{1,2}: soft threshold, then block shrink.
Vector prox_sparse_group(const Vector& x, double threshold_l1, double threshold_group,
                         const GroupLayout& layout);

/// Prox of the sorted l1 norm with the given (already scaled) weights.
Vector prox_sorted_l1(const Vector& x, const Vector& weights);

/// Prox of the group-sorted norm: sorted-l1 prox on group norms, then rescale.
Vector prox_group_sorted(const Vector& x, const Vector& group_weights, const GroupLayout& layout);

struct ProxOptions {
  double tol = 1e-10;
  int max_iters = 10'000;
};

/// Dual iterate of the combined prox; reusing it warm-starts the next call.
struct CombinedProxState {
  Vector elem_dual;
  Vector group_dual;
};

struct CombinedProxResult {
  Vector point;
  double gap = 0.0;  ///< certified bound on the prox objective suboptimality
  int iterations = 0;
  bool converged = false;
};

/// Prox of sum_i ew_i |u|_(i) + sum_j gw_j ||U||_(j) by block minimisation of
/// the dual (projections on the two dual balls). Does not throw on
/// non-convergence; the result carries the duality gap.
CombinedProxResult prox_combined(const Vector& x, const Vector& elem_weights, const Vector& group_weights,
                                 const GroupLayout& layout, const ProxOptions& options = {},
                                 CombinedProxState* state = nullptr);

/// Prox of t * ||.||_*. Throws NoConvergence when the gap stays above tol.
Vector prox_combined_star(const Vector& x, double t, const WeightSequences& weights,
                          const GroupLayout& layout, const ProxOptions& options = {});

enum class PenaltyKind { L1, GroupL2, SparseGroup, SortedL1, GroupSorted, Combined };

/// A convex penalty h together with its prox.
class Penalty {
 public:
  static Penalty l1(double lambda, const GroupLayout& layout);
  static Penalty group_l2(double lambda_g, const GroupLayout& layout);
  static Penalty sparse_group(double lambda, double lambda_g, const GroupLayout& layout);
  static Penalty sorted_l1(Vector weights, const GroupLayout& layout);
  static Penalty group_sorted(Vector group_weights, const GroupLayout& layout);
  static Penalty combined(Vector elem_weights, Vector group_weights, const GroupLayout& layout);
  /// scale * ||.||_*
  static Penalty combined_star(const WeightSequences& weights, const GroupLayout& layout, double scale = 1.0);

  PenaltyKind kind() const { return kind_; }
  const GroupLayout& layout() const { return layout_; }
  double lambda() const { return lambda_; }
  double lambda_g() const { return lambda_g_; }
  const Vector& elem_weights() const { return elem_; }
  const Vector& group_weights() const { return group_; }

  double value(const Vector& u) const;

  /// prox of t * h at x. The combined kind solves to options.tol and may
  /// reuse state between calls.
  Vector prox(const Vector& x, double t, CombinedProxState* state = nullptr,
              const ProxOptions& options = {}) const;

 private:
  Penalty(PenaltyKind kind, const GroupLayout& layout) : kind_(kind), layout_(layout) {}

  PenaltyKind kind_;
  GroupLayout layout_;
  double lambda_ = 0.0;
  double lambda_g_ = 0.0;
  Vector elem_;
  Vector group_;
};

}  // namespace dsparse::penalty
