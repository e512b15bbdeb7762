#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsparse/core.hpp"
#include "dsparse/penalty.hpp"

namespace dsparse::conditions {

enum class Condition { SGNorm, SSGRE, WSGRE, DSRE };
enum class Method { ExactEnumeration, MonteCarlo, ProjectedMinimization, FrobeniusBound };
enum class Cone { SSGRE, WSGRE, SRE, SGRE, DS };

std::string to_string(Condition c);
std::string to_string(Method m);
std::string to_string(Cone c);

struct ConditionReport {
  Condition condition = Condition::SGNorm;
  std::optional<Cone> cone;
  double value = 0.0;
  Method method = Method::ExactEnumeration;
  std::uint64_t examined = 0;
  std::string note;
  /// Unit vector with ||X w||_n == value. Empty for FrobeniusBound.
  Vector witness;

  nlohmann::json to_json() const;
};

/// Cone membership rules (c0 > 0):
///   SSGRE  ||d||_1 + sqrt(s0) ||d||_{1,2} <= (2 + c0) sqrt(s s0) ||d||_2
///   WSGRE  ||d||_*                        <= (2 + c0) sqrt(sum_{i <= s s0} w~_i^2) ||d||_2
///   SRE    ||d||_1                        <= (1 + c0) sqrt(s s0) ||d||_2
///   SGRE   ||d||_{1,2}                    <= (1 + c0) sqrt(s) ||d||_2
///   DS     at most s nonzero groups and at most s s0 nonzero entries
struct ConeSpec {
  Cone cone = Cone::SSGRE;
  SparsityBudget budget;
  double c0 = 1.0;
  std::optional<penalty::WeightSequences> weights;  ///< WSGRE only

  /// Throws InvalidArgument on c0 <= 0 or missing WSGRE weights.
  void validate() const;
};

/// Exact evaluation of the defining inequality. The zero vector is a member.
bool cone_membership(const Vector& delta, const ConeSpec& spec, const GroupLayout& layout);

/// rhs - lhs of the defining inequality; negative means outside. DS gives 0 or -1.
double cone_margin(const Vector& delta, const ConeSpec& spec, const GroupLayout& layout);

/// Heuristic map onto the cone: sparse-group shrinkage tuned by bisection,
/// or the nearest double-sparse truncation, whichever is closer in angle.
/// Returns a unit vector inside the cone (zero only for zero input).
Vector project_to_cone(const Vector& v, const ConeSpec& spec, const GroupLayout& layout);

enum class SGNormMode { Exact, Sampled, FrobeniusBound };

inline constexpr std::uint64_t kSubsetCap = 100'000;

struct SGNormOptions {
  SGNormMode mode = SGNormMode::Exact;
  std::uint64_t samples = 2000;  ///< Sampled mode
  std::uint64_t cap = kSubsetCap;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// theta_max = sup over within-group s0-subsets S of ||X_S||_op / sqrt(n).
/// Exact and Sampled modes use the eigen-decomposition of the s0 x s0 Gram
/// block. Throws CapExceeded in Exact mode when m * C(d, s0) > cap.
ConditionReport check_sgnorm(const Matrix& X, const GroupLayout& layout, Index s0, const SGNormOptions& options = {});

struct EigenvalueOptions {
  int restarts = 32;
  int iterations = 300;
  std::uint64_t mc_samples = 2000;
  std::uint64_t cap = kSubsetCap;  ///< support enumeration cap
  /// Extra starting directions, e.g. witnesses found for a smaller c0.
  std::vector<Vector> warm_starts;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// min ||X d||_n / ||d||_2 over the DS(s, s0) supports, by enumeration of
/// smallest eigenvalues of X_S^T X_S / n. Throws CapExceeded.
ConditionReport exact_ds_eigenvalue(const Matrix& X, const SparsityBudget& budget, const GroupLayout& layout,
                                    std::uint64_t cap = kSubsetCap, int jobs = 1);

/// Upper bound on the cone restricted eigenvalue: the smallest of projected
/// gradient descent from many starts, Monte Carlo cone samples and the
/// double-sparse supports (which lie in every cone here). For the DS cone the
/// result is exact when the supports can be enumerated.
ConditionReport estimate_cone_eigenvalue(const Matrix& X, const ConeSpec& spec, const GroupLayout& layout,
                                         const EigenvalueOptions& options = {});

struct InclusionReport {
  std::uint64_t samples = 0;
  std::uint64_t boundary_samples = 0;
  std::uint64_t sre_violations = 0;
  std::uint64_t sgre_violations = 0;
  std::uint64_t wsgre_violations = 0;
  std::optional<Vector> witness;

  std::uint64_t violations() const { return sre_violations + sgre_violations + wsgre_violations; }
  nlohmann::json to_json() const;
};

/// Samples points of C_SSGRE(s, s0, c0), a share of them on its boundary, and
/// checks membership in C_SRE(s s0, 1 + c0), C_SGRE(s, 1 + c0) and
/// C_WSGRE(s, s0, 2 + c0) with the given weights.
InclusionReport cone_inclusion_check(const GroupLayout& layout, const SparsityBudget& budget, double c0,
                                     const penalty::WeightSequences& weights, std::uint64_t samples,
                                     std::uint64_t seed = 0);

}  // namespace dsparse::conditions
