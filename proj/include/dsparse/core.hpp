#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dsparse/error.hpp"

namespace dsparse {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Partition of p = m * d coordinates into m contiguous groups of size d.
///
/// Group j owns coordinates j*d, ..., j*d + d - 1 (0-based).
class GroupLayout {
 public:
  GroupLayout(Index m, Index d);

  /// Builds a layout from explicit group sizes; all sizes must agree.
  static GroupLayout from_group_sizes(std::span<const Index> sizes);

  Index m() const { return m_; }
  Index d() const { return d_; }
  Index p() const { return m_ * d_; }

  Index group_of(Index i) const { return i / d_; }
  Index offset_of(Index i) const { return i % d_; }
  Index index(Index group, Index offset) const { return group * d_ + offset; }

  /// d x m view whose column j is group j.
  Eigen::Map<const Matrix> matrix_view(const Vector& u) const;

  /// Throws DimensionMismatch unless u has p entries.
  void check(const Vector& u, const char* what = "vector") const;

  bool operator==(const GroupLayout&) const = default;

 private:
  Index m_;
  Index d_;
};

void to_json(nlohmann::json& j, const GroupLayout& layout);
GroupLayout layout_from_json(const nlohmann::json& j);

/// Number of active groups s and per-group sparsity s0.
class SparsityBudget {
 public:
  SparsityBudget(Index s, Index s0, const GroupLayout& layout);

  Index s() const { return s_; }
  Index s0() const { return s0_; }
  Index total() const { return s_ * s0_; }

  bool operator==(const SparsityBudget&) const = default;

 private:
  Index s_;
  Index s0_;
};

/// Vector in R^p together with its grouping.
class GroupedVector {
 public:
  GroupedVector(Vector entries, GroupLayout layout);
  static GroupedVector from_matrix(const Matrix& u);

  const Vector& entries() const { return entries_; }
  const GroupLayout& layout() const { return layout_; }
  Eigen::Map<const Matrix> matrix() const { return layout_.matrix_view(entries_); }

 private:
  Vector entries_;
  GroupLayout layout_;
};

/// Magnitudes in non-increasing order. order[k] is the original index of the
/// k-th largest entry; ties keep ascending original index.
struct SortedMagnitudes {
  Vector values;
  std::vector<Index> order;
};

SortedMagnitudes sort_elementwise(const Vector& u);

/// Each column of the d x m view sorted by magnitude, non-increasing.
Matrix sort_groupwise(const GroupedVector& u);

/// Group l2 norms in non-increasing order with the originating group index.
SortedMagnitudes sort_groups(const GroupedVector& u);

/// Group l2 norms in original group order.
Vector group_norms(const Vector& u, const GroupLayout& layout);

enum class Family {
  S1,  ///< s groups, then any s*s0 coordinates from their union
  S2,  ///< s groups, s0 coordinates from each
};

struct IndexFamilySpec {
  Family family;
  SparsityBudget budget;
};

/// One member of a support family. For S1 the same coordinate set can arise
/// from several group choices; each (groups, elements) pair is one member.
struct IndexSet {
  std::vector<Index> groups;
  std::vector<Index> elements;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// Exact family size, saturating at UINT64_MAX.
std::uint64_t family_size(const IndexFamilySpec& spec, const GroupLayout& layout);

/// Visits every member exactly once. Throws CapExceeded before visiting
/// anything when the family is larger than cap.
void enumerate_family(const IndexFamilySpec& spec, const GroupLayout& layout,
                      const std::function<void(const IndexSet&)>& visit,
                      std::uint64_t cap = kDefaultEnumerationCap);

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream) built by splitmix64 mixing.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

/// Uniformly random member of the family.
IndexSet sample_family(const IndexFamilySpec& spec, const GroupLayout& layout, Rng& rng);

Vector standard_normal(Index size, Rng& rng);

/// Binomial coefficient as a double (exact below 2^53).
double binomial(Index n, Index k);

/// Saturating integer binomial coefficient.
std::uint64_t binomial_u64(Index n, Index k);

/// Calls visit with every k-subset of {0, ..., n-1} in lexicographic order.
void for_each_combination(Index n, Index k,
                          const std::function<void(std::span<const Index>)>& visit);

/// Runs body(i) for i in [0, count) on up to jobs threads. Results must be
/// written to per-index slots so the outcome does not depend on jobs.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body);

}  // namespace dsparse
