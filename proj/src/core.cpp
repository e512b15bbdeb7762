#include "dsparse/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

namespace dsparse {

GroupLayout::GroupLayout(Index m, Index d) : m_(m), d_(d) {
  if (m < 1 || d < 1) {
    fail(ErrorCode::InvalidArgument,
         "group layout needs m >= 1 and d >= 1, got m=" + std::to_string(m) +
             " d=" + std::to_string(d));
  }
}

GroupLayout GroupLayout::from_group_sizes(std::span<const Index> sizes) {
  if (sizes.empty()) fail(ErrorCode::InvalidArgument, "no groups given");
  for (Index size : sizes) {
    if (size != sizes.front()) {
      fail(ErrorCode::InvalidArgument, "groups must all have the same size");
    }
  }
  return GroupLayout(static_cast<Index>(sizes.size()), sizes.front());
}

Eigen::Map<const Matrix> GroupLayout::matrix_view(const Vector& u) const {
  check(u);
  return Eigen::Map<const Matrix>(u.data(), d_, m_);
}

void GroupLayout::check(const Vector& u, const char* what) const {
  if (u.size() != p()) {
    fail(ErrorCode::DimensionMismatch, std::string(what) + " has " + std::to_string(u.size()) +
                                           " entries, layout expects " + std::to_string(p()));
  }
}

void to_json(nlohmann::json& j, const GroupLayout& layout) {
  j = nlohmann::json{{"m", layout.m()}, {"d", layout.d()}};
}

GroupLayout layout_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("m") || !j.contains("d") || !j["m"].is_number_integer() ||
      !j["d"].is_number_integer()) {
    fail(ErrorCode::ConfigInvalid, "layout must be an object with integer fields m and d");
  }
  return GroupLayout(j["m"].get<Index>(), j["d"].get<Index>());
}

SparsityBudget::SparsityBudget(Index s, Index s0, const GroupLayout& layout) : s_(s), s0_(s0) {
  if (s < 1 || s > layout.m() || s0 < 1 || s0 > layout.d()) {
    fail(ErrorCode::BudgetInvalid, "need 1 <= s <= m and 1 <= s0 <= d, got s=" +
                                       std::to_string(s) + " s0=" + std::to_string(s0) +
                                       " m=" + std::to_string(layout.m()) +
                                       " d=" + std::to_string(layout.d()));
  }
}

GroupedVector::GroupedVector(Vector entries, GroupLayout layout)
    : entries_(std::move(entries)), layout_(layout) {
  layout_.check(entries_);
}

GroupedVector GroupedVector::from_matrix(const Matrix& u) {
  GroupLayout layout(u.cols(), u.rows());
  Vector entries = Eigen::Map<const Vector>(u.data(), u.size());
  return GroupedVector(std::move(entries), layout);
}

SortedMagnitudes sort_elementwise(const Vector& u) {
  SortedMagnitudes out;
  out.order.resize(static_cast<std::size_t>(u.size()));
  std::iota(out.order.begin(), out.order.end(), Index{0});
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](Index a, Index b) { return std::abs(u[a]) > std::abs(u[b]); });
  out.values.resize(u.size());
  for (Index k = 0; k < u.size(); ++k) out.values[k] = std::abs(u[out.order[k]]);
  return out;
}

Matrix sort_groupwise(const GroupedVector& u) {
  Matrix sorted = u.matrix().cwiseAbs();
  for (Index j = 0; j < sorted.cols(); ++j) {
    std::sort(sorted.col(j).begin(), sorted.col(j).end(), std::greater<double>());
  }
  return sorted;
}

Vector group_norms(const Vector& u, const GroupLayout& layout) {
  return layout.matrix_view(u).colwise().norm().transpose();
}

SortedMagnitudes sort_groups(const GroupedVector& u) {
  return sort_elementwise(group_norms(u.entries(), u.layout()));
}

double binomial(Index n, Index k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double result = 1.0;
  for (Index i = 1; i <= k; ++i) {
    result = result * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return std::round(result);
}

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t mul_sat(std::uint64_t a, std::uint64_t b) {
  if (a == 0 || b == 0) return 0;
  if (a > kSaturated / b) return kSaturated;
  return a * b;
}

std::uint64_t pow_sat(std::uint64_t base, Index exponent) {
  std::uint64_t result = 1;
  for (Index i = 0; i < exponent; ++i) result = mul_sat(result, base);
  return result;
}

std::vector<Index> random_subset(Index n, Index k, Rng& rng) {
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

std::uint64_t binomial_u64(Index n, Index k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  // Multiplicative formula keeps every partial product an exact binomial.
  unsigned __int128 result = 1;
  for (Index i = 1; i <= k; ++i) {
    result = result * static_cast<unsigned __int128>(n - k + i) / static_cast<unsigned>(i);
    if (result > kSaturated) return kSaturated;
  }
  return static_cast<std::uint64_t>(result);
}

void for_each_combination(Index n, Index k,
                          const std::function<void(std::span<const Index>)>& visit) {
  if (k < 0 || k > n) return;
  std::vector<Index> combo(static_cast<std::size_t>(k));
  std::iota(combo.begin(), combo.end(), Index{0});
  while (true) {
    visit(std::span<const Index>(combo));
    Index i = k - 1;
    while (i >= 0 && combo[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++combo[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < k; ++j) {
      combo[static_cast<std::size_t>(j)] = combo[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

std::uint64_t family_size(const IndexFamilySpec& spec, const GroupLayout& layout) {
  const Index s = spec.budget.s();
  const Index s0 = spec.budget.s0();
  const std::uint64_t groups = binomial_u64(layout.m(), s);
  if (spec.family == Family::S2) return mul_sat(groups, pow_sat(binomial_u64(layout.d(), s0), s));
  return mul_sat(groups, binomial_u64(s * layout.d(), s * s0));
}

void enumerate_family(const IndexFamilySpec& spec, const GroupLayout& layout,
                      const std::function<void(const IndexSet&)>& visit, std::uint64_t cap) {
  const std::uint64_t size = family_size(spec, layout);
  if (size > cap) {
    fail(ErrorCode::CapExceeded, "family has " + std::to_string(size) +
                                     " members, cap is " + std::to_string(cap));
  }
  const Index s = spec.budget.s();
  const Index s0 = spec.budget.s0();
  const Index d = layout.d();
  IndexSet member;
  for_each_combination(layout.m(), s, [&](std::span<const Index> groups) {
    member.groups.assign(groups.begin(), groups.end());
    if (spec.family == Family::S1) {
      for_each_combination(s * d, s * s0, [&](std::span<const Index> picks) {
        member.elements.clear();
        for (Index pick : picks) {
          member.elements.push_back(layout.index(groups[static_cast<std::size_t>(pick / d)], pick % d));
        }
        visit(member);
      });
      return;
    }
    // S2: odometer over one s0-subset per chosen group.
    std::vector<std::vector<Index>> subsets;
    for_each_combination(d, s0, [&](std::span<const Index> c) { subsets.emplace_back(c.begin(), c.end()); });
    std::vector<std::size_t> digit(static_cast<std::size_t>(s), 0);
    while (true) {
      member.elements.clear();
      for (Index g = 0; g < s; ++g) {
        for (Index offset : subsets[digit[static_cast<std::size_t>(g)]]) {
          member.elements.push_back(layout.index(groups[static_cast<std::size_t>(g)], offset));
        }
      }
      visit(member);
      Index g = s - 1;
      while (g >= 0 && ++digit[static_cast<std::size_t>(g)] == subsets.size()) {
        digit[static_cast<std::size_t>(g)] = 0;
        --g;
      }
      if (g < 0) break;
    }
  });
}

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  auto splitmix = [](std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  std::uint64_t state = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
  std::seed_seq seq{splitmix(state), splitmix(state), splitmix(state), splitmix(state)};
  return Rng(seq);
}

IndexSet sample_family(const IndexFamilySpec& spec, const GroupLayout& layout, Rng& rng) {
  const Index s = spec.budget.s();
  const Index s0 = spec.budget.s0();
  const Index d = layout.d();
  IndexSet member;
  member.groups = random_subset(layout.m(), s, rng);
  if (spec.family == Family::S1) {
    for (Index pick : random_subset(s * d, s * s0, rng)) {
      member.elements.push_back(layout.index(member.groups[static_cast<std::size_t>(pick / d)], pick % d));
    }
  } else {
    for (Index g : member.groups) {
      for (Index offset : random_subset(d, s0, rng)) member.elements.push_back(layout.index(g, offset));
    }
  }
  return member;
}

Vector standard_normal(Index size, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector out(size);
  for (Index i = 0; i < size; ++i) out[i] = normal(rng);
  return out;
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& thread : threads) thread.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dsparse
