#include "dsparse/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dsparse::conditions {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double design_ratio(const Matrix& X, const Vector& w) {
  const double norm = w.norm();
  if (norm == 0.0) return kInf;
  return (X * w).norm() / (std::sqrt(static_cast<double>(X.rows())) * norm);
}

struct Candidate {
  double value = kInf;
  Vector witness;
  Method method = Method::ProjectedMinimization;
  std::uint64_t examined = 0;
};

// Ties keep the earlier candidate so reductions do not depend on scheduling.
void keep_better(Candidate& best, const Candidate& other) {
  if (other.value < best.value) {
    best.value = other.value;
    best.witness = other.witness;
    best.method = other.method;
  }
}

// Smallest eigenpair of the principal submatrix of gram on the given indices.
std::pair<double, Vector> restricted_min(const Matrix& gram, std::span<const Index> support, Index p) {
  const Index k = static_cast<Index>(support.size());
  Matrix sub(k, k);
  for (Index a = 0; a < k; ++a) {
    for (Index b = 0; b < k; ++b) sub(a, b) = gram(support[static_cast<std::size_t>(a)], support[static_cast<std::size_t>(b)]);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sub);
  Vector w = Vector::Zero(p);
  for (Index a = 0; a < k; ++a) w[support[static_cast<std::size_t>(a)]] = eig.eigenvectors()(a, 0);
  return {std::max(eig.eigenvalues()[0], 0.0), w};
}

// Keep the s groups with the largest norms, then the s*s0 largest entries of their union.
Vector ds_truncate(const Vector& v, const SparsityBudget& budget, const GroupLayout& layout) {
  const SortedMagnitudes groups = sort_groups(GroupedVector(v, layout));
  Vector kept = Vector::Zero(v.size());
  for (Index k = 0; k < budget.s(); ++k) {
    const Index g = groups.order[static_cast<std::size_t>(k)];
    kept.segment(g * layout.d(), layout.d()) = v.segment(g * layout.d(), layout.d());
  }
  const SortedMagnitudes entries = sort_elementwise(kept);
  Vector out = Vector::Zero(v.size());
  for (Index k = 0; k < std::min(budget.total(), v.size()); ++k) {
    const Index i = entries.order[static_cast<std::size_t>(k)];
    out[i] = kept[i];
  }
  return out;
}

Vector shrink(const Vector& v, double t, const ConeSpec& spec, const GroupLayout& layout) {
  const double root_s0 = std::sqrt(static_cast<double>(spec.budget.s0()));
  switch (spec.cone) {
    case Cone::SRE:
      return penalty::prox_l1(v, t);
    case Cone::SGRE:
      return penalty::prox_group_l2(v, t, layout);
    default:
      return penalty::prox_sparse_group(v, t, root_s0 * t, layout);
  }
}

double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  return (na == 0.0 || nb == 0.0) ? -kInf : a.dot(b) / (na * nb);
}

Rng restart_stream(std::uint64_t seed, std::uint64_t k) { return make_stream(seed, 0xc0de0000 + k); }

// Random direction with a random mix of dense, group-sparse and DS structure.
Vector random_direction(const GroupLayout& layout, const SparsityBudget& budget, Rng& rng) {
  std::uniform_int_distribution<int> kind(0, 2);
  Vector v = standard_normal(layout.p(), rng);
  switch (kind(rng)) {
    case 0:
      break;
    case 1: {
      const IndexSet set = sample_family({Family::S1, budget}, layout, rng);
      Vector sparse = Vector::Zero(layout.p());
      for (Index i : set.elements) sparse[i] = v[i];
      v = sparse + 0.1 * std::uniform_real_distribution<double>(0.0, 1.0)(rng) * standard_normal(layout.p(), rng);
      break;
    }
    default: {
      std::uniform_real_distribution<double> level(0.0, 1.5);
      v = penalty::prox_l1(v, level(rng));
      if (v.norm() == 0.0) v[0] = 1.0;
    }
  }
  return v;
}

}  // namespace

std::string to_string(Condition c) {
  switch (c) {
    case Condition::SGNorm: return "SGNorm";
    case Condition::SSGRE: return "SSGRE";
    case Condition::WSGRE: return "WSGRE";
    case Condition::DSRE: return "DSRE";
  }
  return "?";
}

std::string to_string(Method m) {
  switch (m) {
    case Method::ExactEnumeration: return "ExactEnumeration";
    case Method::MonteCarlo: return "MonteCarlo";
    case Method::ProjectedMinimization: return "ProjectedMinimization";
    case Method::FrobeniusBound: return "FrobeniusBound";
  }
  return "?";
}

std::string to_string(Cone c) {
  switch (c) {
    case Cone::SSGRE: return "SSGRE";
    case Cone::WSGRE: return "WSGRE";
    case Cone::SRE: return "SRE";
    case Cone::SGRE: return "SGRE";
    case Cone::DS: return "DS";
  }
  return "?";
}

nlohmann::json ConditionReport::to_json() const {
  nlohmann::json j{{"condition", to_string(condition)},
                   {"value", value},
                   {"method", to_string(method)},
                   {"examined", examined},
                   {"note", note},
                   {"witness", std::vector<double>(witness.begin(), witness.end())}};
  if (cone) j["cone"] = to_string(*cone);
  return j;
}

void ConeSpec::validate() const {
  if (!(c0 > 0.0) || !std::isfinite(c0)) fail(ErrorCode::InvalidArgument, "cone constant c0 must be positive");
  if (cone == Cone::WSGRE && !weights) fail(ErrorCode::InvalidArgument, "WSGRE cone needs weight sequences");
}

double cone_margin(const Vector& delta, const ConeSpec& spec, const GroupLayout& layout) {
  spec.validate();
  layout.check(delta, "delta");
  const double s = static_cast<double>(spec.budget.s());
  const double s0 = static_cast<double>(spec.budget.s0());
  const double l2 = delta.norm();
  switch (spec.cone) {
    case Cone::SSGRE:
      return (2.0 + spec.c0) * std::sqrt(s * s0) * l2 -
             (penalty::norm_l1(delta) + std::sqrt(s0) * penalty::norm_l12(delta, layout));
    case Cone::WSGRE: {
      const Index head = std::min(spec.budget.total(), layout.p());
      const double level = std::sqrt(spec.weights->element().head(head).squaredNorm());
      return (2.0 + spec.c0) * level * l2 - penalty::norm_combined_star(delta, *spec.weights, layout);
    }
    case Cone::SRE:
      return (1.0 + spec.c0) * std::sqrt(s * s0) * l2 - penalty::norm_l1(delta);
    case Cone::SGRE:
      return (1.0 + spec.c0) * std::sqrt(s) * l2 - penalty::norm_l12(delta, layout);
    case Cone::DS: {
      const Index nnz = (delta.array() != 0.0).count();
      const Index groups = (group_norms(delta, layout).array() != 0.0).count();
      return (nnz <= spec.budget.total() && groups <= spec.budget.s()) ? 0.0 : -1.0;
    }
  }
  return -1.0;
}

bool cone_membership(const Vector& delta, const ConeSpec& spec, const GroupLayout& layout) {
  return cone_margin(delta, spec, layout) >= 0.0;
}

Vector project_to_cone(const Vector& v, const ConeSpec& spec, const GroupLayout& layout) {
  spec.validate();
  layout.check(v, "v");
  const double norm = v.norm();
  if (norm == 0.0) return v;
  // Strictly inside, so that normalising cannot push the point out by rounding.
  auto inside = [&](const Vector& u) { return cone_margin(u, spec, layout) >= 1e-11 * u.norm(); };
  if (inside(v)) return v / norm;

  Vector best = ds_truncate(v, spec.budget, layout);
  if (spec.cone != Cone::DS) {
    // First feasible level on a coarse scan, then bisection down to the boundary.
    const double top = v.cwiseAbs().maxCoeff();
    double lo = 0.0;
    double hi = -1.0;
    for (int k = 1; k < 64; ++k) {
      const double t = top * k / 64.0;
      const Vector u = shrink(v, t, spec, layout);
      if (u.norm() == 0.0) break;
      if (inside(u)) {
        hi = t;
        break;
      }
      lo = t;
    }
    if (hi > 0.0) {
      for (int k = 0; k < 50; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (inside(shrink(v, mid, spec, layout))) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      const Vector u = shrink(v, hi, spec, layout);
      if (cosine(u, v) > cosine(best, v)) best = u;
    }
  }
  return best / best.norm();
}

ConditionReport check_sgnorm(const Matrix& X, const GroupLayout& layout, Index s0, const SGNormOptions& options) {
  if (X.cols() != layout.p()) fail(ErrorCode::DimensionMismatch, "X columns do not match the layout");
  if (s0 < 1 || s0 > layout.d()) fail(ErrorCode::BudgetInvalid, "s0 must lie in [1, d]");
  const Index d = layout.d();
  const double n = static_cast<double>(X.rows());
  ConditionReport report;
  report.condition = Condition::SGNorm;

  if (options.mode == SGNormMode::FrobeniusBound) {
    // ||X_S||_op <= ||X_S||_F <= top-s0 column norms of the group.
    double best = 0.0;
    for (Index g = 0; g < layout.m(); ++g) {
      Vector sq = X.middleCols(g * d, d).colwise().squaredNorm().transpose();
      std::sort(sq.begin(), sq.end(), std::greater<double>());
      best = std::max(best, std::sqrt(sq.head(s0).sum() / n));
    }
    report.value = best;
    report.method = Method::FrobeniusBound;
    report.examined = static_cast<std::uint64_t>(layout.m());
    report.note = "upper bound from column norms; no witness";
    return report;
  }

  std::vector<Matrix> grams(static_cast<std::size_t>(layout.m()));
  for (Index g = 0; g < layout.m(); ++g) {
    const auto block = X.middleCols(g * d, d);
    grams[static_cast<std::size_t>(g)] = block.transpose() * block / n;
  }
  auto evaluate = [&](Index g, std::span<const Index> offsets) {
    const Matrix& gram = grams[static_cast<std::size_t>(g)];
    Matrix sub(s0, s0);
    for (Index a = 0; a < s0; ++a) {
      for (Index b = 0; b < s0; ++b) sub(a, b) = gram(offsets[static_cast<std::size_t>(a)], offsets[static_cast<std::size_t>(b)]);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sub);
    Vector w = Vector::Zero(layout.p());
    for (Index a = 0; a < s0; ++a) w[layout.index(g, offsets[static_cast<std::size_t>(a)])] = eig.eigenvectors()(a, s0 - 1);
    return std::pair{std::sqrt(std::max(eig.eigenvalues()[s0 - 1], 0.0)), w};
  };

  std::vector<double> values;
  std::vector<Vector> witnesses;
  if (options.mode == SGNormMode::Exact) {
    const std::uint64_t count = static_cast<std::uint64_t>(layout.m()) * binomial_u64(d, s0);
    if (binomial_u64(d, s0) > options.cap || count > options.cap) {
      fail(ErrorCode::CapExceeded, "exact SGNorm needs " + std::to_string(count) + " subsets, cap " +
                                       std::to_string(options.cap));
    }
    values.assign(static_cast<std::size_t>(layout.m()), -1.0);
    witnesses.resize(static_cast<std::size_t>(layout.m()));
    parallel_for(static_cast<std::size_t>(layout.m()), options.jobs, [&](std::size_t g) {
      for_each_combination(d, s0, [&](std::span<const Index> offsets) {
        auto [value, w] = evaluate(static_cast<Index>(g), offsets);
        if (value > values[g]) {
          values[g] = value;
          witnesses[g] = std::move(w);
        }
      });
    });
    report.method = Method::ExactEnumeration;
    report.examined = count;
  } else {
    if (options.samples == 0) fail(ErrorCode::InvalidArgument, "sampled SGNorm needs samples > 0");
    values.assign(options.samples, -1.0);
    witnesses.resize(options.samples);
    parallel_for(options.samples, options.jobs, [&](std::size_t k) {
      Rng rng = make_stream(options.seed, 0x59a0000 + k);
      const Index g = std::uniform_int_distribution<Index>(0, layout.m() - 1)(rng);
      std::vector<Index> offsets(static_cast<std::size_t>(d));
      std::iota(offsets.begin(), offsets.end(), Index{0});
      std::shuffle(offsets.begin(), offsets.end(), rng);
      offsets.resize(static_cast<std::size_t>(s0));
      std::sort(offsets.begin(), offsets.end());
      std::tie(values[k], witnesses[k]) = evaluate(g, offsets);
    });
    report.method = Method::MonteCarlo;
    report.examined = options.samples;
    report.note = "lower bound from random subsets";
  }
  const auto top = std::max_element(values.begin(), values.end());
  const std::size_t at = static_cast<std::size_t>(top - values.begin());
  report.witness = witnesses[at];
  report.value = design_ratio(X, report.witness);
  return report;
}

ConditionReport exact_ds_eigenvalue(const Matrix& X, const SparsityBudget& budget, const GroupLayout& layout,
                                    std::uint64_t cap, int jobs) {
  if (X.cols() != layout.p()) fail(ErrorCode::DimensionMismatch, "X columns do not match the layout");
  const IndexFamilySpec spec{Family::S1, budget};
  const std::uint64_t count = family_size(spec, layout);
  if (count > cap) {
    fail(ErrorCode::CapExceeded, "DS enumeration needs " + std::to_string(count) + " supports, cap " + std::to_string(cap));
  }
  std::vector<std::vector<Index>> supports;
  supports.reserve(static_cast<std::size_t>(count));
  enumerate_family(spec, layout, [&](const IndexSet& set) { supports.push_back(set.elements); }, cap);
  std::sort(supports.begin(), supports.end());
  supports.erase(std::unique(supports.begin(), supports.end()), supports.end());

  const Matrix gram = X.transpose() * X / static_cast<double>(X.rows());
  std::vector<double> values(supports.size());
  std::vector<Vector> witnesses(supports.size());
  parallel_for(supports.size(), jobs, [&](std::size_t k) {
    std::tie(values[k], witnesses[k]) = restricted_min(gram, supports[k], layout.p());
  });
  const std::size_t at = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  ConditionReport report;
  report.condition = Condition::DSRE;
  report.cone = Cone::DS;
  report.method = Method::ExactEnumeration;
  report.examined = supports.size();
  report.witness = witnesses[at];
  report.value = design_ratio(X, report.witness);
  return report;
}

ConditionReport estimate_cone_eigenvalue(const Matrix& X, const ConeSpec& spec, const GroupLayout& layout,
                                         const EigenvalueOptions& options) {
  spec.validate();
  if (X.cols() != layout.p()) fail(ErrorCode::DimensionMismatch, "X columns do not match the layout");
  if (X.norm() == 0.0) fail(ErrorCode::InvalidArgument, "X must be nonzero");
  const Index p = layout.p();
  const Condition condition = spec.cone == Cone::WSGRE ? Condition::WSGRE
                              : spec.cone == Cone::DS  ? Condition::DSRE
                                                       : Condition::SSGRE;

  // Double-sparse supports lie in every cone, so their minimum is a candidate.
  Candidate best;
  const bool enumerable = family_size({Family::S1, spec.budget}, layout) <= options.cap;
  if (enumerable) {
    const ConditionReport ds = exact_ds_eigenvalue(X, spec.budget, layout, options.cap, options.jobs);
    best = {ds.value, ds.witness, Method::ExactEnumeration, ds.examined};
  }
  if (spec.cone == Cone::DS) {
    if (!enumerable) {
      const Matrix gram = X.transpose() * X / static_cast<double>(X.rows());
      std::vector<Candidate> draws(options.mc_samples);
      parallel_for(draws.size(), options.jobs, [&](std::size_t k) {
        Rng rng = make_stream(options.seed, 0xd5000000 + k);
        const IndexSet set = sample_family({Family::S1, spec.budget}, layout, rng);
        auto [value, w] = restricted_min(gram, set.elements, p);
        draws[k] = {design_ratio(X, w), w, Method::MonteCarlo, 1};
      });
      for (const Candidate& c : draws) keep_better(best, c);
      best.examined = options.mc_samples;
    }
    ConditionReport report;
    report.condition = condition;
    report.cone = spec.cone;
    report.value = best.value;
    report.method = best.method;
    report.examined = best.examined;
    report.witness = best.witness;
    if (!enumerable) report.note = "upper bound from random supports";
    return report;
  }

  const Matrix gram = X.transpose() * X / static_cast<double>(X.rows());
  const double top = Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly).eigenvalues()[p - 1];
  const double step = top > 0.0 ? 0.5 / top : 1.0;

  // Starting directions: warm starts, the global bottom eigenvector, then random ones.
  std::vector<Vector> starts = options.warm_starts;
  for (const Vector& w : starts) layout.check(w, "warm start");
  starts.push_back(Eigen::SelfAdjointEigenSolver<Matrix>(gram).eigenvectors().col(0));
  if (best.witness.size() == p) starts.push_back(best.witness);
  const std::size_t fixed = starts.size();
  starts.resize(fixed + static_cast<std::size_t>(std::max(options.restarts, 0)));
  for (std::size_t k = fixed; k < starts.size(); ++k) {
    Rng rng = restart_stream(options.seed, k);
    starts[k] = random_direction(layout, spec.budget, rng);
  }

  std::vector<Candidate> runs(starts.size());
  parallel_for(starts.size(), options.jobs, [&](std::size_t k) {
    Vector delta = project_to_cone(starts[k], spec, layout);
    Candidate local;
    local.method = Method::ProjectedMinimization;
    if (delta.norm() == 0.0) {
      runs[k] = local;
      return;
    }
    local.value = std::sqrt(std::max(delta.dot(gram * delta), 0.0));
    local.witness = delta;
    for (int it = 0; it < options.iterations; ++it) {
      const Vector next = project_to_cone(delta - 2.0 * step * (gram * delta), spec, layout);
      if (next.norm() == 0.0) break;
      const double value = std::sqrt(std::max(next.dot(gram * next), 0.0));
      const double change = (next - delta).norm();
      delta = next;
      if (value < local.value) {
        local.value = value;
        local.witness = delta;
      }
      if (change < 1e-12) break;
    }
    runs[k] = local;
  });
  for (const Candidate& c : runs) keep_better(best, c);

  std::vector<Candidate> samples(options.mc_samples);
  parallel_for(samples.size(), options.jobs, [&](std::size_t k) {
    Rng rng = make_stream(options.seed, 0x3c000000 + k);
    const Vector delta = project_to_cone(random_direction(layout, spec.budget, rng), spec, layout);
    samples[k] = {std::sqrt(std::max(delta.dot(gram * delta), 0.0)), delta, Method::MonteCarlo, 1};
  });
  for (const Candidate& c : samples) keep_better(best, c);

  ConditionReport report;
  report.condition = condition;
  report.cone = spec.cone;
  report.method = best.method;
  report.examined = starts.size() + options.mc_samples + best.examined;
  report.witness = best.witness;
  report.value = design_ratio(X, best.witness);
  report.note = "upper bound on the cone minimum";
  return report;
}

nlohmann::json InclusionReport::to_json() const {
  nlohmann::json j{{"samples", samples},
                   {"boundary_samples", boundary_samples},
                   {"sre_violations", sre_violations},
                   {"sgre_violations", sgre_violations},
                   {"wsgre_violations", wsgre_violations}};
  if (witness) j["witness"] = std::vector<double>(witness->begin(), witness->end());
  return j;
}

InclusionReport cone_inclusion_check(const GroupLayout& layout, const SparsityBudget& budget, double c0,
                                     const penalty::WeightSequences& weights, std::uint64_t samples,
                                     std::uint64_t seed) {
  const ConeSpec source{Cone::SSGRE, budget, c0, std::nullopt};
  const ConeSpec sre{Cone::SRE, budget, 1.0 + c0, std::nullopt};
  const ConeSpec sgre{Cone::SGRE, budget, 1.0 + c0, std::nullopt};
  const ConeSpec wsgre{Cone::WSGRE, budget, 2.0 + c0, weights};
  source.validate();
  InclusionReport report;
  for (std::uint64_t k = 0; k < samples; ++k) {
    Rng rng = make_stream(seed, 0x1c000000 + k);
    Vector delta = project_to_cone(random_direction(layout, budget, rng), source, layout);
    if (k % 2 == 1) {
      // Walk from an inside point towards a dense outside point up to the boundary.
      const Vector outside = Vector::Ones(layout.p()) + 0.1 * standard_normal(layout.p(), rng);
      if (!cone_membership(outside, source, layout)) {
        double lo = 0.0;
        double hi = 1.0;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          (cone_membership((1 - mid) * delta + mid * outside, source, layout) ? lo : hi) = mid;
        }
        delta = (1 - lo) * delta + lo * outside;
        ++report.boundary_samples;
      }
    }
    ++report.samples;
    // Rounding slack relative to the size of both sides.
    const double slack = 1e-12 * (penalty::norm_combined_star(delta, weights, layout) + penalty::norm_l1(delta) +
                                  delta.norm() * weights.element().norm());
    bool violated = false;
    if (cone_margin(delta, sre, layout) < -slack) {
      ++report.sre_violations;
      violated = true;
    }
    if (cone_margin(delta, sgre, layout) < -slack) {
      ++report.sgre_violations;
      violated = true;
    }
    if (cone_margin(delta, wsgre, layout) < -slack) {
      ++report.wsgre_violations;
      violated = true;
    }
    if (violated && !report.witness) report.witness = delta;
  }
  return report;
}

}  // namespace dsparse::conditions
