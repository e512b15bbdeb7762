#include "dsparse/lowerbound.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "dsparse/conditions.hpp"

namespace dsparse::lowerbound {

namespace {

using Support = std::vector<Index>;

// |a xor b| for sorted supports.
Index support_distance(const Support& a, const Support& b) {
  Index common = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  return static_cast<Index>(a.size() + b.size()) - 2 * common;
}

double log_term(const GroupLayout& layout, const SparsityBudget& b) {
  const double e = std::numbers::e;
  const double s = static_cast<double>(b.s());
  const double s0 = static_cast<double>(b.s0());
  return s * std::log(e * static_cast<double>(layout.m()) / s) +
         s * s0 * std::log(e * static_cast<double>(layout.d()) / s0);
}

}  // namespace

double packing_target(const GroupLayout& layout, const SparsityBudget& budget) {
  return std::exp(0.25 * log_term(layout, budget));
}

Index packing_radius(const SparsityBudget& budget) { return (budget.total() + 3) / 4; }

Index hamming(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) fail(ErrorCode::DimensionMismatch, "hamming needs equal lengths");
  return (a.array() != b.array()).count();
}

Index min_pairwise_hamming(const std::vector<Vector>& vectors, int jobs) {
  const std::size_t k = vectors.size();
  if (k < 2) return 0;
  std::vector<Index> row_min(k, std::numeric_limits<Index>::max());
  parallel_for(k - 1, jobs, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < k; ++j) row_min[i] = std::min(row_min[i], hamming(vectors[i], vectors[j]));
  });
  return *std::min_element(row_min.begin(), row_min.end() - 1);
}

bool PackingSet::design_bound_holds() const {
  const double bound = theta_max * theta_max * static_cast<double>(budget.total());
  return is_signed && max_design_norm2 <= bound * (1.0 + 1e-12);
}

PackingSet build_packing(Index m, Index d, Index s, Index s0, const PackingOptions& options) {
  if (m < 1 || d < 1) fail(ErrorCode::BudgetInvalid, "m and d must be positive");
  const GroupLayout layout(m, d);
  const SparsityBudget budget(s, s0, layout);
  const IndexFamilySpec spec{Family::S2, budget};

  PackingSet out{layout, budget, {}};
  out.radius = packing_radius(budget);
  out.target = packing_target(layout, budget);

  std::vector<Support> candidates;
  const std::uint64_t total = family_size(spec, layout);
  if (total <= options.exhaustive_limit) {
    out.method = "exhaustive";
    enumerate_family(spec, layout, [&](const IndexSet& set) { candidates.push_back(set.elements); }, total);
    Rng rng = make_stream(options.seed, 0);
    std::shuffle(candidates.begin(), candidates.end(), rng);
  } else {
    out.method = "random";
    candidates.resize(options.max_candidates);
    parallel_for(options.max_candidates, options.jobs, [&](std::size_t k) {
      Rng rng = make_stream(options.seed, k + 1);
      candidates[k] = sample_family(spec, layout, rng).elements;
    });
  }
  for (Support& c : candidates) std::sort(c.begin(), c.end());

  // Candidates are screened against the kept set in parallel batches, then
  // accepted in order.
  std::vector<Support> kept;
  constexpr std::size_t kBatch = 256;
  std::vector<char> clear(kBatch);
  std::size_t next = 0;
  while (next < candidates.size() && kept.size() < options.max_size) {
    const std::size_t size = std::min(kBatch, candidates.size() - next);
    parallel_for(size, options.jobs, [&](std::size_t b) {
      const Support& c = candidates[next + b];
      clear[b] = std::all_of(kept.begin(), kept.end(),
                             [&](const Support& k) { return support_distance(c, k) >= out.radius; });
    });
    const std::size_t before = kept.size();
    for (std::size_t b = 0; b < size && kept.size() < options.max_size; ++b) {
      if (!clear[b]) continue;
      const Support& c = candidates[next + b];
      const bool fits = std::all_of(kept.begin() + static_cast<std::ptrdiff_t>(before), kept.end(),
                                    [&](const Support& k) { return support_distance(c, k) >= out.radius; });
      if (fits) kept.push_back(c);
    }
    next += size;
  }
  out.candidates = next;

  for (const Support& c : kept) {
    Vector v = Vector::Zero(layout.p());
    for (Index i : c) v[i] = 1.0;
    out.vectors.push_back(std::move(v));
  }
  out.min_hamming = min_pairwise_hamming(out.vectors, options.jobs);
  return out;
}

PackingSet sign_packing(const PackingSet& packing, const Matrix& X, std::optional<double> theta_max) {
  const GroupLayout& layout = packing.layout;
  if (X.cols() != layout.p()) fail(ErrorCode::DimensionMismatch, "X columns do not match the packing layout");
  const double n = static_cast<double>(X.rows());
  PackingSet out = packing;
  out.is_signed = true;
  out.theta_max = theta_max ? *theta_max : conditions::check_sgnorm(X, layout, packing.budget.s0()).value;
  out.max_design_norm2 = 0.0;
  const Index d = layout.d();
  for (Vector& beta : out.vectors) {
    Vector fit = Vector::Zero(X.rows());
    for (Index g = 0; g < layout.m(); ++g) {
      const Vector block = beta.segment(g * d, d).cwiseAbs();
      if (block.sum() == 0.0) continue;
      const Vector step = X.middleCols(g * d, d) * block;
      const bool minus = (fit - step).squaredNorm() < (fit + step).squaredNorm();
      beta.segment(g * d, d) = minus ? Vector(-block) : block;
      fit += minus ? Vector(-step) : step;
    }
    out.max_design_norm2 = std::max(out.max_design_norm2, (X * beta).squaredNorm() / n);
  }
  out.min_hamming = min_pairwise_hamming(out.vectors);
  return out;
}

double lower_bound_value(Index n, double sigma, double theta_max, Index m, Index d, Index s, Index s0) {
  const GroupLayout layout(m, d);
  const SparsityBudget budget(s, s0, layout);
  return sigma * sigma / (256.0 * static_cast<double>(n) * theta_max * theta_max) * log_term(layout, budget);
}

nlohmann::json PackingSet::to_json() const {
  nlohmann::json vecs = nlohmann::json::array();
  for (const Vector& v : vectors) {
    nlohmann::json triplets = nlohmann::json::array();
    for (Index i = 0; i < v.size(); ++i) {
      if (v[i] != 0.0) triplets.push_back({layout.group_of(i), layout.offset_of(i), v[i] > 0 ? 1 : -1});
    }
    vecs.push_back(std::move(triplets));
  }
  nlohmann::json j = {{"layout", layout},
                      {"s", budget.s()},
                      {"s0", budget.s0()},
                      {"radius", radius},
                      {"min_hamming", min_hamming},
                      {"cardinality", vectors.size()},
                      {"target", target},
                      {"meets_target", meets_target()},
                      {"method", method},
                      {"candidates", candidates},
                      {"signed", is_signed},
                      {"vectors", std::move(vecs)}};
  if (is_signed) {
    j["theta_max"] = theta_max;
    j["max_design_norm2"] = max_design_norm2;
    j["design_bound_holds"] = design_bound_holds();
  }
  return j;
}

PackingSet PackingSet::from_json(const nlohmann::json& j) {
  try {
    const GroupLayout layout = layout_from_json(j.at("layout"));
    PackingSet out{layout, SparsityBudget(j.at("s").get<Index>(), j.at("s0").get<Index>(), layout), {}};
    out.radius = j.at("radius").get<Index>();
    out.min_hamming = j.at("min_hamming").get<Index>();
    out.target = j.at("target").get<double>();
    out.method = j.at("method").get<std::string>();
    out.candidates = j.at("candidates").get<std::uint64_t>();
    out.is_signed = j.at("signed").get<bool>();
    if (out.is_signed) {
      out.theta_max = j.at("theta_max").get<double>();
      out.max_design_norm2 = j.at("max_design_norm2").get<double>();
    }
    for (const auto& triplets : j.at("vectors")) {
      Vector v = Vector::Zero(layout.p());
      for (const auto& t : triplets) {
        const Index g = t.at(0).get<Index>();
        const Index off = t.at(1).get<Index>();
        if (g < 0 || g >= layout.m() || off < 0 || off >= layout.d()) fail(ErrorCode::ParseError, "triplet out of range");
        v[layout.index(g, off)] = t.at(2).get<int>() > 0 ? 1.0 : -1.0;
      }
      out.vectors.push_back(std::move(v));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("packing json: ") + e.what());
  }
}

nlohmann::json GapReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const GapRow& r : rows) {
    rows_json.push_back({{"n", r.input.n},
                         {"sigma", r.input.sigma},
                         {"theta_max", r.input.theta_max},
                         {"m", r.input.m},
                         {"d", r.input.d},
                         {"s", r.input.s},
                         {"s0", r.input.s0},
                         {"squared_error", r.input.squared_error},
                         {"lower_bound", r.lower_bound},
                         {"ratio", r.ratio}});
  }
  nlohmann::json j = {{"rows", rows_json}, {"notices", notices}, {"min_ratio", min_ratio}};
  j["slope"] = slope ? nlohmann::json(*slope) : nlohmann::json(nullptr);
  return j;
}

GapReport gap_report(const std::vector<GapInput>& inputs) {
  GapReport report;
  for (const GapInput& in : inputs) {
    if (in.sigma == 0.0) {
      report.notices.push_back("skipped n=" + std::to_string(in.n) + ": sigma = 0 makes the lower bound vanish");
      continue;
    }
    GapRow row{in, lower_bound_value(in.n, in.sigma, in.theta_max, in.m, in.d, in.s, in.s0), 0.0};
    row.ratio = in.squared_error / row.lower_bound;
    report.rows.push_back(row);
  }
  if (report.rows.empty()) return report;
  report.min_ratio = INFINITY;
  double mx = 0, my = 0;
  for (const GapRow& r : report.rows) {
    report.min_ratio = std::min(report.min_ratio, r.ratio);
    mx += std::log(static_cast<double>(r.input.n));
    my += std::log(r.ratio);
  }
  const double k = static_cast<double>(report.rows.size());
  mx /= k;
  my /= k;
  double sxx = 0, sxy = 0;
  for (const GapRow& r : report.rows) {
    const double x = std::log(static_cast<double>(r.input.n)) - mx;
    sxx += x * x;
    sxy += x * (std::log(r.ratio) - my);
  }
  if (sxx > 0) report.slope = sxy / sxx;
  return report;
}

}  // namespace dsparse::lowerbound
