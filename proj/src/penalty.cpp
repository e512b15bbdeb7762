#include "dsparse/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace dsparse::penalty {

namespace {

constexpr double kE = std::numbers::e;

void check_size(Index got, Index expected, const char* what) {
  if (got != expected) {
    fail(ErrorCode::DimensionMismatch, std::string(what) + " has size " + std::to_string(got) +
                                           ", expected " + std::to_string(expected));
  }
}

// Largest ratio of cumulative sorted magnitudes to cumulative weights.
double dual_ratio(const Vector& sorted_magnitudes, const Vector& weights) {
  double best = 0.0;
  double mass = 0.0;
  double budget = 0.0;
  for (Index k = 0; k < sorted_magnitudes.size(); ++k) {
    mass += sorted_magnitudes[k];
    budget += weights[k];
    if (mass <= 0.0) continue;
    if (budget <= 0.0) return std::numeric_limits<double>::infinity();
    best = std::max(best, mass / budget);
  }
  return best;
}

}  // namespace

double norm_l1(const Vector& u) { return u.lpNorm<1>(); }

double norm_l12(const Vector& u, const GroupLayout& layout) { return group_norms(u, layout).sum(); }

void check_weight_order(const Vector& w, const char* what) {
  for (Index i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0)) fail(ErrorCode::WeightOrder, std::string(what) + " has a negative entry");
    if (i > 0 && w[i] > w[i - 1]) {
      fail(ErrorCode::WeightOrder, std::string(what) + " increases at position " + std::to_string(i));
    }
  }
}

double norm_sorted_l1(const Vector& u, const Vector& weights) {
  check_size(weights.size(), u.size(), "weights");
  check_weight_order(weights, "weights");
  return sort_elementwise(u).values.dot(weights);
}

double norm_group_sorted(const Vector& u, const Vector& group_weights, const GroupLayout& layout) {
  check_size(group_weights.size(), layout.m(), "group weights");
  check_weight_order(group_weights, "group weights");
  return sort_elementwise(group_norms(u, layout)).values.dot(group_weights);
}

double dual_norm_sorted_l1(const Vector& z, const Vector& weights) {
  check_size(weights.size(), z.size(), "weights");
  return dual_ratio(sort_elementwise(z).values, weights);
}

double dual_norm_group_sorted(const Vector& z, const Vector& group_weights, const GroupLayout& layout) {
  check_size(group_weights.size(), layout.m(), "group weights");
  return dual_ratio(sort_elementwise(group_norms(z, layout)).values, group_weights);
}

WeightSequences::WeightSequences(Vector group, const GroupLayout& layout, Index s0, double sigma)
    : group_(std::move(group)), s0_(s0), sigma_(sigma) {
  check_size(group_.size(), layout.m(), "group weights");
  if (s0 < 1 || s0 > layout.d()) fail(ErrorCode::BudgetInvalid, "s0 must lie in [1, d]");
  check_weight_order(group_, "group weights");
  element_.resize(layout.p());
  for (Index i = 0; i < layout.p(); ++i) {
    // 0-based i maps to 1-based position i+1; ceil((i+1)/s0) - 1 == i / s0.
    element_[i] = group_[std::min(i / s0, layout.m() - 1)];
  }
}

nlohmann::json WeightSequences::to_json() const {
  return nlohmann::json{{"s0", s0_},
                        {"sigma", sigma_},
                        {"group", std::vector<double>(group_.begin(), group_.end())}};
}

WeightSequences WeightSequences::from_json(const nlohmann::json& j, const GroupLayout& layout) {
  if (!j.is_object() || !j.contains("s0") || !j.contains("group") || !j["group"].is_array()) {
    fail(ErrorCode::ConfigInvalid, "weights need fields s0 and group");
  }
  auto values = j["group"].get<std::vector<double>>();
  Vector group = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
  return WeightSequences(group, layout, j["s0"].get<Index>(), j.value("sigma", 0.0));
}

WeightSequences make_weights(const GroupLayout& layout, Index s0, double sigma) {
  if (s0 < 1 || s0 > layout.d()) fail(ErrorCode::BudgetInvalid, "s0 must lie in [1, d]");
  if (!(sigma >= 0.0)) fail(ErrorCode::InvalidArgument, "sigma must be non-negative");
  const double m = static_cast<double>(layout.m());
  const double d = static_cast<double>(layout.d());
  const double k = static_cast<double>(s0);
  Vector group(layout.m());
  for (Index j = 1; j <= layout.m(); ++j) {
    group[j - 1] = sigma * std::sqrt(std::log(2.0 * kE * d / k) +
                                     (2.0 / k) * std::log(4.0 * kE * m / static_cast<double>(j)));
  }
  return WeightSequences(group, layout, s0, sigma);
}

double norm_combined_star(const Vector& u, const WeightSequences& weights, const GroupLayout& layout) {
  layout.check(u);
  return norm_sorted_l1(u, weights.element()) +
         std::sqrt(static_cast<double>(weights.s0())) * norm_group_sorted(u, weights.group(), layout);
}

double lambda_sharp(double gamma, double sigma, double n, const SparsityBudget& budget,
                    const GroupLayout& layout) {
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorCode::GammaRange, "gamma must lie in (0, 1)");
  if (!(n > 0.0)) fail(ErrorCode::InvalidArgument, "n must be positive");
  const double s = static_cast<double>(budget.s());
  const double s0 = static_cast<double>(budget.s0());
  const double m = static_cast<double>(layout.m());
  const double d = static_cast<double>(layout.d());
  const double level = std::log(2.0 * kE * d / s0) + (2.0 / s0) * std::log(4.0 * kE * m / s);
  return (4.0 + std::numbers::sqrt2) * sigma / (gamma * std::sqrt(n)) * std::sqrt(level);
}

double envelope_N(const Vector& u, const WeightSequences& weights, const GroupLayout& layout, double n) {
  if (!(n > 0.0)) fail(ErrorCode::InvalidArgument, "n must be positive");
  return norm_combined_star(u, weights, layout) / std::sqrt(n);
}

Vector prox_l1(const Vector& x, double threshold) {
  return x.unaryExpr([threshold](double v) {
    return std::copysign(std::max(std::abs(v) - threshold, 0.0), v);
  });
}

Vector prox_group_l2(const Vector& x, double threshold, const GroupLayout& layout) {
  layout.check(x);
  Vector out = x;
  for (Index j = 0; j < layout.m(); ++j) {
    auto block = out.segment(j * layout.d(), layout.d());
    const double norm = block.norm();
    block *= norm > threshold ? 1.0 - threshold / norm : 0.0;
  }
  return out;
}

Vector prox_sparse_group(const Vector& x, double threshold_l1, double threshold_group,
                         const GroupLayout& layout) {
  return prox_group_l2(prox_l1(x, threshold_l1), threshold_group, layout);
}

Vector prox_sorted_l1(const Vector& x, const Vector& weights) {
  check_size(weights.size(), x.size(), "weights");
  const SortedMagnitudes sorted = sort_elementwise(x);
  const Index p = x.size();
  // Pool adjacent violators so the shifted magnitudes become non-increasing.
  struct Block {
    Index start;
    Index length;
    double sum;
  };
  std::vector<Block> stack;
  stack.reserve(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) {
    stack.push_back({i, 1, sorted.values[i] - weights[i]});
    while (stack.size() > 1) {
      const Block& top = stack.back();
      const Block& below = stack[stack.size() - 2];
      if (below.sum * static_cast<double>(top.length) > top.sum * static_cast<double>(below.length)) break;
      Block merged{below.start, below.length + top.length, below.sum + top.sum};
      stack.pop_back();
      stack.back() = merged;
    }
  }
  Vector out = Vector::Zero(p);
  for (const Block& block : stack) {
    const double value = std::max(block.sum / static_cast<double>(block.length), 0.0);
    for (Index k = block.start; k < block.start + block.length; ++k) {
      const Index i = sorted.order[static_cast<std::size_t>(k)];
      out[i] = std::copysign(value, x[i]);
    }
  }
  return out;
}

Vector prox_group_sorted(const Vector& x, const Vector& group_weights, const GroupLayout& layout) {
  layout.check(x);
  const Vector norms = group_norms(x, layout);
  const Vector shrunk = prox_sorted_l1(norms, group_weights);
  Vector out = x;
  for (Index j = 0; j < layout.m(); ++j) {
    out.segment(j * layout.d(), layout.d()) *= norms[j] > 0.0 ? shrunk[j] / norms[j] : 0.0;
  }
  return out;
}

CombinedProxResult prox_combined(const Vector& x, const Vector& elem_weights, const Vector& group_weights,
                                 const GroupLayout& layout, const ProxOptions& options,
                                 CombinedProxState* state) {
  layout.check(x);
  check_size(elem_weights.size(), layout.p(), "element weights");
  check_size(group_weights.size(), layout.m(), "group weights");
  check_weight_order(elem_weights, "element weights");
  check_weight_order(group_weights, "group weights");

  CombinedProxState local;
  CombinedProxState& dual = state ? *state : local;
  if (dual.elem_dual.size() != layout.p()) dual.elem_dual = Vector::Zero(layout.p());
  if (dual.group_dual.size() != layout.p()) dual.group_dual = Vector::Zero(layout.p());

  auto certify = [&](const Vector& a, const Vector& b) {
    const double scale_a = std::max(1.0, dual_norm_sorted_l1(a, elem_weights));
    const double scale_b = std::max(1.0, dual_norm_group_sorted(b, group_weights, layout));
    const Vector fa = a / scale_a;
    const Vector fb = b / scale_b;
    const Vector u = x - fa - fb;
    const double gap_a = sort_elementwise(u).values.dot(elem_weights) - u.dot(fa);
    const double gap_b = sort_elementwise(group_norms(u, layout)).values.dot(group_weights) - u.dot(fb);
    return std::max(gap_a, 0.0) + std::max(gap_b, 0.0);
  };

  // Accelerated projected gradient on the group dual b, minimising
  // 0.5 * ||prox_f(x - b)||^2 over the group dual ball, with restarts.
  CombinedProxResult result;
  Vector& a = dual.elem_dual;
  Vector& b = dual.group_dual;
  Vector u = prox_sorted_l1(x - b, elem_weights);
  Vector y = b;
  double momentum = 1.0;
  double previous = std::numeric_limits<double>::infinity();
  int quiet = 0;
  const double floor = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + x.norm());
  for (int k = 1; k <= options.max_iters; ++k) {
    result.iterations = k;
    const Vector v = y + prox_sorted_l1(x - y, elem_weights);
    Vector next_b = v - prox_group_sorted(v, group_weights, layout);
    Vector next_u = prox_sorted_l1(x - next_b, elem_weights);
    const double objective = 0.5 * next_u.squaredNorm();
    if (objective > previous) {
      momentum = 1.0;
      y = b;
      previous = std::numeric_limits<double>::infinity();
      continue;
    }
    previous = objective;
    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    y = next_b + ((momentum - 1.0) / next_momentum) * (next_b - b);
    momentum = next_momentum;
    const double change = (next_u - u).norm();
    b = std::move(next_b);
    u = std::move(next_u);
    quiet = change <= floor ? quiet + 1 : 0;
    if (quiet >= 2) break;
  }
  a = x - b - u;
  result.gap = certify(a, b);
  // The gap cannot be resolved below the rounding level of the penalty values.
  const double resolvable = 64.0 * std::numeric_limits<double>::epsilon() *
                            (1.0 + x.squaredNorm() + elem_weights.lpNorm<1>() * x.lpNorm<Eigen::Infinity>());
  result.converged = result.gap <= std::max(options.tol, resolvable);
  result.point = std::move(u);
  return result;
}

Vector prox_combined_star(const Vector& x, double t, const WeightSequences& weights,
                          const GroupLayout& layout, const ProxOptions& options) {
  if (!(t >= 0.0)) fail(ErrorCode::InvalidArgument, "prox step must be non-negative");
  const Vector elem = t * weights.element();
  const Vector group = t * std::sqrt(static_cast<double>(weights.s0())) * weights.group();
  CombinedProxResult result = prox_combined(x, elem, group, layout, options);
  if (!result.converged) {
    fail(ErrorCode::NoConvergence, "combined prox gap " + std::to_string(result.gap) + " after " +
                                       std::to_string(result.iterations) + " iterations");
  }
  return result.point;
}

Penalty Penalty::l1(double lambda, const GroupLayout& layout) {
  return sparse_group(lambda, 0.0, layout);
}

Penalty Penalty::group_l2(double lambda_g, const GroupLayout& layout) {
  return sparse_group(0.0, lambda_g, layout);
}

Penalty Penalty::sparse_group(double lambda, double lambda_g, const GroupLayout& layout) {
  if (!(lambda >= 0.0) || !(lambda_g >= 0.0)) {
    fail(ErrorCode::InvalidArgument, "penalty levels must be non-negative");
  }
  PenaltyKind kind = PenaltyKind::SparseGroup;
  if (lambda_g == 0.0) kind = PenaltyKind::L1;
  else if (lambda == 0.0) kind = PenaltyKind::GroupL2;
  Penalty out(kind, layout);
  out.lambda_ = lambda;
  out.lambda_g_ = lambda_g;
  return out;
}

Penalty Penalty::sorted_l1(Vector weights, const GroupLayout& layout) {
  check_size(weights.size(), layout.p(), "weights");
  check_weight_order(weights, "weights");
  Penalty out(PenaltyKind::SortedL1, layout);
  out.elem_ = std::move(weights);
  return out;
}

Penalty Penalty::group_sorted(Vector group_weights, const GroupLayout& layout) {
  check_size(group_weights.size(), layout.m(), "group weights");
  check_weight_order(group_weights, "group weights");
  Penalty out(PenaltyKind::GroupSorted, layout);
  out.group_ = std::move(group_weights);
  return out;
}

Penalty Penalty::combined(Vector elem_weights, Vector group_weights, const GroupLayout& layout) {
  check_size(elem_weights.size(), layout.p(), "element weights");
  check_size(group_weights.size(), layout.m(), "group weights");
  check_weight_order(elem_weights, "element weights");
  check_weight_order(group_weights, "group weights");
  Penalty out(PenaltyKind::Combined, layout);
  out.elem_ = std::move(elem_weights);
  out.group_ = std::move(group_weights);
  return out;
}

Penalty Penalty::combined_star(const WeightSequences& weights, const GroupLayout& layout, double scale) {
  if (!(scale >= 0.0)) fail(ErrorCode::InvalidArgument, "scale must be non-negative");
  return combined(scale * weights.element(),
                  scale * std::sqrt(static_cast<double>(weights.s0())) * weights.group(), layout);
}

double Penalty::value(const Vector& u) const {
  layout_.check(u);
  switch (kind_) {
    case PenaltyKind::L1:
    case PenaltyKind::GroupL2:
    case PenaltyKind::SparseGroup:
      return lambda_ * norm_l1(u) + lambda_g_ * norm_l12(u, layout_);
    case PenaltyKind::SortedL1:
      return sort_elementwise(u).values.dot(elem_);
    case PenaltyKind::GroupSorted:
      return sort_elementwise(group_norms(u, layout_)).values.dot(group_);
    case PenaltyKind::Combined:
      return sort_elementwise(u).values.dot(elem_) +
             sort_elementwise(group_norms(u, layout_)).values.dot(group_);
  }
  return 0.0;
}

Vector Penalty::prox(const Vector& x, double t, CombinedProxState* state, const ProxOptions& options) const {
  layout_.check(x);
  switch (kind_) {
    case PenaltyKind::L1:
    case PenaltyKind::GroupL2:
    case PenaltyKind::SparseGroup:
      return prox_sparse_group(x, t * lambda_, t * lambda_g_, layout_);
    case PenaltyKind::SortedL1:
      return prox_sorted_l1(x, t * elem_);
    case PenaltyKind::GroupSorted:
      return prox_group_sorted(x, t * group_, layout_);
    case PenaltyKind::Combined:
      return prox_combined(x, t * elem_, t * group_, layout_, options, state).point;
  }
  return x;
}

}  // namespace dsparse::penalty
