#include "dsparse/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dsparse/conditions.hpp"
#include "dsparse/solver.hpp"

namespace dsparse::experiment {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCsvHeader = "n,replicate,error,rate,lower_bound,theta_max,kkt_residual,iterations,converged";

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

Vector draw_beta_star(const GroupLayout& layout, const SparsityBudget& budget, Rng& rng) {
  const IndexSet set = sample_family({Family::S2, budget}, layout, rng);
  std::bernoulli_distribution coin(0.5);
  Vector beta = Vector::Zero(layout.p());
  const double value = 1.0 / std::sqrt(static_cast<double>(budget.s0()));
  for (Index i : set.elements) beta[i] = coin(rng) ? value : -value;
  return beta;
}

template <class T>
T required(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) fail(ErrorCode::ConfigInvalid, std::string("config is missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::ConfigInvalid, std::string("config field '") + key + "' has the wrong type");
  }
}

template <class T>
T optional_field(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? required<T>(j, key) : fallback;
}

}  // namespace

std::string to_string(Estimator e) { return e == Estimator::SgLasso ? "sglasso" : "sgslope"; }

Estimator estimator_from_string(const std::string& name) {
  if (name == "sglasso") return Estimator::SgLasso;
  if (name == "sgslope") return Estimator::SgSlope;
  fail(ErrorCode::ConfigInvalid, "unknown estimator '" + name + "'");
}

std::string full_precision(double v) { return fmt("%.17g", v); }

void ExperimentConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::ConfigInvalid, what);
  };
  need(version == kConfigVersion, "unsupported config version " + std::to_string(version));
  need(m > 0 && d > 0, "m and d must be positive");
  need(s >= 1 && s <= m && s0 >= 1 && s0 <= d, "need 1 <= s <= m and 1 <= s0 <= d");
  need(!n_grid.empty(), "n_grid must not be empty");
  for (Index n : n_grid) need(n > 0, "every n must be positive");
  need(sigma >= 0.0 && std::isfinite(sigma), "sigma must be non-negative");
  need(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  need(!delta0 || (*delta0 > 0.0 && *delta0 < 1.0), "delta0 must lie in (0, 1)");
  need(alpha >= 0.5, "alpha must be at least 1/2");
  need(replicates > 0, "replicates must be positive");
  need(!output_dir.empty(), "output_dir must not be empty");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j = {{"version", version},     {"m", m},
                      {"d", d},                 {"n_grid", n_grid},
                      {"s", s},                 {"s0", s0},
                      {"sigma", sigma},         {"gamma", gamma},
                      {"estimator", to_string(estimator)},
                      {"design", randomdesign::to_string(design)},
                      {"alpha", alpha},         {"replicates", replicates},
                      {"seed", seed},           {"output_dir", output_dir}};
  j["delta0"] = delta0 ? nlohmann::json(*delta0) : nlohmann::json(nullptr);
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::ConfigInvalid, "config must be a JSON object");
  ExperimentConfig c;
  c.version = required<int>(j, "version");
  if (c.version != kConfigVersion) fail(ErrorCode::ConfigInvalid, "unsupported config version " + std::to_string(c.version));
  c.m = required<Index>(j, "m");
  c.d = required<Index>(j, "d");
  c.n_grid = required<std::vector<Index>>(j, "n_grid");
  c.s = required<Index>(j, "s");
  c.s0 = required<Index>(j, "s0");
  c.sigma = required<double>(j, "sigma");
  c.gamma = optional_field<double>(j, "gamma", c.gamma);
  if (j.contains("delta0") && !j.at("delta0").is_null()) c.delta0 = required<double>(j, "delta0");
  c.estimator = estimator_from_string(optional_field<std::string>(j, "estimator", "sglasso"));
  try {
    c.design = randomdesign::ensemble_from_string(optional_field<std::string>(j, "design", "gaussian"));
  } catch (const Error& e) {
    fail(ErrorCode::ConfigInvalid, e.what());
  }
  c.alpha = optional_field<double>(j, "alpha", c.alpha);
  c.replicates = optional_field<std::uint64_t>(j, "replicates", c.replicates);
  c.seed = optional_field<std::uint64_t>(j, "seed", c.seed);
  c.output_dir = optional_field<std::string>(j, "output_dir", c.output_dir);
  c.validate();
  return c;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) fail(ErrorCode::InvalidArgument, "slope needs two or more points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
  }
  if (sxx == 0.0) fail(ErrorCode::InvalidArgument, "slope needs distinct x values");
  return sxy / sxx;
}

ExperimentResult run_sweep(const ExperimentConfig& config, int jobs) {
  config.validate();
  const GroupLayout layout(config.m, config.d);
  const SparsityBudget budget(config.s, config.s0, layout);
  const std::size_t reps = config.replicates;
  const std::size_t total = config.n_grid.size() * reps;

  ExperimentResult result;
  result.config = config;
  result.rows.resize(total);
  parallel_for(total, jobs, [&](std::size_t task) {
    const std::size_t k = task / reps;
    const std::uint64_t r = task % reps;
    const Index n = config.n_grid[k];
    Rng rng = make_stream(config.seed, (static_cast<std::uint64_t>(k) << 32) + r);

    randomdesign::DesignEnsemble ensemble;
    ensemble.kind = config.design;
    ensemble.n = n;
    ensemble.layout = layout;
    ensemble.alpha = config.alpha;
    ensemble.seed = rng();
    const Matrix X = randomdesign::generate(ensemble);
    const Vector beta_star = draw_beta_star(layout, budget, rng);
    const Vector y = X * beta_star + config.sigma * standard_normal(n, rng);

    const solver::RegressionProblem problem{y, X, layout, config.sigma};
    const solver::TheoreticalTuning tuning = solver::theoretical_tuning(problem, budget, config.gamma, config.delta0);
    const penalty::Penalty h = config.estimator == Estimator::SgLasso ? tuning.sglasso(layout) : tuning.sgslope(layout);
    const solver::FitResult fit = solver::fit(problem, h);

    ReplicateRow& row = result.rows[task];
    row.n = n;
    row.replicate = r;
    row.error = (fit.beta_hat - beta_star).norm();
    row.rate = solver::theoretical_rate(config.sigma, static_cast<double>(n), budget, layout, config.gamma, config.delta0).value;
    row.theta_max = conditions::check_sgnorm(X, layout, config.s0).value;
    row.lower_bound = lowerbound::lower_bound_value(n, config.sigma, row.theta_max, config.m, config.d, config.s, config.s0);
    row.kkt_residual = fit.kkt_residual;
    row.iterations = fit.iterations;
    row.converged = fit.converged;
  });

  std::vector<lowerbound::GapInput> gap_inputs;
  std::vector<double> ns, medians;
  std::vector<std::vector<double>> errors_by_n(config.n_grid.size());
  for (std::size_t k = 0; k < config.n_grid.size(); ++k) {
    std::vector<double> errors, thetas;
    double squared = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const ReplicateRow& row = result.rows[k * reps + r];
      errors.push_back(row.error);
      thetas.push_back(row.theta_max);
      squared += row.error * row.error;
    }
    SweepPoint p;
    p.n = config.n_grid[k];
    p.median_error = median(errors);
    p.q25 = quantile(errors, 0.25);
    p.q75 = quantile(errors, 0.75);
    p.rate = result.rows[k * reps].rate;
    p.median_theta_max = median(thetas);
    p.constant = p.rate > 0 ? p.median_error / p.rate : 0.0;
    result.points.push_back(p);
    gap_inputs.push_back({p.n, config.sigma, p.median_theta_max, config.m, config.d, config.s, config.s0,
                          squared / static_cast<double>(reps)});
    ns.push_back(static_cast<double>(p.n));
    medians.push_back(p.median_error);
    errors_by_n[k] = std::move(errors);
  }
  result.gap = lowerbound::gap_report(gap_inputs);

  std::vector<double> constants;
  for (const SweepPoint& p : result.points) constants.push_back(p.constant);
  result.fitted_constant = median(constants);

  const bool positive = std::all_of(medians.begin(), medians.end(), [](double v) { return v > 0.0; });
  std::vector<double> distinct = ns;
  std::sort(distinct.begin(), distinct.end());
  if (positive && std::unique(distinct.begin(), distinct.end()) - distinct.begin() >= 2) {
    result.slope = loglog_slope(ns, medians);
    // Bootstrap over replicates within each n.
    Rng rng = make_stream(config.seed, 0xB0075742ULL);
    std::uniform_int_distribution<std::size_t> pick(0, reps - 1);
    std::vector<double> slopes;
    for (int b = 0; b < 400; ++b) {
      std::vector<double> boot;
      for (const auto& errors : errors_by_n) {
        std::vector<double> sample(reps);
        for (double& v : sample) v = errors[pick(rng)];
        boot.push_back(median(sample));
      }
      if (std::all_of(boot.begin(), boot.end(), [](double v) { return v > 0.0; })) slopes.push_back(loglog_slope(ns, boot));
    }
    if (!slopes.empty()) {
      result.slope_lower = quantile(slopes, 0.025);
      result.slope_upper = quantile(slopes, 0.975);
    }
  }
  return result;
}

nlohmann::json ExperimentResult::summary_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const SweepPoint& p : points) {
    pts.push_back({{"n", p.n},
                   {"median_error", p.median_error},
                   {"q25", p.q25},
                   {"q75", p.q75},
                   {"rate", p.rate},
                   {"median_theta_max", p.median_theta_max},
                   {"constant", p.constant}});
  }
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"config", config.to_json()},
          {"points", std::move(pts)},
          {"slope", opt(slope)},
          {"slope_ci95", {opt(slope_lower), opt(slope_upper)}},
          {"fitted_constant", fitted_constant},
          {"gap", gap.to_json()}};
}

void write_artifacts(const ExperimentResult& result, const fs::path& dir) {
  fs::create_directories(dir / "plotdata");
  {
    std::ofstream csv(dir / "results.csv");
    csv << kCsvHeader << '\n';
    for (const ReplicateRow& r : result.rows) {
      csv << r.n << ',' << r.replicate << ',' << full_precision(r.error) << ',' << full_precision(r.rate) << ','
          << full_precision(r.lower_bound) << ',' << full_precision(r.theta_max) << ',' << full_precision(r.kkt_residual)
          << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << '\n';
    }
  }
  {
    // nlohmann dumps doubles with round-trip precision.
    std::ofstream summary(dir / "summary.json");
    summary << result.summary_json().dump(2) << '\n';
  }
  auto write_dat = [&](const char* name, auto value) {
    std::ofstream dat(dir / "plotdata" / name);
    for (const SweepPoint& p : result.points) dat << p.n << ' ' << full_precision(value(p)) << '\n';
  };
  write_dat("median_error.dat", [](const SweepPoint& p) { return p.median_error; });
  write_dat("rate.dat", [](const SweepPoint& p) { return p.rate; });
  write_dat("constant.dat", [](const SweepPoint& p) { return p.constant; });
  std::ofstream gap(dir / "plotdata" / "gap_ratio.dat");
  for (const lowerbound::GapRow& r : result.gap.rows) gap << r.input.n << ' ' << full_precision(r.ratio) << '\n';
}

fs::path run_experiment(const ExperimentConfig& config, int jobs) {
  const ExperimentResult result = run_sweep(config, jobs);
  const fs::path dir(config.output_dir);
  write_artifacts(result, dir);
  return dir;
}

std::string emit_report(const fs::path& dir) {
  const fs::path csv_path = dir / "results.csv";
  const fs::path summary_path = dir / "summary.json";
  for (const fs::path& p : {csv_path, summary_path}) {
    if (!fs::exists(p)) fail(ErrorCode::MissingArtifact, "missing artifact " + p.string());
  }

  std::ifstream csv(csv_path);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(csv, line) || line != kCsvHeader) {
    fail(ErrorCode::ParseError, csv_path.string() + ":1: unexpected header");
  }
  std::size_t rows = 0, unconverged = 0;
  double worst_kkt = 0.0;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 9) {
      fail(ErrorCode::ParseError, csv_path.string() + ":" + std::to_string(line_no) + ": expected 9 fields, got " +
                                      std::to_string(fields.size()));
    }
    std::vector<double> values;
    for (const std::string& f : fields) {
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size()) {
        fail(ErrorCode::ParseError, csv_path.string() + ":" + std::to_string(line_no) + ": not a number '" + f + "'");
      }
      values.push_back(v);
    }
    ++rows;
    worst_kkt = std::max(worst_kkt, values[6]);
    unconverged += values[8] == 0.0;
  }

  nlohmann::json summary;
  try {
    std::ifstream in(summary_path);
    summary = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, summary_path.string() + ": " + e.what());
  }
  const nlohmann::json& c = summary.at("config");
  std::ostringstream out;
  out << "Double-sparse regression sweep\n";
  out << "estimator " << c.at("estimator").get<std::string>() << ", design " << c.at("design").get<std::string>()
      << ", (m, d, s, s0) = (" << c.at("m") << ", " << c.at("d") << ", " << c.at("s") << ", " << c.at("s0")
      << "), sigma " << fmt("%.4g", c.at("sigma").get<double>()) << ", gamma " << fmt("%.4g", c.at("gamma").get<double>())
      << "\n";
  out << "replicates per n " << c.at("replicates") << ", seed " << c.at("seed") << ", rows " << rows
      << ", unconverged fits " << unconverged << ", worst kkt " << fmt("%.3g", worst_kkt) << "\n\n";

  std::map<Index, double> ratio_by_n;
  for (const auto& r : summary.at("gap").at("rows")) ratio_by_n[r.at("n").get<Index>()] = r.at("ratio").get<double>();
  out << "       n   median error   IQR                     rate        error/rate   theta_max   gap ratio\n";
  for (const auto& p : summary.at("points")) {
    const Index n = p.at("n").get<Index>();
    char buf[256];
    const auto ratio = ratio_by_n.find(n);
    std::snprintf(buf, sizeof buf, "%8lld   %-12.4g   [%-10.4g, %-10.4g]   %-10.4g  %-10.4g   %-9.4g   %s\n",
                  static_cast<long long>(n), p.at("median_error").get<double>(), p.at("q25").get<double>(),
                  p.at("q75").get<double>(), p.at("rate").get<double>(), p.at("constant").get<double>(),
                  p.at("median_theta_max").get<double>(),
                  ratio == ratio_by_n.end() ? "-" : fmt("%.4g", ratio->second).c_str());
    out << buf;
  }
  out << "\n";

  const nlohmann::json& slope = summary.at("slope");
  const nlohmann::json& ci = summary.at("slope_ci95");
  if (slope.is_null()) {
    out << "slope: not available\n";
  } else {
    out << "slope of log median error on log n: " << fmt("%.4f", slope.get<double>());
    if (!ci.at(0).is_null()) {
      out << " (95% bootstrap CI " << fmt("%.4f", ci.at(0).get<double>()) << " to " << fmt("%.4f", ci.at(1).get<double>())
          << ")";
    }
    out << "\n";
  }
  out << "fitted constant C (median error / rate): " << fmt("%.4g", summary.at("fitted_constant").get<double>()) << "\n";
  const nlohmann::json& gap = summary.at("gap");
  for (const auto& notice : gap.at("notices")) out << "notice: " << notice.get<std::string>() << "\n";

  out << "\nchecks\n";
  auto verdict = [&](const std::string& name, std::optional<bool> ok) {
    out << "  " << name << ": " << (!ok ? "n/a" : *ok ? "PASS" : "FAIL") << "\n";
  };
  verdict("slope within -0.5 +/- 0.1",
          slope.is_null() ? std::nullopt : std::optional<bool>(std::abs(slope.get<double>() + 0.5) <= 0.1));
  verdict("gap ratios >= 1", gap.at("rows").empty() ? std::nullopt
                                                     : std::optional<bool>(gap.at("min_ratio").get<double>() >= 1.0));
  verdict("gap ratio slope within +/- 0.15",
          gap.at("slope").is_null() ? std::nullopt : std::optional<bool>(std::abs(gap.at("slope").get<double>()) <= 0.15));
  return out.str();
}

}  // namespace dsparse::experiment
