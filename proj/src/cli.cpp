#include "dsparse/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dsparse/conditions.hpp"
#include "dsparse/experiment.hpp"
#include "dsparse/lowerbound.hpp"
#include "dsparse/randomdesign.hpp"
#include "dsparse/solver.hpp"
#include "dsparse/stochastic.hpp"

namespace dsparse::cli {

namespace fs = std::filesystem;

namespace {

std::string full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

GroupLayout parse_layout(const std::string& text) {
  Index m = 0, d = 0;
  char comma = 0;
  std::istringstream in(text);
  if (!(in >> m >> comma >> d) || comma != ',' || !(in >> std::ws).eof() || m <= 0 || d <= 0) {
    fail(ErrorCode::ConfigInvalid, "layout must be m,d with positive integers, got '" + text + "'");
  }
  return GroupLayout(m, d);
}

void emit_json(const nlohmann::json& j, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << j.dump(2) << '\n';
    return;
  }
  std::ofstream file(path);
  if (!file) fail(ErrorCode::ConfigInvalid, "cannot write " + path);
  file << j.dump(2) << '\n';
}

fs::path prepare_dir(const std::string& dir) {
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  if (!file) fail(ErrorCode::ConfigInvalid, "cannot write " + path.string());
  file << text;
}

struct Common {
  std::uint64_t seed = 0;
  int jobs = 1;
  bool check = false;
};

struct FitArgs {
  std::string matrix, response, layout, estimator = "sglasso", output;
  Index s = 1, s0 = 1;
  std::optional<double> sigma, delta0, lambda, lambda_g;
  double gamma = 0.5;
  int max_iters = 20'000;
  double tol = 1e-8;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const GroupLayout layout = parse_layout(a.layout);
  const Matrix X = read_matrix(a.matrix);
  const Matrix Y = read_matrix(a.response);
  if (Y.cols() != 1 && Y.rows() != 1) fail(ErrorCode::DimensionMismatch, "response must be a single row or column");
  const Vector y = Y.cols() == 1 ? Vector(Y.col(0)) : Vector(Y.row(0).transpose());
  if (X.cols() != layout.p() || X.rows() != y.size()) {
    fail(ErrorCode::DimensionMismatch, "design is " + std::to_string(X.rows()) + "x" + std::to_string(X.cols()) +
                                           ", response has " + std::to_string(y.size()) + " entries, layout p = " +
                                           std::to_string(layout.p()));
  }
  const experiment::Estimator estimator = experiment::estimator_from_string(a.estimator);
  const solver::RegressionProblem problem{y, X, layout, a.sigma};

  nlohmann::json tuning_json;
  std::optional<penalty::Penalty> h;
  if (a.lambda || a.lambda_g) {
    if (!a.lambda || !a.lambda_g || estimator != experiment::Estimator::SgLasso) {
      fail(ErrorCode::ConfigInvalid, "manual tuning needs both --lambda and --lambda-g with the sglasso estimator");
    }
    h = penalty::Penalty::sparse_group(*a.lambda, *a.lambda_g, layout);
    tuning_json = {{"mode", "manual"}, {"lambda", *a.lambda}, {"lambda_g", *a.lambda_g}};
  } else {
    const SparsityBudget budget(a.s, a.s0, layout);
    const solver::TheoreticalTuning t = solver::theoretical_tuning(problem, budget, a.gamma, a.delta0);
    h = estimator == experiment::Estimator::SgLasso ? t.sglasso(layout) : t.sgslope(layout);
    tuning_json = {{"mode", "theoretical"}, {"lambda_sharp", t.lambda_sharp}, {"lambda", t.lambda},
                   {"lambda_g", t.lambda_g},  {"gamma", t.gamma},               {"delta0", t.delta0},
                   {"slope_scale", t.slope_scale}};
  }
  solver::SolverConfig config;
  config.max_iters = a.max_iters;
  config.tol = a.tol;
  const solver::FitResult fit = solver::fit(problem, *h, config);
  nlohmann::json j = fit.to_json();
  // Wall time would break byte-for-byte reproducibility of the output.
  err << "fit took " << fit.elapsed << " s\n";
  j.erase("elapsed");
  j["estimator"] = a.estimator;
  j["tuning"] = tuning_json;
  emit_json(j, a.output, out);
  return fit.converged ? kExitOk : kExitNumerical;
}

struct ConditionArgs {
  std::string matrix, layout, mode = "exact", condition = "all", output;
  Index s = 1, s0 = 1;
  double c0 = 1.0;
  std::uint64_t samples = 2000;
  int restarts = 32;
};

int cmd_check_conditions(const ConditionArgs& a, const Common& c, std::ostream& out) {
  const GroupLayout layout = parse_layout(a.layout);
  const Matrix X = read_matrix(a.matrix);
  if (X.cols() != layout.p()) fail(ErrorCode::DimensionMismatch, "matrix columns do not match the layout");
  const SparsityBudget budget(a.s, a.s0, layout);
  const bool all = a.condition == "all";
  nlohmann::json j = nlohmann::json::object();

  if (all || a.condition == "sgnorm") {
    conditions::SGNormOptions o;
    o.mode = a.mode == "exact" ? conditions::SGNormMode::Exact
             : a.mode == "sampled" ? conditions::SGNormMode::Sampled
                                   : conditions::SGNormMode::FrobeniusBound;
    o.samples = a.samples;
    o.seed = c.seed;
    o.jobs = c.jobs;
    j["sgnorm"] = conditions::check_sgnorm(X, layout, a.s0, o).to_json();
  }
  conditions::EigenvalueOptions eo;
  eo.restarts = a.restarts;
  eo.mc_samples = a.samples;
  eo.seed = c.seed;
  eo.jobs = c.jobs;
  auto cone = [&](conditions::Cone kind, const char* key) {
    conditions::ConeSpec spec{kind, budget, a.c0, std::nullopt};
    // The cone is invariant to the scale of the weights.
    if (kind == conditions::Cone::WSGRE) spec.weights = penalty::make_weights(layout, a.s0, 1.0);
    j[key] = conditions::estimate_cone_eigenvalue(X, spec, layout, eo).to_json();
  };
  if (all || a.condition == "ssgre") cone(conditions::Cone::SSGRE, "ssgre");
  if (all || a.condition == "wsgre") cone(conditions::Cone::WSGRE, "wsgre");
  if (all || a.condition == "dsre") {
    j["dsre"] = a.mode == "exact" ? conditions::exact_ds_eigenvalue(X, budget, layout, eo.cap, c.jobs).to_json()
                                  : conditions::estimate_cone_eigenvalue(
                                        X, {conditions::Cone::DS, budget, a.c0, std::nullopt}, layout, eo)
                                        .to_json();
  }
  emit_json(j, a.output, out);
  return kExitOk;
}

struct StochasticArgs {
  std::string matrix, layout = "8,6", suite = "both", psi1 = "exact", output_dir;
  Index n = 0, s = 2, s0 = 2;  // n = 0 means p
  double sigma = 1.0;
  std::uint64_t trials = 2000, draws = 200, directions = 10'000;
  std::vector<double> delta0 = {0.05, 0.2};
};

int cmd_simulate_stochastic(const StochasticArgs& a, const Common& c, std::ostream& out) {
  const GroupLayout layout = parse_layout(a.layout);
  const SparsityBudget budget(a.s, a.s0, layout);
  const Index rows = a.n > 0 ? a.n : layout.p();
  const Matrix X = a.matrix.empty() ? randomdesign::orthonormal_design(rows, layout.p(), c.seed) : read_matrix(a.matrix);
  if (X.cols() != layout.p()) fail(ErrorCode::DimensionMismatch, "matrix columns do not match the layout");
  const fs::path dir = prepare_dir(a.output_dir);
  nlohmann::json summary = {{"layout", layout}, {"s", a.s}, {"s0", a.s0}, {"sigma", a.sigma}, {"seed", c.seed}};
  bool ok = true;

  if (a.suite == "tail" || a.suite == "both") {
    stochastic::SuiteOptions o;
    o.trials = a.trials;
    o.seed = c.seed;
    o.jobs = c.jobs;
    o.mode = a.psi1 == "greedy" ? stochastic::Psi1Mode::Greedy : stochastic::Psi1Mode::Exact;
    const stochastic::TailReport r = stochastic::tail_suite(X, layout, budget, a.sigma, o);
    std::string csv = "trial,psi1,psi2,omega\n";
    for (const stochastic::TailRow& row : r.rows) {
      csv += std::to_string(row.trial) + ',' + full(row.psi1) + ',' + full(row.psi2) + ',' + (row.omega ? "1" : "0") + '\n';
    }
    write_text(dir / "results.csv", csv);
    summary["tail"] = r.to_json();
    ok = ok && r.psi1.within_upper() && r.psi2.within_upper() && r.omega.within_lower();
  }
  if (a.suite == "gauss" || a.suite == "both") {
    stochastic::GaussOptions o;
    o.draws = a.draws;
    o.directions = a.directions;
    o.delta0 = a.delta0;
    o.seed = c.seed;
    o.jobs = c.jobs;
    const stochastic::GaussBoundReport r =
        stochastic::gauss_bound_suite(X, layout, penalty::make_weights(layout, a.s0, a.sigma), a.sigma, o);
    std::string csv = "draw,omega,sampled,adversarial,dual,sup\n";
    for (const stochastic::GaussRow& row : r.rows) {
      csv += std::to_string(row.draw) + ',' + (row.omega ? "1" : "0") + ',' + full(row.sampled) + ',' +
             full(row.adversarial) + ',' + full(row.dual) + ',' + full(std::max(row.sampled, row.adversarial)) + '\n';
    }
    write_text(dir / "gauss.csv", csv);
    summary["gauss"] = r.to_json();
    ok = ok && r.violations == 0;
    for (const stochastic::ConcentrationResult& cr : r.concentration) ok = ok && cr.violations.within_upper();
  }
  summary["checks_pass"] = ok;
  write_text(dir / "summary.json", summary.dump(2) + '\n');
  out << "wrote " << dir.string() << (ok ? " (checks pass)" : " (checks fail)") << '\n';
  return c.check && !ok ? kExitAcceptance : kExitOk;
}

struct PackingArgs {
  std::string layout = "8,8", matrix, output;
  Index s = 2, s0 = 2;
  std::uint64_t exhaustive_limit = 100'000, max_candidates = 200'000;
  std::size_t max_size = 2'000;
};

int cmd_packing(const PackingArgs& a, const Common& c, std::ostream& out) {
  const GroupLayout layout = parse_layout(a.layout);
  lowerbound::PackingOptions o;
  o.seed = c.seed;
  o.jobs = c.jobs;
  o.exhaustive_limit = a.exhaustive_limit;
  o.max_candidates = a.max_candidates;
  o.max_size = a.max_size;
  lowerbound::PackingSet set = lowerbound::build_packing(layout.m(), layout.d(), a.s, a.s0, o);
  bool ok = set.meets_target() && set.min_hamming >= 1;
  if (!a.matrix.empty()) {
    const Matrix X = read_matrix(a.matrix);
    if (X.cols() != layout.p()) fail(ErrorCode::DimensionMismatch, "matrix columns do not match the layout");
    set = lowerbound::sign_packing(set, X);
    ok = ok && set.design_bound_holds();
  }
  emit_json(set.to_json(), a.output, out);
  return c.check && !ok ? kExitAcceptance : kExitOk;
}

struct RandomDesignArgs {
  std::string ensemble = "gaussian", layout = "6,4", condition = "sgnorm", output_dir;
  Index s = 2, s0 = 2;
  double alpha = 0.5, kappa1 = 0.0, theta = 0.5, kappa_min = 0.5, c0 = 1.0;
  std::vector<Index> n_grid = {4, 8, 16, 33, 66, 100, 165};
  std::uint64_t reps = 40;
};

conditions::Condition condition_from_string(const std::string& name) {
  if (name == "sgnorm") return conditions::Condition::SGNorm;
  if (name == "ssgre") return conditions::Condition::SSGRE;
  if (name == "wsgre") return conditions::Condition::WSGRE;
  return conditions::Condition::DSRE;
}

int cmd_random_design(const RandomDesignArgs& a, const Common& c, std::ostream& out) {
  randomdesign::DesignEnsemble e;
  try {
    e.kind = randomdesign::ensemble_from_string(a.ensemble);
  } catch (const Error& ex) {
    fail(ErrorCode::ConfigInvalid, ex.what());
  }
  e.layout = parse_layout(a.layout);
  e.alpha = a.alpha;
  e.kappa1 = a.kappa1;
  randomdesign::PhaseOptions o;
  o.condition = condition_from_string(a.condition);
  o.s = a.s;
  o.s0 = a.s0;
  o.c0 = a.c0;
  o.theta = a.theta;
  o.kappa_min = a.kappa_min;
  o.reps = a.reps;
  o.seed = c.seed;
  o.jobs = c.jobs;
  const randomdesign::PhaseDiagram diagram = randomdesign::phase_diagram(e, a.n_grid, o);

  const fs::path dir = prepare_dir(a.output_dir);
  std::string csv = "n,successes,trials,rate,lower,upper,rate_quantity\n";
  for (const randomdesign::PhasePoint& p : diagram.points) {
    csv += std::to_string(p.n) + ',' + std::to_string(p.success.count) + ',' + std::to_string(p.success.trials) + ',' +
           full(p.success.rate) + ',' + full(p.success.lower) + ',' + full(p.success.upper) + ',' +
           full(p.rate_quantity) + '\n';
  }
  write_text(dir / "phase.csv", csv);
  const bool ok = diagram.monotone && diagram.first_n_at_90 &&
                  static_cast<double>(*diagram.first_n_at_90) <= 10.0 * diagram.rate_quantity;
  nlohmann::json summary = diagram.to_json();
  summary["checks_pass"] = ok;
  write_text(dir / "summary.json", summary.dump(2) + '\n');
  out << "wrote " << dir.string() << (ok ? " (checks pass)" : " (checks fail)") << '\n';
  return c.check && !ok ? kExitAcceptance : kExitOk;
}

struct ExperimentArgs {
  std::string config, output_dir;
};

int cmd_experiment(const ExperimentArgs& a, const Common& c, bool seed_given, std::ostream& out) {
  if (!fs::exists(a.config)) fail(ErrorCode::ConfigInvalid, "config file " + a.config + " not found");
  nlohmann::json j;
  try {
    std::ifstream in(a.config);
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigInvalid, a.config + ": " + e.what());
  }
  experiment::ExperimentConfig config = experiment::ExperimentConfig::from_json(j);
  if (seed_given) config.seed = c.seed;
  if (!a.output_dir.empty()) config.output_dir = a.output_dir;
  const experiment::ExperimentResult result = experiment::run_sweep(config, c.jobs);
  experiment::write_artifacts(result, config.output_dir);
  out << experiment::emit_report(config.output_dir);
  const bool ok = result.slope && std::abs(*result.slope + 0.5) <= 0.1 && result.gap.ratios_at_least_one();
  return c.check && !ok ? kExitAcceptance : kExitOk;
}

}  // namespace

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoConvergence:
    case ErrorCode::ConditionViolated:
    case ErrorCode::CapExceeded:
      return kExitNumerical;
    default:
      return kExitConfig;
  }
}

Matrix read_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingArtifact, "cannot read matrix file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& ch : line) {
      if (ch == ',') ch = ' ';
    }
    std::istringstream fields(line);
    std::vector<double> row;
    std::string token;
    while (fields >> token) {
      char* end = nullptr;
      const double v = std::strtod(token.c_str(), &end);
      if (end != token.c_str() + token.size()) {
        fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": not a number '" + token + "'");
      }
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                      std::to_string(rows.front().size()) + " entries, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorCode::ParseError, path.string() + ": no rows");
  Matrix X(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index k = 0; k < X.cols(); ++k) X(i, k) = rows[i][k];
  }
  return X;
}

void write_matrix(const fs::path& path, const Matrix& X) {
  std::ofstream file(path);
  if (!file) fail(ErrorCode::ConfigInvalid, "cannot write " + path.string());
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index k = 0; k < X.cols(); ++k) file << (k ? " " : "") << full(X(i, k));
    file << '\n';
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Double-sparse regression: estimators, condition checks and simulation harnesses", "dsparse"};
  app.require_subcommand(1);
  Common common;
  CLI::Option* seed_opt = app.add_option("--seed", common.seed, "Seed for every random stream")->capture_default_str();
  app.add_option("--jobs", common.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_flag("--check", common.check, "Exit with 3 when the acceptance thresholds fail");

  const auto layout_help = "Group layout as m,d";
  const auto condition_set = CLI::IsMember({"sgnorm", "ssgre", "wsgre", "dsre"});

  FitArgs fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit the sparse group Lasso or Slope");
  fit_cmd->add_option("--matrix", fit.matrix, "Design matrix file")->required();
  fit_cmd->add_option("--response", fit.response, "Response vector file")->required();
  fit_cmd->add_option("--layout", fit.layout, layout_help)->required();
  fit_cmd->add_option("--estimator", fit.estimator)->check(CLI::IsMember({"sglasso", "sgslope"}))->capture_default_str();
  fit_cmd->add_option("--s", fit.s)->capture_default_str();
  fit_cmd->add_option("--s0", fit.s0)->capture_default_str();
  fit_cmd->add_option("--sigma", fit.sigma, "Noise level for theoretical tuning");
  fit_cmd->add_option("--gamma", fit.gamma)->capture_default_str();
  fit_cmd->add_option("--delta0", fit.delta0);
  fit_cmd->add_option("--lambda", fit.lambda, "Manual l1 level (sglasso)");
  fit_cmd->add_option("--lambda-g", fit.lambda_g, "Manual group level (sglasso)");
  fit_cmd->add_option("--max-iters", fit.max_iters)->capture_default_str();
  fit_cmd->add_option("--tol", fit.tol)->capture_default_str();
  fit_cmd->add_option("--output", fit.output, "JSON file; stdout when omitted");

  ConditionArgs cond;
  CLI::App* cond_cmd = app.add_subcommand("check-conditions", "Evaluate SGNorm and the restricted eigenvalue conditions");
  cond_cmd->add_option("--matrix", cond.matrix, "Design matrix file")->required();
  cond_cmd->add_option("--layout", cond.layout, layout_help)->required();
  cond_cmd->add_option("--s", cond.s)->capture_default_str();
  cond_cmd->add_option("--s0", cond.s0)->capture_default_str();
  cond_cmd->add_option("--c0", cond.c0)->capture_default_str();
  cond_cmd->add_option("--mode", cond.mode)->check(CLI::IsMember({"exact", "sampled", "frobenius"}))->capture_default_str();
  cond_cmd->add_option("--condition", cond.condition)
      ->check(CLI::IsMember({"all", "sgnorm", "ssgre", "wsgre", "dsre"}))
      ->capture_default_str();
  cond_cmd->add_option("--samples", cond.samples)->capture_default_str();
  cond_cmd->add_option("--restarts", cond.restarts)->capture_default_str();
  cond_cmd->add_option("--output", cond.output, "JSON file; stdout when omitted");

  StochasticArgs sto;
  CLI::App* sto_cmd = app.add_subcommand("simulate-stochastic", "Monte Carlo checks of the noise functionals");
  sto_cmd->add_option("--matrix", sto.matrix, "Design file; default is an orthonormal-column design with --n rows");
  sto_cmd->add_option("--n", sto.n, "Rows of the default design; 0 means p")->capture_default_str();
  sto_cmd->add_option("--layout", sto.layout, layout_help)->capture_default_str();
  sto_cmd->add_option("--s", sto.s)->capture_default_str();
  sto_cmd->add_option("--s0", sto.s0)->capture_default_str();
  sto_cmd->add_option("--sigma", sto.sigma)->capture_default_str();
  sto_cmd->add_option("--trials", sto.trials)->capture_default_str();
  sto_cmd->add_option("--draws", sto.draws)->capture_default_str();
  sto_cmd->add_option("--directions", sto.directions)->capture_default_str();
  sto_cmd->add_option("--delta0", sto.delta0)->delimiter(',')->capture_default_str();
  sto_cmd->add_option("--suite", sto.suite)->check(CLI::IsMember({"tail", "gauss", "both"}))->capture_default_str();
  sto_cmd->add_option("--psi1", sto.psi1)->check(CLI::IsMember({"exact", "greedy"}))->capture_default_str();
  sto_cmd->add_option("--output-dir", sto.output_dir)->required();

  PackingArgs pack;
  CLI::App* pack_cmd = app.add_subcommand("packing", "Build a double-sparse packing set");
  pack_cmd->add_option("--layout", pack.layout, layout_help)->capture_default_str();
  pack_cmd->add_option("--s", pack.s)->capture_default_str();
  pack_cmd->add_option("--s0", pack.s0)->capture_default_str();
  pack_cmd->add_option("--matrix", pack.matrix, "Design file; signs the packing when given");
  pack_cmd->add_option("--exhaustive-limit", pack.exhaustive_limit)->capture_default_str();
  pack_cmd->add_option("--max-candidates", pack.max_candidates)->capture_default_str();
  pack_cmd->add_option("--max-size", pack.max_size)->capture_default_str();
  pack_cmd->add_option("--output", pack.output, "JSON file; stdout when omitted");

  RandomDesignArgs rd;
  CLI::App* rd_cmd = app.add_subcommand("random-design", "Success probability of a condition under a random ensemble");
  rd_cmd->add_option("--ensemble", rd.ensemble)
      ->check(CLI::IsMember({"gaussian", "rademacher", "subgaussian-covariance", "weak-moment"}))
      ->capture_default_str();
  rd_cmd->add_option("--alpha", rd.alpha)->capture_default_str();
  rd_cmd->add_option("--kappa1", rd.kappa1)->capture_default_str();
  rd_cmd->add_option("--layout", rd.layout, layout_help)->capture_default_str();
  rd_cmd->add_option("--s", rd.s)->capture_default_str();
  rd_cmd->add_option("--s0", rd.s0)->capture_default_str();
  rd_cmd->add_option("--n-grid", rd.n_grid)->delimiter(',')->capture_default_str();
  rd_cmd->add_option("--reps", rd.reps)->capture_default_str();
  rd_cmd->add_option("--condition", rd.condition)->check(condition_set)->capture_default_str();
  rd_cmd->add_option("--theta", rd.theta)->capture_default_str();
  rd_cmd->add_option("--kappa-min", rd.kappa_min)->capture_default_str();
  rd_cmd->add_option("--c0", rd.c0)->capture_default_str();
  rd_cmd->add_option("--output-dir", rd.output_dir)->required();

  ExperimentArgs ex;
  CLI::App* ex_cmd = app.add_subcommand("experiment", "Run an error-versus-n sweep from a JSON config");
  ex_cmd->add_option("--config", ex.config, "JSON config")->required();
  ex_cmd->add_option("--output-dir", ex.output_dir, "Overrides output_dir in the config");

  std::string report_dir;
  CLI::App* report_cmd = app.add_subcommand("report", "Summarise an experiment artifact directory");
  report_cmd->add_option("--dir", report_dir)->required();

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, out, err);
    if (*cond_cmd) return cmd_check_conditions(cond, common, out);
    if (*sto_cmd) return cmd_simulate_stochastic(sto, common, out);
    if (*pack_cmd) return cmd_packing(pack, common, out);
    if (*rd_cmd) return cmd_random_design(rd, common, out);
    if (*ex_cmd) return cmd_experiment(ex, common, seed_opt->count() > 0, out);
    out << experiment::emit_report(report_dir);
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace dsparse::cli
