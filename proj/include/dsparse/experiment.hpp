#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsparse/core.hpp"
#include "dsparse/lowerbound.hpp"
#include "dsparse/randomdesign.hpp"

namespace dsparse::experiment {

inline constexpr int kConfigVersion = 1;

enum class Estimator { SgLasso, SgSlope };

std::string to_string(Estimator e);
Estimator estimator_from_string(const std::string& name);

/// Simulation sweep. beta* has s groups drawn uniformly, s0 uniform entries in
/// each, Rademacher signs scaled so every active group has unit l2 norm.
struct ExperimentConfig {
  int version = kConfigVersion;
  Index m = 20;
  Index d = 5;
  std::vector<Index> n_grid = {200, 400, 800, 1600, 3200};
  Index s = 3;
  Index s0 = 2;
  double sigma = 1.0;
  double gamma = 0.5;
  std::optional<double> delta0;
  Estimator estimator = Estimator::SgLasso;
  randomdesign::EnsembleKind design = randomdesign::EnsembleKind::Gaussian;
  double alpha = 0.5;  ///< weak-moment ensembles
  std::uint64_t replicates = 11;
  std::uint64_t seed = 0;
  std::string output_dir = "artifacts";

  /// Throws ConfigInvalid.
  void validate() const;
  nlohmann::json to_json() const;
  /// Throws ConfigInvalid on missing or ill-typed fields and unknown versions.
  static ExperimentConfig from_json(const nlohmann::json& j);
};

struct ReplicateRow {
  Index n = 0;
  std::uint64_t replicate = 0;
  double error = 0.0;          ///< ||beta_hat - beta*||_2
  double rate = 0.0;           ///< sigma sqrt((s s0 log(2ed/s0) + 2 s log(4em/s)) / n)
  double lower_bound = 0.0;    ///< minimax value with this design's theta_max
  double theta_max = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct SweepPoint {
  Index n = 0;
  double median_error = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double rate = 0.0;
  double median_theta_max = 0.0;
  double constant = 0.0;  ///< median_error / rate
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ReplicateRow> rows;
  std::vector<SweepPoint> points;
  std::optional<double> slope;  ///< log median error on log n
  std::optional<double> slope_lower;  ///< 95% bootstrap over replicates
  std::optional<double> slope_upper;
  double fitted_constant = 0.0;  ///< median over n of median_error / rate
  lowerbound::GapReport gap;

  nlohmann::json summary_json() const;
};

/// Runs the sweep in memory; replicates run in parallel on `jobs` threads.
ExperimentResult run_sweep(const ExperimentConfig& config, int jobs = 1);

/// run_sweep, then writes results.csv, summary.json and plotdata/*.dat into
/// config.output_dir (created if needed). Returns the directory.
std::filesystem::path run_experiment(const ExperimentConfig& config, int jobs = 1);

void write_artifacts(const ExperimentResult& result, const std::filesystem::path& dir);

/// Human summary of an artifact directory. Throws MissingArtifact when
/// results.csv or summary.json is absent and ParseError (with the line
/// number) on a malformed results.csv.
std::string emit_report(const std::filesystem::path& dir);

/// Least-squares slope of log y on log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// "%.17g"
std::string full_precision(double v);

}  // namespace dsparse::experiment
