#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "glmm/correction.hpp"
#include "glmm/dataset.hpp"
#include "glmm/model.hpp"
#include "glmm/sgld.hpp"

namespace glmm {

enum class Design { LmmFixed, GaussianUnknown, Bernoulli, Poisson, Missingness };

Design parse_design(std::string_view name);
std::string_view to_string(Design d);

struct TrueParams {
  VectorXd beta;
  MatrixXd Sigma;
  double sigma2 = 2.0;
  VectorXd alpha;
};

/// beta = (1.5, -0.5), sigma^2 = 2, Sigma = [[1.5, -0.25], [-0.25, 1.5]] for
/// every design; the missingness design adds a subject covariate to beta and
/// alpha = (-1, 0.5).
TrueParams default_truth(Design d);

/// Model used to analyse a design. lmm-fixed holds sigma^2 and Sigma at the truth.
ModelSpec design_model(Design d, const TrueParams& truth, const PriorSpec& prior = {});

/// Synthetic data for a design; bytes depend only on the arguments.
Dataset generate_data(Design d, Index n, Index ni, const TrueParams& truth, std::uint64_t seed);

struct MetricsRow {
  std::string design;
  Index n = 0;
  Index S = 0;
  double delta = 0.0;
  std::string method;
  std::string parameter;
  double posterior_mean = 0.0;
  double log_posterior_variance = 0.0;
  std::optional<double> ppd_log_ratio;
  std::optional<double> wall_seconds;
  Index replication = 0;
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

/// One SGLD run followed by the post-hoc correction on the retained tail.
struct SgldFit {
  Chain chain;
  /// Most recent `tail_fraction` of the retained samples, raw and corrected.
  MatrixXd tail;
  MatrixXd corrected;
  MatrixXd psi;
  CorrectionResult correction;
  double correction_seconds = 0.0;
};

/// `R_psi` draws per subject for the full pass at Omega* (0: use config.R).
SgldFit fit_and_correct(const SgldConfig& config, const Model& model, const Dataset& data, Index R_psi = 0,
                        double tail_fraction = 0.75);

/// Psi_hat at `omega` from a full pass with a fresh estimator.
MatrixXd psi_at(const Model& model, const Dataset& data, const VectorXd& omega, Index R, const SamplerOptions& opts,
                std::uint64_t seed, Exec exec);

struct ExperimentConfig {
  Design design = Design::LmmFixed;
  Index n = 100;
  Index ni = 10;
  std::optional<TrueParams> truth;
  std::vector<Index> S_grid{5};
  /// Empty: select_delta for each S.
  std::vector<double> delta_grid;
  Index replications = 1;
  std::uint64_t seed = 1;
  std::string out_dir;
  double T = 100.0;
  std::optional<Index> K;
  double budget_seconds = 0.0;
  Index R = 100;
  Index R_psi = 0;
  Index target_samples = 5000;
  SamplerOptions sampler;
  PriorSpec prior;
  /// Full-data Gibbs comparator sweeps for the Bernoulli design (0 = none).
  Index gibbs_iterations = 0;
  Index gibbs_burn_in = 1000;
  /// Replications run concurrently; inner work is serial when > 1.
  int jobs = 1;
  Exec exec = Exec::Parallel;
  bool write_chains = true;
  /// When false wall_seconds is written as NA so outputs are byte-stable.
  bool record_timings = true;
};

struct ExperimentSummary {
  std::vector<MetricsRow> rows;
  Index replications = 0;
  Index failures = 0;
  std::vector<std::string> errors;
};

/// Runs every replication x (S, delta) x method and writes metrics.csv,
/// chains, correction reports and manifest.json under `out_dir` (if set).
ExperimentSummary run_experiment(const ExperimentConfig& config);

/// R type-7 quantile of unsorted values.
double quantile(std::vector<double> values, double prob);

struct ReportRow {
  std::string design;
  Index n = 0;
  Index S = 0;
  double delta = 0.0;
  std::string method;
  std::string parameter;
  Index replications = 0;
  double mean_log_variance = 0.0;
  double q025_log_variance = 0.0;
  double q975_log_variance = 0.0;
  /// Variance ratio vs the oracle method (closed-form or gibbs) per replication.
  std::optional<double> mean_variance_ratio;
  std::optional<double> q025_variance_ratio;
  std::optional<double> q975_variance_ratio;
  std::optional<double> mean_ppd_log_ratio;
};

std::vector<ReportRow> compare_report(const std::vector<MetricsRow>& rows);
void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out);
void write_report_text(const std::vector<ReportRow>& rows, std::ostream& out);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace glmm
