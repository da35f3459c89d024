#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glmm/dataset.hpp"
#include "glmm/gradient.hpp"
#include "glmm/model.hpp"
#include "glmm/rng.hpp"
#include "glmm/samplers.hpp"

namespace glmm {

/// eps = S / n^(1 + delta).
double step_size(Index n, Index S, double delta);

/// Midpoint of [delta_min, 1], delta_min the smallest grid value in
/// {0.1, ..., 1.0} with eps < 1/n.
double select_delta(Index n, Index S);

struct SgldConfig {
  Index S = 5;
  double delta = 0.55;
  double kappa = 1.0;
  Index R = 100;
  /// Outer iterations; when unset K = ceil(T / eps).
  std::optional<Index> K;
  double T = 100.0;
  /// Thinning stride; 0 picks one that keeps about `target_samples`.
  Index thin = 0;
  Index target_samples = 5000;
  std::uint64_t seed = 1;
  /// Empty: the prior centre with beta warm-started by SGD (kappa = 0).
  VectorXd omega0;
  Index warmstart_epochs = 2;
  SamplerOptions sampler;
  Exec exec = Exec::Parallel;
  PsiEstimator psi_estimator = PsiEstimator::Auto;
  /// Stop early once this much wall time has passed (0 = no limit).
  double budget_seconds = 0.0;
  Index checkpoint_every = 0;
  std::string checkpoint_path;
  /// Dynamic correction: every `correction_interval` iterations the running
  /// sample moments and a running Psi estimate give a fresh G.
  Index correction_interval = 0;
  double psi_decay = 0.99;
};

/// The stochastic gradient grad f_0 + n h_S for outer iteration k.
class GradientSource {
 public:
  virtual ~GradientSource() = default;
  virtual VectorXd gradient(const VectorXd& omega, std::uint64_t k, std::vector<SubjectGradient>* parts) = 0;
  /// Latent sampler states that a checkpoint must carry (may be null).
  virtual std::vector<LatentState>* latent_states() { return nullptr; }
};

class MinibatchSource : public GradientSource {
 public:
  MinibatchSource(GradientEstimator& est, Index S) : est_(est), S_(S) {}
  VectorXd gradient(const VectorXd& omega, std::uint64_t k, std::vector<SubjectGradient>* parts) override;
  std::vector<LatentState>* latent_states() override { return &est_.states(); }

 private:
  GradientEstimator& est_;
  Index S_;
};

/// Wraps a deterministic gradient (exact targets, test stubs).
class FunctionSource : public GradientSource {
 public:
  explicit FunctionSource(std::function<VectorXd(const VectorXd&)> f) : f_(std::move(f)) {}
  VectorXd gradient(const VectorXd& omega, std::uint64_t, std::vector<SubjectGradient>*) override { return f_(omega); }

 private:
  std::function<VectorXd(const VectorXd&)> f_;
};

/// Omega - eps grad + kappa sqrt(2 eps) eta with eta ~ N(0, I) from `eng`.
VectorXd sgld_update(const VectorXd& omega, const VectorXd& grad, double eps, double kappa, Engine& eng);

struct DynamicCorrection {
  Index iteration = 0;
  VectorXd omega_star;
  MatrixXd G;
  MatrixXd A_inv;
};

struct Chain {
  SgldConfig config;
  std::vector<std::string> names;
  std::vector<std::string> blocks;
  Index n = 0;
  double eps = 0.0;
  /// Planned and completed outer iterations.
  Index K = 0;
  Index completed = 0;
  Index stride = 1;
  VectorXd omega_initial;
  VectorXd omega_final;
  /// Retained states, column-wise (d x m).
  MatrixXd samples;
  std::vector<Index> iterations;
  std::vector<double> timestamps;
  double runtime_seconds = 0.0;
  bool budget_stopped = false;
  double mean_grad_norm = 0.0;
  double mean_acceptance = 0.0;
  Index acceptance_warnings = 0;
  std::vector<DynamicCorrection> dynamic;
  RunningPsi running_psi;
  double grad_norm_sum = 0.0;

  Index dim() const { return samples.rows(); }
  Index size() const { return samples.cols(); }
  /// The most recent `fraction` of retained samples.
  MatrixXd tail(double fraction) const;
};

/// Outer loop on an arbitrary gradient source. `resume` continues a chain
/// restored from a checkpoint.
Chain run_sgld(const SgldConfig& config, GradientSource& source, Index n, const VectorXd& omega0,
               const std::vector<std::string>& names, const std::vector<std::string>& blocks,
               const Chain* resume = nullptr);

/// Algorithm loop for a GLMM: builds the gradient estimator, picks Omega_0,
/// and runs K iterations.
Chain run_chain(const SgldConfig& config, const Model& model, const Dataset& data);

/// Continues from a checkpoint written by run_chain. The result is bitwise
/// identical to an uninterrupted run with the same configuration.
Chain resume_chain(const std::string& checkpoint_path, const Model& model, const Dataset& data,
                   std::optional<Exec> exec = std::nullopt);

/// Short SGD pass (kappa = 0) over beta only, starting from `omega`.
VectorXd warm_start_beta(const Model& model, const Dataset& data, GradientEstimator& est, VectorXd omega,
                         Index S, double eps, Index epochs);

/// `iter,block,coord,value` rows plus a JSON sidecar at `<path>.json`.
void write_chain_csv(const Chain& chain, const std::string& path, const MatrixXd* samples = nullptr,
                     const std::string& extra_metadata_json = "");
/// Reads the long CSV back into a d x m matrix; names in first-seen order.
MatrixXd read_chain_csv(const std::string& path, std::vector<std::string>* names = nullptr,
                        std::vector<Index>* iterations = nullptr);

std::string config_to_json(const SgldConfig& c);
SgldConfig config_from_json(const std::string& text);

}  // namespace glmm
