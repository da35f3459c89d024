#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "glmm/dataset.hpp"
#include "glmm/gradient.hpp"
#include "glmm/model.hpp"
#include "glmm/rng.hpp"

namespace glmm {

/// Conjugate posterior of beta in the LMM with sigma^2 and Sigma fixed,
/// assembled from the subject marginals Y_i ~ N(X_i beta, Z_i Sigma Z_i^T + sigma^2 I).
struct LmmPosterior {
  VectorXd mean;
  MatrixXd cov;
};

/// `prior.beta_var` may be infinite (flat prior).
LmmPosterior lmm_posterior(const Dataset& data, double sigma2, const MatrixXd& Sigma, const PriorSpec& prior);

/// Gradient of -log N(Y_i; X_i beta, V_i) in Omega coordinates (Gaussian family).
VectorXd lmm_marginal_gradient(const Model& model, const Dataset& data, Index i, const VectorXd& omega);

/// -sum_i log N(Y_i; X_i beta, V_i), up to no constant.
double lmm_marginal_negloglik(const Model& model, const Dataset& data, const VectorXd& omega);

struct PpdMoments {
  VectorXd mean;
  MatrixXd cov;
};

/// PPD for a new subject with design (X', Z'): beta over its Gaussian
/// posterior, gamma over N(0, Sigma).
PpdMoments lmm_ppd(const LmmPosterior& post, const MatrixXd& Xnew, const MatrixXd& Znew, double sigma2,
                   const MatrixXd& Sigma);

/// Per-observation PPD variance from posterior beta draws (p x m): one
/// (gamma, Y) pair simulated per draw.
VectorXd chain_ppd_variance(const MatrixXd& beta_draws, const MatrixXd& Xnew, const MatrixXd& Znew, double sigma2,
                            const MatrixXd& Sigma, Engine& eng);

/// Mean over observations of log(estimated variance / true variance).
double ppd_log_ratio(const VectorXd& estimated_var, const MatrixXd& true_cov);

struct GibbsOptions {
  Index iterations = 1000;
  Index burn_in = 0;
  Index thin = 1;
  /// MH steps on the Sigma coordinates per sweep.
  Index sigma_mh_steps = 5;
  /// The Sigma proposal scale adapts during the first `adapt_sweeps` sweeps.
  Index adapt_sweeps = 500;
  double target_accept = 0.3;
  std::uint64_t seed = 1;
  /// Empty: the prior centre.
  VectorXd omega0;
  Exec exec = Exec::Parallel;
};

struct GibbsChain {
  std::vector<std::string> names;
  MatrixXd samples;
  std::vector<Index> iterations;
  double sigma_acceptance = 0.0;
  double runtime_seconds = 0.0;
};

/// Full-data Polya-Gamma Gibbs for the logit GLMM: omega_it | eta, gamma_i |
/// omega, beta | omega and gamma jointly Gaussian, then MH-within-Gibbs on the
/// unconstrained Sigma coordinates given sum_i gamma_i gamma_i^T.
GibbsChain full_gibbs_bernoulli(const Model& model, const Dataset& data, const GibbsOptions& opts);

}  // namespace glmm
