#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glmm/dataset.hpp"
#include "glmm/family.hpp"
#include "glmm/transforms.hpp"

namespace glmm {

/// Priors in constrained form; the model adds the Jacobians of the
/// unconstrained transforms.
///   beta_j ~ N(beta_mean, beta_var)
///   sigma_k, dispersion sd ~ half-t(halft_nu, halft_scale)
///   rho ~ Uniform(-1, 1)
///   alpha_j ~ N(0, alpha_var)
struct PriorSpec {
  double beta_mean = 0.0;
  double beta_var = 100.0;
  double halft_nu = 3.0;
  double halft_scale = 2.0;
  double alpha_var = 100.0;
};

struct ModelSpec {
  ExponentialFamily family{Family::Gaussian};
  Index p = 2;
  Index q = 2;
  /// When false, `fixed_sigma` is used and the Sigma block is absent from Omega.
  bool estimate_sigma = true;
  MatrixXd fixed_sigma;
  /// Gaussian only. Parameterized as log sd; `fixed_dispersion` is the variance.
  bool estimate_dispersion = true;
  double fixed_dispersion = 1.0;
  /// Missingness indicator block: logit p_i = alpha_0 + x_i^T alpha_{-0}, where
  /// x_i holds the listed X columns at the subject's first row.
  bool missingness = false;
  std::vector<Index> alpha_columns;
  PriorSpec prior;
};

/// Offsets of the named blocks inside Omega (-1 / 0 length when absent).
struct ParamLayout {
  Index beta = 0;
  Index n_beta = 0;
  Index sigma = -1;
  Index n_sigma = 0;
  Index dispersion = -1;
  Index alpha = -1;
  Index n_alpha = 0;
  Index dim = 0;

  std::vector<std::string> names;
  std::vector<std::string> blocks;
};

/// Omega decoded once so per-draw work does no transcendental setup.
struct Decoded {
  VectorXd beta;
  double phi = 1.0;  // a(phi) argument: variance for Gaussian, 1 otherwise
  CovarianceCoords cov;
  MatrixXd sigma;
  MatrixXd sigma_inv;
  MatrixXd sigma_chol;  // lower factor
  double sigma_logdet = 0.0;
  VectorXd alpha;
};

class Model {
 public:
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  const ExponentialFamily& family() const { return spec_.family; }
  Index dim() const { return layout_.dim; }

  Decoded decode(const VectorXd& omega) const;
  /// Builds Omega from constrained values; blocks that are fixed are ignored.
  VectorXd encode(const VectorXd& beta, const MatrixXd& sigma, double dispersion,
                  const VectorXd& alpha = VectorXd()) const;

  /// Throws ConfigError if the dataset's shape disagrees with the model.
  void check(const Dataset& data) const;

  VectorXd linear_predictor(const Dataset& data, Index i, const VectorXd& beta, const VectorXd& gamma) const;

  /// log p(Y_i | gamma, beta, phi) (gated by 1(w_i = 0) under the missingness
  /// model) + log N(gamma; 0, Sigma) + log p(w_i | alpha).
  double joint_loglik(const Dataset& data, Index i, const Decoded& par, const VectorXd& gamma) const;
  double joint_loglik(const Dataset& data, Index i, const VectorXd& omega, const VectorXd& gamma) const;
  double conditional_loglik(const Dataset& data, Index i, const Decoded& par, const VectorXd& gamma) const;
  /// Same as above on an arbitrary row block; `subject` only labels errors.
  double conditional_loglik(const SubjectView& s, const Decoded& par, const VectorXd& gamma,
                            std::int64_t subject = -1) const;
  double random_effect_logdensity(const Decoded& par, const VectorXd& gamma) const;

  /// X_i^T (Y_i - mu_i) / a(phi), gated under the missingness model.
  VectorXd grad_beta(const Dataset& data, Index i, const Decoded& par, const VectorXd& gamma) const;
  /// d/d(log sd) of the conditional log-likelihood.
  double grad_dispersion(const Dataset& data, Index i, const Decoded& par, const VectorXd& gamma) const;
  /// d/d(delta) of log N(gamma; 0, Sigma(delta)), q in {1, 2}.
  VectorXd grad_sigma(const Decoded& par, const VectorXd& gamma) const;
  /// (w_i - p_i) x_i.
  VectorXd grad_alpha(const Dataset& data, Index i, const Decoded& par) const;

  /// Full gradient of log p(Y_i, gamma | Omega) in Omega coordinates, written
  /// into `out` (size dim()).
  void joint_grad(const Dataset& data, Index i, const Decoded& par, const VectorXd& gamma,
                  Eigen::Ref<VectorXd> out) const;

  /// log p(Omega) in unconstrained coordinates (up to a constant).
  double prior_logdensity(const VectorXd& omega) const;
  /// grad f_0 = -grad log p(Omega).
  VectorXd prior_grad(const VectorXd& omega) const;
  /// Prior mean in unconstrained coordinates (the default chain start).
  VectorXd prior_center() const;

  /// Covariate vector of the missingness model for subject i: (1, x_i).
  VectorXd indicator_covariates(const Dataset& data, Index i) const;

 private:
  ModelSpec spec_;
  ParamLayout layout_;
};

/// log density of half-t(nu, scale) on sd = exp(u), including the Jacobian,
/// and its derivative in u.
double halft_log_density_unconstrained(double u, double nu, double scale);
double halft_log_density_unconstrained_grad(double u, double nu, double scale);

}  // namespace glmm
