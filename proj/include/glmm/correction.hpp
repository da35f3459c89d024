#pragma once

#include <iosfwd>

#include <Eigen/Dense>

namespace glmm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Gamma = eps n^2 Psi / (2S) + kappa I.
MatrixXd compute_gamma(const MatrixXd& psi, double eps, Index n, Index S, double kappa);

/// Unique symmetric A with Sigma A + A Sigma = 2 Gamma, from the
/// eigendecomposition of Sigma. Throws IllConditionedError when the smallest
/// eigenvalue of Sigma is at or below 1e-12 trace / d.
MatrixXd solve_lyapunov(const MatrixXd& sigma, const MatrixXd& gamma);

/// ||Sigma A + A Sigma - 2 Gamma||_F / ||2 Gamma||_F.
double lyapunov_residual(const MatrixXd& sigma, const MatrixXd& A, const MatrixXd& gamma);

/// Stationary covariance the theory predicts for the uncorrected chain:
/// solves A Sigma + Sigma A = 2 Gamma for Sigma.
MatrixXd predicted_inflation(const MatrixXd& A, const MatrixXd& gamma);

VectorXd sample_mean(const MatrixXd& samples);
/// Unbiased covariance of column samples (d x m).
MatrixXd sample_covariance(const MatrixXd& samples);

struct CorrectionInputs {
  VectorXd omega_star;
  MatrixXd sigma;
  MatrixXd psi;
  double eps = 0.0;
  Index n = 0;
  Index S = 1;
  double kappa = 1.0;
};

struct CorrectionResult {
  MatrixXd gamma;
  MatrixXd A;
  MatrixXd A_inv;
  /// Upper factors: Sigma = E^T E, A = F^T F.
  MatrixXd E;
  MatrixXd F;
  MatrixXd G;
  VectorXd omega_star;
  double residual = 0.0;
  VectorXd sigma_eigenvalues;
  VectorXd A_eigenvalues;
  /// Number of eigenvalues of A raised to the floor.
  Index floored = 0;
};

/// Mean and covariance of the chain, paired with Psi_hat and the run's step
/// parameters.
CorrectionInputs correction_inputs(const MatrixXd& samples, const MatrixXd& psi, double eps, Index n, Index S,
                                   double kappa);

/// Builds Gamma, A and G. A is symmetrized; eigenvalues below -1e-10 trace
/// abort with NumericError, smaller deficits are floored at 1e-12 trace.
CorrectionResult compute_correction(const CorrectionInputs& in);

/// Theta_k = G (Omega_k - Omega*) + Omega*, column-wise.
MatrixXd apply_correction(const CorrectionResult& c, const MatrixXd& samples);

/// Structured text: Gamma, A, A^{-1}, G, residual and both spectra.
void write_correction_report(const CorrectionResult& c, std::ostream& out);

}  // namespace glmm
