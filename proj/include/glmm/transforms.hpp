#pragma once

#include <Eigen/Dense>

namespace glmm {

/// Random-effects covariance in unconstrained coordinates.
///   q = 1: (delta_1)                    sigma_1 = exp(delta_1)
///   q = 2: (delta_1, delta_2, delta_rho) with rho = tanh(delta_rho / 2),
///          i.e. delta_rho = log((1 + rho) / (1 - rho)).
struct CovarianceCoords {
  double sd1 = 1.0;
  double sd2 = 1.0;
  double rho = 0.0;
};

Eigen::Index covariance_coord_count(Eigen::Index q);

CovarianceCoords untransform_covariance(const Eigen::Ref<const Eigen::VectorXd>& delta);
Eigen::MatrixXd covariance_matrix(const CovarianceCoords& c, Eigen::Index q);
Eigen::MatrixXd covariance_from_unconstrained(const Eigen::Ref<const Eigen::VectorXd>& delta, Eigen::Index q);
/// Inverse map; requires q in {1, 2} and a valid correlation (|rho| < 1).
Eigen::VectorXd unconstrained_from_covariance(const Eigen::MatrixXd& sigma);

inline double rho_from_unconstrained(double delta_rho) { return std::tanh(0.5 * delta_rho); }
inline double unconstrained_from_rho(double rho) { return std::log((1.0 + rho) / (1.0 - rho)); }

}  // namespace glmm
