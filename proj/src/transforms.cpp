#include "glmm/transforms.hpp"

#include <cmath>

#include "glmm/errors.hpp"

namespace glmm {

Eigen::Index covariance_coord_count(Eigen::Index q) {
  if (q == 1) return 1;
  if (q == 2) return 3;
  throw UnsupportedOperation("unconstrained covariance coordinates are available for q in {1, 2} only");
}

CovarianceCoords untransform_covariance(const Eigen::Ref<const Eigen::VectorXd>& delta) {
  CovarianceCoords c;
  c.sd1 = std::exp(delta(0));
  if (delta.size() == 3) {
    c.sd2 = std::exp(delta(1));
    c.rho = rho_from_unconstrained(delta(2));
  }
  return c;
}

Eigen::MatrixXd covariance_matrix(const CovarianceCoords& c, Eigen::Index q) {
  Eigen::MatrixXd s(q, q);
  if (q == 1) {
    s(0, 0) = c.sd1 * c.sd1;
  } else {
    s(0, 0) = c.sd1 * c.sd1;
    s(1, 1) = c.sd2 * c.sd2;
    s(0, 1) = s(1, 0) = c.rho * c.sd1 * c.sd2;
  }
  return s;
}

Eigen::MatrixXd covariance_from_unconstrained(const Eigen::Ref<const Eigen::VectorXd>& delta, Eigen::Index q) {
  if (delta.size() != covariance_coord_count(q)) throw ConfigError("covariance coordinate count does not match q");
  return covariance_matrix(untransform_covariance(delta), q);
}

Eigen::VectorXd unconstrained_from_covariance(const Eigen::MatrixXd& sigma) {
  const auto q = sigma.rows();
  Eigen::VectorXd d(covariance_coord_count(q));
  if (sigma(0, 0) <= 0.0) throw ConfigError("covariance must have positive variances");
  d(0) = 0.5 * std::log(sigma(0, 0));
  if (q == 2) {
    if (sigma(1, 1) <= 0.0) throw ConfigError("covariance must have positive variances");
    d(1) = 0.5 * std::log(sigma(1, 1));
    const double rho = sigma(0, 1) / std::sqrt(sigma(0, 0) * sigma(1, 1));
    if (!(std::abs(rho) < 1.0)) throw ConfigError("covariance correlation must lie in (-1, 1)");
    d(2) = unconstrained_from_rho(rho);
  }
  return d;
}

}  // namespace glmm
