#include "glmm/model.hpp"

#include <cmath>
#include <numbers>

#include "glmm/errors.hpp"

namespace glmm {

namespace {

// log(1 - tanh(x/2)^2) = -2 log cosh(x/2), stable for large |x|.
double log_one_minus_rho_sq(double delta_rho) {
  const double a = std::abs(delta_rho);
  return -2.0 * (0.5 * a + std::log1p(std::exp(-a)) - std::numbers::ln2);
}

}  // namespace

double halft_log_density_unconstrained(double u, double nu, double scale) {
  const double norm = std::numbers::ln2 + std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                      0.5 * std::log(nu * std::numbers::pi) - std::log(scale);
  const double r = std::exp(2.0 * u) / (nu * scale * scale);
  return norm - 0.5 * (nu + 1.0) * std::log1p(r) + u;
}

double halft_log_density_unconstrained_grad(double u, double nu, double scale) {
  const double s2 = std::exp(2.0 * u);
  return 1.0 - (nu + 1.0) * s2 / (nu * scale * scale + s2);
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  if (spec_.p < 1 || spec_.q < 1) throw ConfigError("model: p and q must be positive");
  if (spec_.prior.beta_var <= 0.0 || spec_.prior.alpha_var <= 0.0 || spec_.prior.halft_nu <= 0.0 ||
      spec_.prior.halft_scale <= 0.0)
    throw ConfigError("model: prior variances and half-t parameters must be positive");
  if (!spec_.family.has_dispersion()) spec_.estimate_dispersion = false;
  if (spec_.family.has_dispersion() && !spec_.estimate_dispersion && spec_.fixed_dispersion <= 0.0)
    throw ConfigError("model: fixed dispersion must be positive");
  if (!spec_.estimate_sigma) {
    if (spec_.fixed_sigma.rows() != spec_.q || spec_.fixed_sigma.cols() != spec_.q)
      throw ConfigError("model: fixed Sigma must be q x q");
    Eigen::LLT<MatrixXd> llt(spec_.fixed_sigma);
    if (llt.info() != Eigen::Success) throw ConfigError("model: fixed Sigma must be positive definite");
  }

  auto& L = layout_;
  Index k = 0;
  L.beta = k;
  L.n_beta = spec_.p;
  for (Index j = 0; j < spec_.p; ++j) {
    L.names.push_back("beta_" + std::to_string(j));
    L.blocks.emplace_back("beta");
  }
  k += spec_.p;
  if (spec_.estimate_sigma) {
    L.sigma = k;
    L.n_sigma = covariance_coord_count(spec_.q);
    L.names.emplace_back("delta_1");
    if (spec_.q == 2) {
      L.names.emplace_back("delta_2");
      L.names.emplace_back("delta_rho");
    }
    for (Index j = 0; j < L.n_sigma; ++j) L.blocks.emplace_back("sigma");
    k += L.n_sigma;
  }
  if (spec_.estimate_dispersion) {
    L.dispersion = k;
    L.names.emplace_back("log_sd");
    L.blocks.emplace_back("dispersion");
    k += 1;
  }
  if (spec_.missingness) {
    L.alpha = k;
    L.n_alpha = 1 + static_cast<Index>(spec_.alpha_columns.size());
    for (Index j = 0; j < L.n_alpha; ++j) {
      L.names.push_back("alpha_" + std::to_string(j));
      L.blocks.emplace_back("alpha");
    }
    k += L.n_alpha;
    for (auto c : spec_.alpha_columns)
      if (c < 0 || c >= spec_.p) throw ConfigError("model: alpha column out of range");
  }
  L.dim = k;
}

Decoded Model::decode(const VectorXd& omega) const {
  if (omega.size() != layout_.dim) throw ConfigError("Omega has dimension " + std::to_string(omega.size()) +
                                                     ", model expects " + std::to_string(layout_.dim));
  Decoded d;
  d.beta = omega.segment(layout_.beta, layout_.n_beta);
  if (spec_.estimate_sigma) {
    d.cov = untransform_covariance(omega.segment(layout_.sigma, layout_.n_sigma));
    d.sigma = covariance_matrix(d.cov, spec_.q);
  } else {
    d.sigma = spec_.fixed_sigma;
    d.cov.sd1 = std::sqrt(d.sigma(0, 0));
    if (spec_.q >= 2) {
      d.cov.sd2 = std::sqrt(d.sigma(1, 1));
      d.cov.rho = d.sigma(0, 1) / (d.cov.sd1 * d.cov.sd2);
    }
  }
  Eigen::LLT<MatrixXd> llt(d.sigma);
  if (llt.info() != Eigen::Success || !d.sigma.allFinite())
    throw NumericError("random-effects covariance is not positive definite");
  d.sigma_chol = llt.matrixL();
  d.sigma_inv = llt.solve(MatrixXd::Identity(spec_.q, spec_.q));
  d.sigma_logdet = 2.0 * d.sigma_chol.diagonal().array().log().sum();
  if (spec_.family.has_dispersion()) {
    d.phi = spec_.estimate_dispersion ? std::exp(2.0 * omega(layout_.dispersion)) : spec_.fixed_dispersion;
  }
  if (spec_.missingness) d.alpha = omega.segment(layout_.alpha, layout_.n_alpha);
  return d;
}

VectorXd Model::encode(const VectorXd& beta, const MatrixXd& sigma, double dispersion, const VectorXd& alpha) const {
  VectorXd omega = VectorXd::Zero(layout_.dim);
  if (beta.size() != spec_.p) throw ConfigError("encode: beta has the wrong length");
  omega.segment(layout_.beta, layout_.n_beta) = beta;
  if (spec_.estimate_sigma) omega.segment(layout_.sigma, layout_.n_sigma) = unconstrained_from_covariance(sigma);
  if (spec_.estimate_dispersion) {
    if (dispersion <= 0.0) throw ConfigError("encode: dispersion must be positive");
    omega(layout_.dispersion) = 0.5 * std::log(dispersion);
  }
  if (spec_.missingness) {
    if (alpha.size() != layout_.n_alpha) throw ConfigError("encode: alpha has the wrong length");
    omega.segment(layout_.alpha, layout_.n_alpha) = alpha;
  }
  return omega;
}

void Model::check(const Dataset& data) const {
  if (data.n_subjects() > 0 && (data.p() != spec_.p || data.q() != spec_.q))
    throw ConfigError("dataset has p=" + std::to_string(data.p()) + ", q=" + std::to_string(data.q()) +
                      " but the model expects p=" + std::to_string(spec_.p) + ", q=" + std::to_string(spec_.q));
  if (spec_.missingness && !data.has_indicator())
    throw ConfigError("missingness model requires the w column in the dataset");
}

VectorXd Model::linear_predictor(const Dataset& data, Index i, const VectorXd& beta, const VectorXd& gamma) const {
  const auto s = data.subject(i);
  if (beta.size() != s.X.cols() || gamma.size() != s.Z.cols())
    throw ConfigError("linear_predictor: dimension mismatch for subject " + std::to_string(i));
  return s.X * beta + s.Z * gamma;
}

VectorXd Model::indicator_covariates(const Dataset& data, Index i) const {
  VectorXd u(layout_.n_alpha);
  u(0) = 1.0;
  const auto s = data.subject(i);
  for (size_t j = 0; j < spec_.alpha_columns.size(); ++j) u(static_cast<Index>(j) + 1) = s.X(0, spec_.alpha_columns[j]);
  return u;
}

double Model::random_effect_logdensity(const Decoded& par, const VectorXd& gamma) const {
  const double quad = gamma.dot(par.sigma_inv * gamma);
  return -0.5 * static_cast<double>(spec_.q) * std::log(2.0 * std::numbers::pi) - 0.5 * par.sigma_logdet -
         0.5 * quad;
}

double Model::conditional_loglik(const SubjectView& s, const Decoded& par, const VectorXd& gamma,
                                 std::int64_t subject) const {
  if (spec_.missingness && s.w.value_or(0) == 1) return 0.0;
  const VectorXd eta = s.X * par.beta + s.Z * gamma;
  double ll = 0.0;
  for (Index t = 0; t < eta.size(); ++t) ll += spec_.family.loglik(s.y(t), eta(t), par.phi);
  if (!std::isfinite(ll)) throw NumericError("non-finite conditional log-likelihood", subject);
  return ll;
}

double Model::conditional_loglik(const Dataset& data, Index i, const Decoded& par, const VectorXd& gamma) const {
  return conditional_loglik(data.subject(i), par, gamma, i);
}

double Model::joint_loglik(const Dataset& data, Index i, const Decoded& par, const VectorXd& gamma) const {
  double ll = conditional_loglik(data, i, par, gamma) + random_effect_logdensity(par, gamma);
  if (spec_.missingness) {
    const double lin = indicator_covariates(data, i).dot(par.alpha);
    const int w = data.subject(i).w.value_or(0);
    ll += w * lin - softplus(lin);
  }
  if (!std::isfinite(ll)) throw NumericError("non-finite joint log-likelihood", i);
  return ll;
}

double Model::joint_loglik(const Dataset& data, Index i, const VectorXd& omega, const VectorXd& gamma) const {
  return joint_loglik(data, i, decode(omega), gamma);
}

VectorXd Model::grad_beta(const Dataset& data, Index i, const Decoded& par, const VectorXd& gamma) const {
  const auto s = data.subject(i);
  if (spec_.missingness) {
    if (!s.w) throw ConfigError("missingness model requires w for subject " + std::to_string(i));
    if (*s.w == 1) return VectorXd::Zero(spec_.p);
  }
  VectorXd resid = s.X * par.beta + s.Z * gamma;
  for (Index t = 0; t < resid.size(); ++t) resid(t) = s.y(t) - spec_.family.mean(resid(t));
  if (!resid.allFinite()) throw NumericError("non-finite mean in beta gradient", i);
  return s.X.transpose() * resid / spec_.family.a(par.phi);
}

double Model::grad_dispersion(const Dataset& data, Index i, const Decoded& par, const VectorXd& gamma) const {
  if (!spec_.family.has_dispersion())
    throw UnsupportedOperation("family '" + std::string(to_string(spec_.family.tag())) + "' has no dispersion");
  const auto s = data.subject(i);
  if (spec_.missingness && s.w.value_or(0) == 1) return 0.0;
  const auto& f = spec_.family;
  const double phi = par.phi;
  const double a = f.a(phi);
  const double ap = f.a_prime(phi);
  const VectorXd eta = s.X * par.beta + s.Z * gamma;
  double g = 0.0;
  for (Index t = 0; t < eta.size(); ++t) {
    g += -(s.y(t) * eta(t) - f.b(eta(t))) * ap / (a * a) + f.c_prime(s.y(t), phi);
  }
  // chain rule for phi = exp(2 u)
  return g * 2.0 * phi;
}

VectorXd Model::grad_sigma(const Decoded& par, const VectorXd& gamma) const {
  if (spec_.q == 1) {
    VectorXd g(1);
    const double u = gamma(0) / par.cov.sd1;
    g(0) = -1.0 + u * u;
    return g;
  }
  if (spec_.q != 2) throw UnsupportedOperation("Sigma gradient is available for q in {1, 2} only");
  const double u1 = gamma(0) / par.cov.sd1;
  const double u2 = gamma(1) / par.cov.sd2;
  const double rho = par.cov.rho;
  const double om = 1.0 - rho * rho;
  const double quad = u1 * u1 - 2.0 * rho * u1 * u2 + u2 * u2;
  VectorXd g(3);
  g(0) = -1.0 + (u1 * u1 - rho * u1 * u2) / om;
  g(1) = -1.0 + (u2 * u2 - rho * u1 * u2) / om;
  g(2) = 0.5 * (rho + u1 * u2 - quad * rho / om);
  return g;
}

VectorXd Model::grad_alpha(const Dataset& data, Index i, const Decoded& par) const {
  if (!spec_.missingness) throw ConfigError("grad_alpha requires the missingness model");
  const auto s = data.subject(i);
  if (!s.w) throw ConfigError("missingness model requires w for subject " + std::to_string(i));
  const VectorXd u = indicator_covariates(data, i);
  const double prob = logistic(u.dot(par.alpha));
  return (static_cast<double>(*s.w) - prob) * u;
}

void Model::joint_grad(const Dataset& data, Index i, const Decoded& par, const VectorXd& gamma,
                       Eigen::Ref<VectorXd> out) const {
  out.setZero();
  const auto s = data.subject(i);
  const bool gated = spec_.missingness && s.w.value_or(0) == 1;
  if (!gated) {
    const auto& f = spec_.family;
    const VectorXd eta = s.X * par.beta + s.Z * gamma;
    VectorXd resid(eta.size());
    double gdisp = 0.0;
    const double a = f.a(par.phi);
    for (Index t = 0; t < eta.size(); ++t) {
      resid(t) = s.y(t) - f.mean(eta(t));
      if (spec_.estimate_dispersion)
        gdisp += -(s.y(t) * eta(t) - f.b(eta(t))) * f.a_prime(par.phi) / (a * a) + f.c_prime(s.y(t), par.phi);
    }
    if (!resid.allFinite()) throw NumericError("non-finite mean in joint gradient", i);
    out.segment(layout_.beta, layout_.n_beta).noalias() = s.X.transpose() * resid / a;
    if (spec_.estimate_dispersion) out(layout_.dispersion) = gdisp * 2.0 * par.phi;
  }
  if (spec_.estimate_sigma) out.segment(layout_.sigma, layout_.n_sigma) = grad_sigma(par, gamma);
  if (spec_.missingness) out.segment(layout_.alpha, layout_.n_alpha) = grad_alpha(data, i, par);
}

double Model::prior_logdensity(const VectorXd& omega) const {
  const auto& pr = spec_.prior;
  double lp = 0.0;
  const auto beta = omega.segment(layout_.beta, layout_.n_beta);
  lp += -0.5 * (beta.array() - pr.beta_mean).square().sum() / pr.beta_var;
  if (spec_.estimate_sigma) {
    lp += halft_log_density_unconstrained(omega(layout_.sigma), pr.halft_nu, pr.halft_scale);
    if (spec_.q == 2) {
      lp += halft_log_density_unconstrained(omega(layout_.sigma + 1), pr.halft_nu, pr.halft_scale);
      lp += log_one_minus_rho_sq(omega(layout_.sigma + 2)) - 2.0 * std::numbers::ln2;
    }
  }
  if (spec_.estimate_dispersion)
    lp += halft_log_density_unconstrained(omega(layout_.dispersion), pr.halft_nu, pr.halft_scale);
  if (spec_.missingness) lp += -0.5 * omega.segment(layout_.alpha, layout_.n_alpha).squaredNorm() / pr.alpha_var;
  return lp;
}

VectorXd Model::prior_grad(const VectorXd& omega) const {
  const auto& pr = spec_.prior;
  VectorXd g = VectorXd::Zero(layout_.dim);
  g.segment(layout_.beta, layout_.n_beta) =
      (omega.segment(layout_.beta, layout_.n_beta).array() - pr.beta_mean) / pr.beta_var;
  if (spec_.estimate_sigma) {
    g(layout_.sigma) = -halft_log_density_unconstrained_grad(omega(layout_.sigma), pr.halft_nu, pr.halft_scale);
    if (spec_.q == 2) {
      g(layout_.sigma + 1) =
          -halft_log_density_unconstrained_grad(omega(layout_.sigma + 1), pr.halft_nu, pr.halft_scale);
      g(layout_.sigma + 2) = rho_from_unconstrained(omega(layout_.sigma + 2));
    }
  }
  if (spec_.estimate_dispersion)
    g(layout_.dispersion) = -halft_log_density_unconstrained_grad(omega(layout_.dispersion), pr.halft_nu, pr.halft_scale);
  if (spec_.missingness) g.segment(layout_.alpha, layout_.n_alpha) = omega.segment(layout_.alpha, layout_.n_alpha) / pr.alpha_var;
  return g;
}

VectorXd Model::prior_center() const {
  VectorXd omega = VectorXd::Zero(layout_.dim);
  omega.segment(layout_.beta, layout_.n_beta).setConstant(spec_.prior.beta_mean);
  return omega;
}

}  // namespace glmm
