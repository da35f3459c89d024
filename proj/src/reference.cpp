#include "glmm/reference.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "glmm/errors.hpp"
#include "glmm/polya_gamma.hpp"
#include "glmm/transforms.hpp"

namespace glmm {

namespace {

MatrixXd marginal_cov(const SubjectView& s, double sigma2, const MatrixXd& Sigma) {
  MatrixXd V = s.Z * Sigma * s.Z.transpose();
  V.diagonal().array() += sigma2;
  return V;
}

// dSigma / d(delta_k) for the unconstrained covariance coordinates.
std::vector<MatrixXd> sigma_derivatives(const CovarianceCoords& c, Index q) {
  std::vector<MatrixXd> out;
  if (q == 1) {
    out.push_back(MatrixXd::Constant(1, 1, 2.0 * c.sd1 * c.sd1));
    return out;
  }
  const double off = c.rho * c.sd1 * c.sd2;
  MatrixXd d1(2, 2), d2(2, 2), dr(2, 2);
  d1 << 2.0 * c.sd1 * c.sd1, off, off, 0.0;
  d2 << 0.0, off, off, 2.0 * c.sd2 * c.sd2;
  const double drho = 0.5 * (1.0 - c.rho * c.rho);
  dr << 0.0, drho * c.sd1 * c.sd2, drho * c.sd1 * c.sd2, 0.0;
  out = {d1, d2, dr};
  return out;
}

double log_posterior_sigma(const Model& model, const VectorXd& omega, const MatrixXd& ggT, Index n) {
  const auto& L = model.layout();
  const MatrixXd Sigma = covariance_from_unconstrained(omega.segment(L.sigma, L.n_sigma), model.spec().q);
  Eigen::LLT<MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = llt.solve(ggT).trace();
  return model.prior_logdensity(omega) - 0.5 * static_cast<double>(n) * logdet - 0.5 * quad;
}

}  // namespace

LmmPosterior lmm_posterior(const Dataset& data, double sigma2, const MatrixXd& Sigma, const PriorSpec& prior) {
  const Index p = data.p();
  MatrixXd precision = MatrixXd::Zero(p, p);
  VectorXd rhs = VectorXd::Zero(p);
  if (std::isfinite(prior.beta_var)) {
    precision.diagonal().array() += 1.0 / prior.beta_var;
    rhs.array() += prior.beta_mean / prior.beta_var;
  }
  for (Index i = 0; i < data.n_subjects(); ++i) {
    const auto s = data.subject(i);
    Eigen::LLT<MatrixXd> llt(marginal_cov(s, sigma2, Sigma));
    if (llt.info() != Eigen::Success) throw NumericError("marginal covariance is singular", i);
    const MatrixXd VinvX = llt.solve(MatrixXd(s.X));
    precision.noalias() += s.X.transpose() * VinvX;
    rhs.noalias() += VinvX.transpose() * s.y;
  }
  Eigen::LLT<MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericError("posterior precision of beta is singular");
  LmmPosterior post;
  post.cov = llt.solve(MatrixXd::Identity(p, p));
  post.cov = 0.5 * (post.cov + post.cov.transpose());
  post.mean = llt.solve(rhs);
  return post;
}

VectorXd lmm_marginal_gradient(const Model& model, const Dataset& data, Index i, const VectorXd& omega) {
  if (model.family().tag() != Family::Gaussian)
    throw UnsupportedOperation("closed-form marginal gradient requires the Gaussian family");
  if (model.spec().missingness) throw UnsupportedOperation("closed-form marginal gradient without missingness only");
  const auto& L = model.layout();
  const Decoded par = model.decode(omega);
  const auto s = data.subject(i);
  Eigen::LLT<MatrixXd> llt(marginal_cov(s, par.phi, par.sigma));
  if (llt.info() != Eigen::Success) throw NumericError("marginal covariance is singular", i);
  const VectorXd r = s.y - s.X * par.beta;
  const VectorXd a = llt.solve(r);
  const MatrixXd Vinv = llt.solve(MatrixXd::Identity(r.size(), r.size()));

  VectorXd g = VectorXd::Zero(model.dim());
  g.segment(L.beta, L.n_beta) = -s.X.transpose() * a;
  // d(-log N)/d theta = (tr(V^{-1} D) - a^T D a) / 2 for D = dV/d theta.
  auto term = [&](const MatrixXd& D) { return 0.5 * ((Vinv.array() * D.array()).sum() - a.dot(D * a)); };
  if (model.spec().estimate_sigma) {
    const auto dS = sigma_derivatives(par.cov, model.spec().q);
    for (size_t k = 0; k < dS.size(); ++k)
      g(L.sigma + static_cast<Index>(k)) = term(s.Z * dS[k] * s.Z.transpose());
  }
  if (model.spec().estimate_dispersion) g(L.dispersion) = term(2.0 * par.phi * MatrixXd::Identity(r.size(), r.size()));
  return g;
}

double lmm_marginal_negloglik(const Model& model, const Dataset& data, const VectorXd& omega) {
  const Decoded par = model.decode(omega);
  double total = 0.0;
  for (Index i = 0; i < data.n_subjects(); ++i) {
    const auto s = data.subject(i);
    Eigen::LLT<MatrixXd> llt(marginal_cov(s, par.phi, par.sigma));
    if (llt.info() != Eigen::Success) throw NumericError("marginal covariance is singular", i);
    const VectorXd r = s.y - s.X * par.beta;
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    total += 0.5 * (logdet + r.dot(llt.solve(r)) + static_cast<double>(r.size()) * std::log(2.0 * std::numbers::pi));
  }
  return total;
}

PpdMoments lmm_ppd(const LmmPosterior& post, const MatrixXd& Xnew, const MatrixXd& Znew, double sigma2,
                   const MatrixXd& Sigma) {
  PpdMoments m;
  m.mean = Xnew * post.mean;
  m.cov = Xnew * post.cov * Xnew.transpose() + Znew * Sigma * Znew.transpose();
  m.cov.diagonal().array() += sigma2;
  return m;
}

VectorXd chain_ppd_variance(const MatrixXd& beta_draws, const MatrixXd& Xnew, const MatrixXd& Znew, double sigma2,
                            const MatrixXd& Sigma, Engine& eng) {
  const Index m = beta_draws.cols();
  if (m < 2) throw ConfigError("PPD variance needs at least two draws");
  const Index rows = Xnew.rows();
  const MatrixXd Lsig = Eigen::LLT<MatrixXd>(Sigma).matrixL();
  const double sd = std::sqrt(sigma2);
  MatrixXd ysim(rows, m);
  VectorXd z(Sigma.rows());
  for (Index k = 0; k < m; ++k) {
    for (Index j = 0; j < z.size(); ++j) z(j) = std_normal(eng);
    const VectorXd gamma = Lsig * z;
    ysim.col(k) = Xnew * beta_draws.col(k) + Znew * gamma;
    for (Index t = 0; t < rows; ++t) ysim(t, k) += sd * std_normal(eng);
  }
  const VectorXd mean = ysim.rowwise().mean();
  return (ysim.colwise() - mean).rowwise().squaredNorm() / static_cast<double>(m - 1);
}

double ppd_log_ratio(const VectorXd& estimated_var, const MatrixXd& true_cov) {
  return (estimated_var.array() / true_cov.diagonal().array()).log().mean();
}

GibbsChain full_gibbs_bernoulli(const Model& model, const Dataset& data, const GibbsOptions& opts) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  if (model.family().tag() != Family::BernoulliLogit) throw UnsupportedOperation("full Gibbs needs the logit family");
  if (model.spec().missingness) throw UnsupportedOperation("full Gibbs does not cover the missingness model");
  if (opts.thin < 1 || opts.iterations < 0 || opts.burn_in < 0) throw ConfigError("invalid Gibbs schedule");
  model.check(data);
  const auto& L = model.layout();
  const Index n = data.n_subjects();
  const Index p = data.p();
  const Index q = data.q();
  const auto& prior = model.spec().prior;

  VectorXd omega = opts.omega0.size() ? opts.omega0 : model.prior_center();
  if (omega.size() != model.dim()) throw ConfigError("Gibbs start has the wrong dimension");
  MatrixXd gamma = MatrixXd::Zero(q, n);
  std::vector<MatrixXd> xox(static_cast<size_t>(n));
  std::vector<VectorXd> xr(static_cast<size_t>(n));

  GibbsChain out;
  out.names = L.names;
  std::vector<VectorXd> kept;
  double log_scale = std::log(0.1);
  std::int64_t acc = 0, prop = 0;

  const Index total = opts.burn_in + opts.iterations;
  for (Index t = 0; t < total; ++t) {
    const Decoded par = model.decode(omega);
    const auto ut = static_cast<std::uint64_t>(t);

    auto subject_step = [&](Index i) {
      const auto s = data.subject(i);
      Engine eng = make_stream(opts.seed, StreamTag::Gibbs, ut, static_cast<std::uint64_t>(i));
      const Index ni = s.size();
      const VectorXd xb = s.X * par.beta;
      const VectorXd eta = xb + s.Z * gamma.col(i);
      VectorXd w(ni);
      for (Index r = 0; r < ni; ++r) w(r) = draw_polya_gamma(eta(r), eng);
      const VectorXd kappa = s.y.array() - 0.5;
      MatrixXd P = s.Z.transpose() * w.asDiagonal() * s.Z + par.sigma_inv;
      const VectorXd rhs = s.Z.transpose() * (kappa - w.cwiseProduct(xb));
      Eigen::LLT<MatrixXd> llt(P);
      if (llt.info() != Eigen::Success) throw NumericError("gamma precision not positive definite at sweep " +
                                                           std::to_string(t), i);
      VectorXd xi(q);
      for (Index j = 0; j < q; ++j) xi(j) = std_normal(eng);
      gamma.col(i) = llt.solve(rhs) + llt.matrixU().solve(xi);
      xox[static_cast<size_t>(i)] = s.X.transpose() * w.asDiagonal() * s.X;
      xr[static_cast<size_t>(i)] = s.X.transpose() * (kappa - w.cwiseProduct(s.Z * gamma.col(i)));
    };

    if (opts.exec == Exec::Parallel) {
      std::exception_ptr error;
#pragma omp parallel for schedule(static)
      for (Index i = 0; i < n; ++i) {
        try {
          subject_step(i);
        } catch (...) {
#pragma omp critical
          if (!error) error = std::current_exception();
        }
      }
      if (error) std::rethrow_exception(error);
    } else {
      for (Index i = 0; i < n; ++i) subject_step(i);
    }

    // beta | omega, gamma
    MatrixXd P = MatrixXd::Identity(p, p) / prior.beta_var;
    VectorXd rhs = VectorXd::Constant(p, prior.beta_mean / prior.beta_var);
    for (Index i = 0; i < n; ++i) {
      P += xox[static_cast<size_t>(i)];
      rhs += xr[static_cast<size_t>(i)];
    }
    Engine eng = make_stream(opts.seed, StreamTag::Gibbs, ut, static_cast<std::uint64_t>(n));
    Eigen::LLT<MatrixXd> llt(P);
    if (llt.info() != Eigen::Success) throw NumericError("beta precision not positive definite at sweep " + std::to_string(t));
    VectorXd xi(p);
    for (Index j = 0; j < p; ++j) xi(j) = std_normal(eng);
    omega.segment(L.beta, L.n_beta) = llt.solve(rhs) + llt.matrixU().solve(xi);

    // Sigma | gamma
    if (model.spec().estimate_sigma) {
      const MatrixXd ggT = gamma * gamma.transpose();
      double lp = log_posterior_sigma(model, omega, ggT, n);
      for (Index m = 0; m < opts.sigma_mh_steps; ++m) {
        VectorXd cand = omega;
        const double scale = std::exp(log_scale);
        for (Index j = 0; j < L.n_sigma; ++j) cand(L.sigma + j) += scale * std_normal(eng);
        const double lc = log_posterior_sigma(model, cand, ggT, n);
        const bool accept = std::log(uniform01(eng)) < lc - lp;
        if (accept) {
          omega = cand;
          lp = lc;
        }
        if (t < opts.adapt_sweeps) {
          const double gain = std::pow(static_cast<double>(t * opts.sigma_mh_steps + m + 1), -0.6);
          log_scale += gain * ((accept ? 1.0 : 0.0) - opts.target_accept);
        } else if (t >= opts.burn_in) {
          ++prop;
          acc += accept ? 1 : 0;
        }
      }
    }

    if (t >= opts.burn_in && (t - opts.burn_in + 1) % opts.thin == 0) {
      kept.push_back(omega);
      out.iterations.push_back(t + 1);
    }
  }
  out.samples.resize(model.dim(), static_cast<Index>(kept.size()));
  for (size_t c = 0; c < kept.size(); ++c) out.samples.col(static_cast<Index>(c)) = kept[c];
  out.sigma_acceptance = prop > 0 ? static_cast<double>(acc) / static_cast<double>(prop) : 0.0;
  out.runtime_seconds = std::chrono::duration<double>(clock::now() - start).count();
  return out;
}

}  // namespace glmm
