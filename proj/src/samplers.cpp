#include "glmm/samplers.hpp"

#include <cmath>
#include <limits>

#include "glmm/errors.hpp"
#include "glmm/polya_gamma.hpp"

namespace glmm {

SamplerKind parse_sampler_kind(std::string_view name) {
  if (name == "auto") return SamplerKind::Auto;
  if (name == "exact" || name == "exact-gaussian") return SamplerKind::ExactGaussian;
  if (name == "pg" || name == "polya-gamma") return SamplerKind::PolyaGammaGibbs;
  if (name == "mh" || name == "rw-mh") return SamplerKind::RandomWalkMH;
  if (name == "mixture") return SamplerKind::PriorMixture;
  throw ConfigError("unknown sampler '" + std::string(name) + "'");
}

std::string_view to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::Auto: return "auto";
    case SamplerKind::ExactGaussian: return "exact-gaussian";
    case SamplerKind::PolyaGammaGibbs: return "polya-gamma";
    case SamplerKind::RandomWalkMH: return "rw-mh";
    case SamplerKind::PriorMixture: return "mixture";
  }
  return "?";
}

namespace {

SamplerKind family_default(const Model& model) {
  switch (model.family().tag()) {
    case Family::Gaussian: return SamplerKind::ExactGaussian;
    case Family::BernoulliLogit: return SamplerKind::PolyaGammaGibbs;
    case Family::Poisson: return SamplerKind::RandomWalkMH;
  }
  return SamplerKind::RandomWalkMH;
}

// Draw from N(P^{-1} rhs, P^{-1}) given the precision P.
void draw_from_precision(const MatrixXd& precision, const VectorXd& rhs, Eigen::Ref<VectorXd> out, Engine& eng,
                         std::normal_distribution<double>& norm) {
  Eigen::LLT<MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericError("conditional precision is not positive definite");
  VectorXd xi(rhs.size());
  for (Index j = 0; j < xi.size(); ++j) xi(j) = norm(eng);
  out = llt.solve(rhs) + llt.matrixU().solve(xi);
}

}  // namespace

SamplerKind resolve_sampler(const Model& model, SamplerKind requested) {
  if (requested != SamplerKind::Auto) return requested;
  if (model.spec().missingness) return SamplerKind::PriorMixture;
  return family_default(model);
}

void gaussian_conditional_moments(const SubjectView& s, const Decoded& par, VectorXd& mean, MatrixXd& cov) {
  const MatrixXd precision = s.Z.transpose() * s.Z / par.phi + par.sigma_inv;
  Eigen::LLT<MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericError("Gaussian conditional precision is not positive definite");
  cov = llt.solve(MatrixXd::Identity(precision.rows(), precision.cols()));
  mean = llt.solve(s.Z.transpose() * (s.y - s.X * par.beta) / par.phi);
}

MatrixXd sample_exact_gaussian(const Model& model, const SubjectView& s, const Decoded& par, Index R, Engine& eng) {
  if (model.family().tag() != Family::Gaussian)
    throw UnsupportedOperation("exact conditional sampling requires the Gaussian family");
  const MatrixXd precision = s.Z.transpose() * s.Z / par.phi + par.sigma_inv;
  Eigen::LLT<MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericError("Gaussian conditional precision is not positive definite");
  const VectorXd mean = llt.solve(s.Z.transpose() * (s.y - s.X * par.beta) / par.phi);
  const Index q = precision.rows();
  std::normal_distribution<double> norm(0.0, 1.0);
  MatrixXd xi(q, R);
  for (Index r = 0; r < R; ++r)
    for (Index j = 0; j < q; ++j) xi(j, r) = norm(eng);
  MatrixXd draws = llt.matrixU().solve(xi);
  draws.colwise() += mean;
  return draws;
}

MatrixXd sample_prior(const Decoded& par, Index R, Engine& eng) {
  const Index q = par.sigma.rows();
  std::normal_distribution<double> norm(0.0, 1.0);
  MatrixXd xi(q, R);
  for (Index r = 0; r < R; ++r)
    for (Index j = 0; j < q; ++j) xi(j, r) = norm(eng);
  return par.sigma_chol * xi;
}

MatrixXd pg_gibbs_run(const Model& model, const SubjectView& s, const Decoded& par, Index R, Index burn_in,
                      LatentState& state, Engine& eng) {
  if (model.family().tag() != Family::BernoulliLogit)
    throw UnsupportedOperation("Polya-Gamma Gibbs requires the Bernoulli-logit family");
  const Index q = par.sigma.rows();
  const Index nt = s.size();
  if (state.gamma.size() != q) state.gamma = VectorXd::Zero(q);

  const VectorXd xb = s.X * par.beta;
  const VectorXd kappa = s.y.array() - 0.5;
  VectorXd omega(nt);
  MatrixXd precision(q, q);
  VectorXd rhs(q);
  MatrixXd out(q, R);
  std::normal_distribution<double> norm(0.0, 1.0);
  VectorXd gamma = state.gamma;

  for (Index it = 0; it < burn_in + R; ++it) {
    const VectorXd eta = xb + s.Z * gamma;
    for (Index t = 0; t < nt; ++t) omega(t) = draw_polya_gamma(eta(t), eng);
    precision.noalias() = s.Z.transpose() * omega.asDiagonal() * s.Z;
    precision += par.sigma_inv;
    rhs.noalias() = s.Z.transpose() * (kappa - omega.cwiseProduct(xb));
    draw_from_precision(precision, rhs, gamma, eng, norm);
    if (it >= burn_in) out.col(it - burn_in) = gamma;
  }
  state.gamma = gamma;
  return out;
}

MatrixXd rw_mh_run(const Model& model, const SubjectView& s, const Decoded& par, Index R, Index burn_in,
                   LatentState& state, Engine& eng, double target_accept) {
  const Index q = par.sigma.rows();
  if (state.gamma.size() != q) state.gamma = VectorXd::Zero(q);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto log_target = [&](const VectorXd& g) {
    return model.conditional_loglik(s, par, g) + model.random_effect_logdensity(par, g);
  };

  VectorXd gamma = state.gamma;
  double current = log_target(gamma);
  VectorXd xi(q), proposal(q);
  MatrixXd out(q, R);
  for (Index it = 0; it < burn_in + R; ++it) {
    for (Index j = 0; j < q; ++j) xi(j) = norm(eng);
    proposal.noalias() = gamma + std::exp(state.log_scale) * (par.sigma_chol * xi);
    double candidate;
    try {
      candidate = log_target(proposal);
    } catch (const NumericError&) {
      candidate = -std::numeric_limits<double>::infinity();
    }
    const double log_ratio = candidate - current;
    const bool accept = std::log(unif(eng)) < log_ratio;
    if (accept) {
      gamma = proposal;
      current = candidate;
    }
    if (it < burn_in) {
      const double prob = std::isfinite(log_ratio) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
      ++state.adapt_steps;
      state.log_scale += (prob - target_accept) / std::pow(static_cast<double>(state.adapt_steps), 0.6);
    } else {
      ++state.proposed;
      if (accept) ++state.accepted;
      out.col(it - burn_in) = gamma;
    }
  }
  state.gamma = gamma;
  return out;
}

LatentDraws sample_mixture_conditional(const Model& model, const SubjectView& s, const Decoded& par, int w, Index R,
                                       const SamplerOptions& opts, LatentState& state, Engine& eng) {
  if (w == 1) return {sample_prior(par, R, eng), true};
  switch (family_default(model)) {
    case SamplerKind::ExactGaussian: return {sample_exact_gaussian(model, s, par, R, eng), true};
    case SamplerKind::PolyaGammaGibbs: return {pg_gibbs_run(model, s, par, R, opts.burn_in, state, eng), false};
    default: return {rw_mh_run(model, s, par, R, opts.burn_in, state, eng, opts.mh_target_accept), false};
  }
}

LatentDraws draw_latents(const Model& model, const Dataset& data, Index i, const Decoded& par, Index R,
                         const SamplerOptions& opts, LatentState& state, Engine& eng) {
  const auto s = data.subject(i);
  if (state.gamma.size() == 0 && state.adapt_steps == 0) state.log_scale = std::log(opts.mh_initial_scale);
  if (!opts.warm_start) {
    state.gamma.resize(0);
    state.log_scale = std::log(opts.mh_initial_scale);
    state.adapt_steps = 0;
  }
  try {
    switch (resolve_sampler(model, opts.kind)) {
      case SamplerKind::ExactGaussian: return {sample_exact_gaussian(model, s, par, R, eng), true};
      case SamplerKind::PolyaGammaGibbs: return {pg_gibbs_run(model, s, par, R, opts.burn_in, state, eng), false};
      case SamplerKind::RandomWalkMH:
        return {rw_mh_run(model, s, par, R, opts.burn_in, state, eng, opts.mh_target_accept), false};
      case SamplerKind::PriorMixture: {
        if (!s.w) throw ConfigError("mixture sampler requires w for subject " + std::to_string(i));
        return sample_mixture_conditional(model, s, par, *s.w, R, opts, state, eng);
      }
      case SamplerKind::Auto: break;
    }
  } catch (const NumericError& e) {
    if (e.subject() >= 0) throw;
    throw NumericError(e.what(), i);
  }
  throw ConfigError("unresolved sampler");
}

}  // namespace glmm
