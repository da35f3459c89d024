#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "glmm/errors.hpp"
#include "glmm/model.hpp"
#include "glmm/polya_gamma.hpp"
#include "glmm/samplers.hpp"
#include "glmm/sim.hpp"
#include "oracles.hpp"

using namespace glmm;

namespace {

double pg_variance(double c) {
  if (std::abs(c) < 1e-4) return 1.0 / 24.0;
  const double ch = std::cosh(c / 2);
  return (std::sinh(c) - c) / (4 * c * c * c * ch * ch);
}

ModelSpec family_spec(Family f) {
  ModelSpec s;
  s.family = ExponentialFamily(f);
  s.estimate_dispersion = f == Family::Gaussian;
  return s;
}

// Checks every coordinate's long-run mean against `truth` within k batch-means SE.
void expect_means(const MatrixXd& draws, const VectorXd& truth, double k, const char* what) {
  for (Index j = 0; j < draws.rows(); ++j) {
    const VectorXd row = draws.row(j).transpose();
    const double se = oracle::batch_means_se(row);
    EXPECT_LT(std::abs(row.mean() - truth[j]), k * se) << what << " coord " << j << " se " << se;
  }
}

}  // namespace

TEST(PolyaGamma, MeanAndVarianceMatchClosedForm) {
  for (double c : {0.0, 0.5, 2.0, 5.0}) {
    Engine eng = make_stream(7, StreamTag::Gibbs, static_cast<std::uint64_t>(c * 10));
    const int N = c == 0.0 ? 1000000 : 200000;
    double s = 0, s2 = 0;
    for (int r = 0; r < N; ++r) {
      const double x = draw_polya_gamma(c, eng);
      ASSERT_GT(x, 0.0);
      s += x;
      s2 += x * x;
    }
    const double mean = s / N, var = s2 / N - mean * mean;
    const double expect = c == 0.0 ? 0.25 : std::tanh(c / 2) / (2 * c);
    EXPECT_NEAR(polya_gamma_mean(c), expect, 1e-15);
    EXPECT_LT(std::abs(mean - expect), 3 * std::sqrt(pg_variance(c) / N)) << "c=" << c;
    EXPECT_NEAR(var / pg_variance(c), 1.0, 0.03) << "c=" << c;
  }
}

TEST(Samplers, ExactGaussianMatchesConjugateMoments) {
  Model m(family_spec(Family::Gaussian));
  Dataset d = generate_data(Design::GaussianUnknown, 3, 8, default_truth(Design::GaussianUnknown), 4);
  const Decoded par = m.decode(m.encode(default_truth(Design::GaussianUnknown).beta,
                                        default_truth(Design::GaussianUnknown).Sigma, 2.0));
  const auto s = d.subject(1);
  VectorXd mean;
  MatrixXd cov;
  gaussian_conditional_moments(s, par, mean, cov);
  Engine eng = make_stream(1, StreamTag::Latent);
  const MatrixXd draws = sample_exact_gaussian(m, s, par, 100000, eng);
  for (Index j = 0; j < 2; ++j) {
    const double se = std::sqrt(cov(j, j) / draws.cols());
    EXPECT_LT(std::abs(draws.row(j).mean() - mean[j]), 3 * se);
  }
  const MatrixXd centred = draws.colwise() - mean;
  const MatrixXd emp = centred * centred.transpose() / draws.cols();
  for (Index a = 0; a < 2; ++a)
    for (Index b = 0; b < 2; ++b) {
      const double se = std::sqrt((cov(a, a) * cov(b, b) + cov(a, b) * cov(a, b)) / draws.cols());
      EXPECT_LT(std::abs(emp(a, b) - cov(a, b)), 3 * se);
    }
  Model bern(family_spec(Family::BernoulliLogit));
  EXPECT_THROW(sample_exact_gaussian(bern, s, bern.decode(VectorXd::Zero(bern.dim())), 2, eng),
               UnsupportedOperation);
}

TEST(Samplers, ExactGaussianDegenerateLimits) {
  Model m(family_spec(Family::Gaussian));
  MatrixXd X = MatrixXd::Zero(3, 2);
  Dataset d(X, X, VectorXd::Ones(3), {0, 3});
  MatrixXd S(2, 2);
  S << 1.5, -0.25, -0.25, 1.5;
  Decoded par = m.decode(m.encode(VectorXd::Zero(2), S, 1.0));
  Engine eng = make_stream(2, StreamTag::Latent);
  const MatrixXd draws = sample_exact_gaussian(m, d.subject(0), par, 100000, eng);
  const MatrixXd emp = draws * draws.transpose() / draws.cols();
  EXPECT_NEAR(emp(0, 0), 1.5, 3 * 1.5 * std::sqrt(2.0 / draws.cols()));
  EXPECT_NEAR(emp(0, 1), -0.25, 3 * std::sqrt((1.5 * 1.5 + 0.0625) / draws.cols()));

  Dataset d2 = generate_data(Design::GaussianUnknown, 1, 5, default_truth(Design::GaussianUnknown), 1);
  Decoded tiny = m.decode(m.encode(VectorXd::Zero(2), 1e-10 * MatrixXd::Identity(2, 2), 1.0));
  EXPECT_LT(sample_exact_gaussian(m, d2.subject(0), tiny, 100, eng).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Samplers, PolyaGammaGibbsMatchesQuadrature) {
  Model m(family_spec(Family::BernoulliLogit));
  const TrueParams truth = default_truth(Design::Bernoulli);
  Dataset d = generate_data(Design::Bernoulli, 2, 8, truth, 9);
  const Decoded par = m.decode(m.encode(truth.beta, truth.Sigma, 1.0));
  const auto s = d.subject(0);
  const auto ld = [&](const VectorXd& g) {
    return oracle::conditional_logdensity(Family::BernoulliLogit, s.X, s.Z, s.y, par.beta, par.sigma, 1.0, g);
  };
  const oracle::Moments q = oracle::grid_moments_2d(ld, VectorXd::Zero(2), VectorXd::Constant(2, 7.0));
  LatentState st;
  Engine eng = make_stream(3, StreamTag::Latent);
  const MatrixXd draws = pg_gibbs_run(m, s, par, 60000, 200, st, eng);
  expect_means(draws, q.mean, 3.0, "pg mean");
  const MatrixXd sq = draws.array().square();
  expect_means(sq, VectorXd(q.cov.diagonal() + q.mean.cwiseAbs2()), 3.0, "pg second moment");
}

TEST(Samplers, PolyaGammaGibbsAgreesWithMetropolis) {
  ModelSpec spec = family_spec(Family::BernoulliLogit);
  Model m(spec);
  const TrueParams truth = default_truth(Design::Bernoulli);
  Dataset d = generate_data(Design::Bernoulli, 2, 8, truth, 12);
  const Decoded par = m.decode(m.encode(truth.beta, truth.Sigma, 1.0));
  LatentState a, b;
  Engine e1 = make_stream(5, StreamTag::Latent), e2 = make_stream(6, StreamTag::Latent);
  const MatrixXd pg = pg_gibbs_run(m, d.subject(1), par, 40000, 200, a, e1);
  const MatrixXd mh = rw_mh_run(m, d.subject(1), par, 200000, 2000, b, e2);
  for (Index j = 0; j < 2; ++j) {
    const VectorXd x = pg.row(j).transpose(), y = mh.row(j).transpose();
    const double se = std::hypot(oracle::batch_means_se(x), oracle::batch_means_se(y));
    EXPECT_LT(std::abs(x.mean() - y.mean()), 3.5 * se) << j;
  }
}

TEST(Samplers, PolyaGammaGibbsShiftsTowardPositiveObservation) {
  Model m(family_spec(Family::BernoulliLogit));
  MatrixXd X(1, 2);
  X << 1, 0.5;
  VectorXd y(1);
  y << 1;
  Dataset d(X, X, y, {0, 1});
  Decoded par = m.decode(m.encode(VectorXd::Zero(2), 25.0 * MatrixXd::Identity(2, 2), 1.0));
  LatentState st;
  Engine eng = make_stream(8, StreamTag::Latent);
  const MatrixXd draws = pg_gibbs_run(m, d.subject(0), par, 20000, 100, st, eng);
  const VectorXd eta = X.row(0) * draws;
  EXPECT_GT((eta.array() > 0).cast<double>().mean(), 0.5);
}

TEST(Samplers, RandomWalkOnGaussianMatchesExact) {
  Model m(family_spec(Family::Gaussian));
  const TrueParams truth = default_truth(Design::GaussianUnknown);
  Dataset d = generate_data(Design::GaussianUnknown, 2, 6, truth, 21);
  const Decoded par = m.decode(m.encode(truth.beta, truth.Sigma, 2.0));
  VectorXd mean;
  MatrixXd cov;
  gaussian_conditional_moments(d.subject(0), par, mean, cov);
  LatentState st;
  Engine eng = make_stream(9, StreamTag::Latent);
  const MatrixXd draws = rw_mh_run(m, d.subject(0), par, 200000, 2000, st, eng);
  expect_means(draws, mean, 3.0, "mh mean");
  const MatrixXd sq = draws.array().square();
  expect_means(sq, VectorXd(cov.diagonal() + mean.cwiseAbs2()), 3.0, "mh second moment");
  EXPECT_GT(st.acceptance_rate(), 0.1);
  EXPECT_LT(st.acceptance_rate(), 0.6);
}

TEST(Samplers, RandomWalkOnPoissonMatchesQuadrature) {
  Model m(family_spec(Family::Poisson));
  const TrueParams truth = default_truth(Design::Poisson);
  Dataset d = generate_data(Design::Poisson, 2, 6, truth, 33);
  const Decoded par = m.decode(m.encode(truth.beta, truth.Sigma, 1.0));
  const auto s = d.subject(0);
  const auto ld = [&](const VectorXd& g) {
    return oracle::conditional_logdensity(Family::Poisson, s.X, s.Z, s.y, par.beta, par.sigma, 1.0, g);
  };
  const oracle::Moments q = oracle::grid_moments_2d(ld, VectorXd::Zero(2), VectorXd::Constant(2, 6.0));
  LatentState st;
  Engine eng = make_stream(10, StreamTag::Latent);
  const MatrixXd draws = rw_mh_run(m, s, par, 200000, 2000, st, eng);
  expect_means(draws, q.mean, 3.0, "poisson mh mean");
  for (Index j = 0; j < 2; ++j)
    EXPECT_NEAR(draws.row(j).mean(), q.mean[j], 0.02 * std::max(std::abs(q.mean[j]), std::sqrt(q.cov(j, j))));
}

TEST(Samplers, TinyProposalScaleAcceptsAlmostEverything) {
  Model m(family_spec(Family::Poisson));
  Dataset d = generate_data(Design::Poisson, 1, 4, default_truth(Design::Poisson), 2);
  const Decoded par = m.decode(VectorXd::Zero(m.dim()));
  LatentState st;
  st.log_scale = std::log(1e-8);
  Engine eng = make_stream(11, StreamTag::Latent);
  rw_mh_run(m, d.subject(0), par, 2000, 0, st, eng);
  EXPECT_GT(st.acceptance_rate(), 0.99);
}

TEST(Samplers, MixtureUsesPriorWhenIndicatorSet) {
  Model m(design_model(Design::Missingness, default_truth(Design::Missingness)));
  Dataset d = generate_data(Design::Missingness, 40, 5, default_truth(Design::Missingness), 5);
  const TrueParams t = default_truth(Design::Missingness);
  const Decoded par = m.decode(m.encode(t.beta, t.Sigma, 1.0, t.alpha));
  Index with_w = -1;
  for (Index i = 0; i < d.n_subjects(); ++i)
    if ((*d.indicator())[i] == 1) with_w = i;
  ASSERT_GE(with_w, 0);
  SamplerOptions opts;
  LatentState st;
  Engine eng = make_stream(12, StreamTag::Latent);
  ASSERT_EQ(resolve_sampler(m, SamplerKind::Auto), SamplerKind::PriorMixture);
  const LatentDraws out = draw_latents(m, d, with_w, par, 100000, opts, st, eng);
  EXPECT_TRUE(out.independent);
  const MatrixXd emp = out.draws * out.draws.transpose() / out.draws.cols();
  for (Index a = 0; a < 2; ++a)
    for (Index b = 0; b < 2; ++b) {
      const double se = std::sqrt((t.Sigma(a, a) * t.Sigma(b, b) + t.Sigma(a, b) * t.Sigma(a, b)) / out.draws.cols());
      EXPECT_LT(std::abs(emp(a, b) - t.Sigma(a, b)), 3 * se);
    }
}

TEST(Samplers, MixtureDelegatesWhenIndicatorClear) {
  Model m(design_model(Design::Missingness, default_truth(Design::Missingness)));
  Dataset d = generate_data(Design::Missingness, 40, 5, default_truth(Design::Missingness), 5);
  const TrueParams t = default_truth(Design::Missingness);
  const Decoded par = m.decode(m.encode(t.beta, t.Sigma, 1.0, t.alpha));
  Index without_w = -1;
  for (Index i = 0; i < d.n_subjects(); ++i)
    if ((*d.indicator())[i] == 0) without_w = i;
  ASSERT_GE(without_w, 0);
  SamplerOptions opts;
  LatentState s1, s2;
  Engine e1 = make_stream(13, StreamTag::Latent), e2 = make_stream(13, StreamTag::Latent);
  const LatentDraws mix = sample_mixture_conditional(m, d.subject(without_w), par, 0, 50, opts, s1, e1);
  const MatrixXd pg = pg_gibbs_run(m, d.subject(without_w), par, 50, opts.burn_in, s2, e2);
  EXPECT_FALSE(mix.independent);
  EXPECT_EQ(mix.draws, pg);
}

TEST(Samplers, ParseKinds) {
  EXPECT_EQ(parse_sampler_kind("rw-mh"), SamplerKind::RandomWalkMH);
  EXPECT_THROW(parse_sampler_kind("hmc"), ConfigError);
}
