#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "glmm/dataset.hpp"
#include "glmm/errors.hpp"
#include "glmm/family.hpp"
#include "glmm/model.hpp"
#include "glmm/sim.hpp"
#include "glmm/transforms.hpp"
#include "oracles.hpp"

using namespace glmm;

namespace {

Dataset one_row(double x0, double x1, double y) {
  MatrixXd X(1, 2);
  X << x0, x1;
  VectorXd Y(1);
  Y << y;
  return Dataset(X, X, Y, {0, 1});
}

ModelSpec spec_for(Family f, bool missingness = false) {
  ModelSpec s;
  s.family = ExponentialFamily(f);
  s.estimate_dispersion = f == Family::Gaussian;
  s.missingness = missingness;
  if (missingness) {
    s.p = 3;
    s.alpha_columns = {2};
  }
  return s;
}

VectorXd random_omega(const Model& m, std::mt19937_64& eng) {
  std::normal_distribution<double> nd(0.0, 0.5);
  VectorXd w(m.dim());
  for (Index j = 0; j < w.size(); ++j) w[j] = nd(eng);
  return w;
}

}  // namespace

TEST(Family, MeanMatchesBPrimeAndDerivative) {
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> ud(-6, 6);
  for (Family f : {Family::Gaussian, Family::BernoulliLogit, Family::Poisson}) {
    ExponentialFamily ef(f);
    for (int r = 0; r < 50; ++r) {
      const double th = ud(eng);
      EXPECT_NEAR(ef.b_prime(th), ef.mean(th), 1e-12 * std::max(1.0, std::abs(ef.mean(th))));
      const double fd = (ef.b(th + 1e-5) - ef.b(th - 1e-5)) / 2e-5;
      EXPECT_TRUE(oracle::rel_close(ef.b_prime(th), fd, 1e-7)) << to_string(f) << " " << th;
    }
  }
}

TEST(Family, KnownLogLikelihoods) {
  EXPECT_NEAR(ExponentialFamily(Family::Gaussian).loglik(0.7, 0.7, 1.0), -0.5 * std::log(2 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(ExponentialFamily(Family::BernoulliLogit).loglik(1.0, 0.0, 1.0), -std::log(2.0), 1e-12);
  EXPECT_NEAR(ExponentialFamily(Family::Poisson).loglik(3.0, std::log(2.0), 1.0),
              3 * std::log(2.0) - 2.0 - std::log(6.0), 1e-12);
  EXPECT_THROW(parse_family("gamma"), ConfigError);
  EXPECT_EQ(parse_family("poisson"), Family::Poisson);
}

TEST(Family, SoftplusLogisticExtremes) {
  EXPECT_NEAR(softplus(800.0), 800.0, 1e-12);
  EXPECT_NEAR(softplus(-800.0), 0.0, 1e-300);
  EXPECT_NEAR(logistic(-800.0), 0.0, 1e-300);
  EXPECT_NEAR(logistic(0.0), 0.5, 1e-15);
}

TEST(Family, DispersionDerivativeOfC) {
  ExponentialFamily g(Family::Gaussian);
  for (double y : {-1.0, 0.0, 2.5})
    for (double phi : {0.3, 1.0, 4.0}) {
      const double fd = (g.c(y, phi + 1e-6) - g.c(y, phi - 1e-6)) / 2e-6;
      EXPECT_NEAR(g.c_prime(y, phi), fd, 1e-6);
    }
}

TEST(Transforms, RoundTrip) {
  std::mt19937_64 eng(5);
  std::normal_distribution<double> nd(0, 1.5);
  for (int r = 0; r < 100; ++r) {
    VectorXd d(3);
    d << nd(eng), nd(eng), nd(eng);
    const MatrixXd S = covariance_from_unconstrained(d, 2);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<MatrixXd>(S).eigenvalues().minCoeff(), 0.0);
    EXPECT_LT((unconstrained_from_covariance(S) - d).norm(), 1e-12 * std::max(1.0, d.norm()) * 10);
  }
  for (double rho : {-0.9, -0.25, 0.0, 0.6}) EXPECT_NEAR(rho_from_unconstrained(unconstrained_from_rho(rho)), rho, 1e-12);
  MatrixXd S(2, 2);
  S << 1.5, -0.25, -0.25, 1.5;
  EXPECT_LT((covariance_from_unconstrained(unconstrained_from_covariance(S), 2) - S).norm(), 1e-12);
}

TEST(Model, LayoutNames) {
  Model m(spec_for(Family::Gaussian, true));
  const auto& L = m.layout();
  EXPECT_EQ(m.dim(), 3 + 3 + 1 + 2);
  EXPECT_EQ(L.names[0], "beta_0");
  EXPECT_EQ(L.names[L.sigma], "delta_1");
  EXPECT_EQ(L.names[L.sigma + 2], "delta_rho");
  EXPECT_EQ(L.names[L.dispersion], "log_sd");
  EXPECT_EQ(L.blocks[L.alpha], "alpha");
}

TEST(Model, LinearPredictorExamples) {
  Model m(spec_for(Family::Gaussian));
  VectorXd beta(2), gamma(2);
  {
    Dataset d = one_row(1, 0, 0);
    beta << 1.5, -0.5;
    gamma.setZero();
    EXPECT_NEAR(m.linear_predictor(d, 0, beta, gamma)[0], 1.5, 1e-15);
    EXPECT_NEAR(m.linear_predictor(d, 0, VectorXd::Zero(2), gamma)[0], 0.0, 1e-15);
  }
  {
    Dataset d = one_row(1, 2, 0);
    beta << 1, 1;
    gamma << 0.5, -0.5;
    EXPECT_NEAR(m.linear_predictor(d, 0, beta, gamma)[0], 2.5, 1e-15);
  }
  EXPECT_THROW(m.linear_predictor(one_row(1, 2, 0), 0, VectorXd::Zero(3), gamma), ConfigError);
}

TEST(Model, ConditionalTermExamples) {
  {
    ModelSpec s = spec_for(Family::Gaussian);
    s.estimate_dispersion = false;
    s.fixed_dispersion = 1.0;
    Model m(s);
    Dataset d = one_row(1, 0, 1.5);
    VectorXd beta(2);
    beta << 1.5, 0.0;
    Decoded par = m.decode(m.encode(beta, MatrixXd::Identity(2, 2), 1.0));
    EXPECT_NEAR(m.conditional_loglik(d, 0, par, VectorXd::Zero(2)), -0.5 * std::log(2 * std::numbers::pi), 1e-12);
  }
  {
    Model m(spec_for(Family::BernoulliLogit));
    Dataset d = one_row(1, 0, 1.0);
    Decoded par = m.decode(m.encode(VectorXd::Zero(2), MatrixXd::Identity(2, 2), 1.0));
    EXPECT_NEAR(m.conditional_loglik(d, 0, par, VectorXd::Zero(2)), -std::log(2.0), 1e-12);
  }
}

TEST(Model, OverflowReportsSubject) {
  Model m(spec_for(Family::Poisson));
  Dataset d = one_row(1, 0, 1.0);
  VectorXd beta(2);
  beta << 800.0, 0.0;
  Decoded par = m.decode(m.encode(beta, MatrixXd::Identity(2, 2), 1.0));
  try {
    m.conditional_loglik(d, 0, par, VectorXd::Zero(2));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.subject(), 0);
  }
}

TEST(Model, BetaGradientExamples) {
  ModelSpec s = spec_for(Family::Gaussian);
  s.estimate_dispersion = false;
  s.fixed_dispersion = 1.0;
  Model m(s);
  Dataset d = one_row(1, 0, 2.0);
  VectorXd beta(2);
  beta << 0.5, 0.3;
  Decoded par = m.decode(m.encode(beta, MatrixXd::Identity(2, 2), 1.0));
  VectorXd g = m.grad_beta(d, 0, par, VectorXd::Zero(2));
  EXPECT_NEAR(g[0], 1.5, 1e-15);
  EXPECT_NEAR(g[1], 0.0, 1e-15);
  Dataset exact = one_row(1, 0, 0.5);
  EXPECT_LT(m.grad_beta(exact, 0, par, VectorXd::Zero(2)).norm(), 1e-15);
}

TEST(Model, DispersionGradientUnsupportedWithoutDispersion) {
  Model m(spec_for(Family::BernoulliLogit));
  Dataset d = one_row(1, 0, 1.0);
  Decoded par = m.decode(VectorXd::Zero(m.dim()));
  EXPECT_THROW(m.grad_dispersion(d, 0, par, VectorXd::Zero(2)), UnsupportedOperation);
}

TEST(Model, SigmaGradientExamples) {
  Model m(spec_for(Family::Gaussian));
  Decoded par = m.decode(VectorXd::Zero(m.dim()));
  VectorXd g = m.grad_sigma(par, VectorXd::Zero(2));
  EXPECT_NEAR(g[0], -1.0, 1e-15);
  EXPECT_NEAR(g[1], -1.0, 1e-15);
  EXPECT_NEAR(g[2], 0.0, 1e-15);
}

TEST(Model, AlphaGradientExamples) {
  ModelSpec s = spec_for(Family::Gaussian, true);
  Model m(s);
  MatrixXd X(1, 3);
  X << 1, 0, 2.0;
  VectorXd y = VectorXd::Zero(1);
  Dataset d(X, X.leftCols(2), y, {0, 1}, std::vector<int>{1});
  VectorXd omega = VectorXd::Zero(m.dim());
  VectorXd g = m.grad_alpha(d, 0, m.decode(omega));
  EXPECT_NEAR(g[0], 0.5, 1e-15);
  EXPECT_NEAR(g[1], 1.0, 1e-15);
  omega[m.layout().alpha] = 40.0;
  EXPECT_NEAR(m.grad_alpha(d, 0, m.decode(omega)).norm(), 0.0, 1e-15);

  Dataset no_w(X, X.leftCols(2), y, {0, 1});
  EXPECT_THROW(m.check(no_w), ConfigError);
}

TEST(Model, PriorGradientExamples) {
  Model m(spec_for(Family::Gaussian));
  VectorXd omega = VectorXd::Zero(m.dim());
  omega[0] = 1.5;
  omega[1] = -0.5;
  VectorXd g = m.prior_grad(omega);
  EXPECT_NEAR(g[0], 0.015, 1e-15);
  EXPECT_NEAR(g[1], -0.005, 1e-15);
  EXPECT_NEAR(g[m.layout().sigma + 2], 0.0, 1e-15);
}

TEST(Model, EncodeDecodeRoundTrip) {
  Model m(spec_for(Family::Gaussian, true));
  VectorXd beta(3), alpha(2);
  beta << 1.5, -0.5, 0.5;
  alpha << -1, 0.5;
  MatrixXd S(2, 2);
  S << 1.5, -0.25, -0.25, 1.5;
  Decoded par = m.decode(m.encode(beta, S, 2.0, alpha));
  EXPECT_LT((par.beta - beta).norm(), 1e-14);
  EXPECT_LT((par.sigma - S).norm(), 1e-12);
  EXPECT_NEAR(par.phi, 2.0, 1e-12);
  EXPECT_LT((par.alpha - alpha).norm(), 1e-14);
  EXPECT_THROW(m.decode(VectorXd::Zero(3)), ConfigError);
}

// Every analytic block against central differences of joint_loglik.
class JointGradientFd : public ::testing::TestWithParam<std::tuple<Family, bool>> {};

TEST_P(JointGradientFd, MatchesCentralDifferences) {
  const auto [fam, miss] = GetParam();
  Model m(spec_for(fam, miss));
  Design design = miss ? Design::Missingness
                       : (fam == Family::Gaussian ? Design::GaussianUnknown
                                                  : (fam == Family::Poisson ? Design::Poisson : Design::Bernoulli));
  Dataset data = generate_data(design, 20, 5, default_truth(design), 11);
  std::mt19937_64 eng(17);
  std::normal_distribution<double> nd(0, 0.7);
  for (int r = 0; r < 20; ++r) {
    const VectorXd omega = random_omega(m, eng);
    const Index i = r % data.n_subjects();
    VectorXd gamma(2);
    gamma << nd(eng), nd(eng);
    VectorXd g(m.dim());
    m.joint_grad(data, i, m.decode(omega), gamma, g);
    const VectorXd fd =
        oracle::central_difference([&](const VectorXd& w) { return m.joint_loglik(data, i, w, gamma); }, omega);
    EXPECT_LT(oracle::max_rel_error(g, fd), 1e-6) << "point " << r;
  }
}

INSTANTIATE_TEST_SUITE_P(Families, JointGradientFd,
                         ::testing::Values(std::make_tuple(Family::Gaussian, false),
                                           std::make_tuple(Family::BernoulliLogit, false),
                                           std::make_tuple(Family::Poisson, false),
                                           std::make_tuple(Family::Gaussian, true),
                                           std::make_tuple(Family::BernoulliLogit, true),
                                           std::make_tuple(Family::Poisson, true)),
                         [](const auto& info) {
                           std::string name(to_string(std::get<0>(info.param)));
                           return name + (std::get<1>(info.param) ? "_missingness" : "");
                         });

TEST(Model, PriorGradientMatchesFd) {
  Model m(spec_for(Family::Gaussian, true));
  std::mt19937_64 eng(23);
  for (int r = 0; r < 20; ++r) {
    const VectorXd omega = random_omega(m, eng);
    const VectorXd fd = oracle::central_difference([&](const VectorXd& w) { return -m.prior_logdensity(w); }, omega);
    EXPECT_LT(oracle::max_rel_error(m.prior_grad(omega), fd), 1e-6);
  }
}

TEST(Model, JointLogLikMatchesIndependentDensity) {
  for (Family f : {Family::Gaussian, Family::BernoulliLogit, Family::Poisson}) {
    Model m(spec_for(f));
    Design design = f == Family::Gaussian ? Design::GaussianUnknown
                                          : (f == Family::Poisson ? Design::Poisson : Design::Bernoulli);
    Dataset data = generate_data(design, 5, 4, default_truth(design), 3);
    std::mt19937_64 eng(29);
    const VectorXd omega = random_omega(m, eng);
    const Decoded par = m.decode(omega);
    VectorXd gamma(2);
    gamma << 0.3, -0.4;
    const auto s = data.subject(1);
    const double ref = oracle::conditional_logdensity(f, s.X, s.Z, s.y, par.beta, par.sigma, par.phi, gamma);
    // Bernoulli and Gaussian carry all constants; Poisson too (lgamma term)
    EXPECT_NEAR(m.joint_loglik(data, 1, omega, gamma), ref, 1e-10) << to_string(f);
  }
}

TEST(Dataset, CsvRoundTrip) {
  Dataset d = generate_data(Design::Missingness, 6, 4, default_truth(Design::Missingness), 2);
  std::stringstream ss;
  write_dataset_csv(d, ss);
  Dataset back = read_dataset_csv(ss);
  EXPECT_EQ(back.n_subjects(), 6);
  EXPECT_TRUE(back.X().isApprox(d.X()));
  EXPECT_TRUE(back.y().isApprox(d.y()));
  ASSERT_TRUE(back.has_indicator());
  EXPECT_EQ(*back.indicator(), *d.indicator());
}

TEST(Dataset, RejectsMalformedInput) {
  std::stringstream bad("subject_id,t,y,x_1,z_1\n1,1,0.5,1\n");
  EXPECT_THROW(read_dataset_csv(bad), ConfigError);
  std::stringstream mixed_w("subject_id,t,y,x_1,z_1,w\n1,1,0,1,1,1\n1,2,0,1,1,0\n");
  EXPECT_THROW(read_dataset_csv(mixed_w), ConfigError);
}
