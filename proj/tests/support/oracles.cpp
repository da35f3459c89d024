#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace oracle {

VectorXd central_difference(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h) {
  VectorXd g(x.size());
  for (Index j = 0; j < x.size(); ++j) {
    VectorXd a = x, b = x;
    a[j] += h;
    b[j] -= h;
    g[j] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

double max_rel_error(const VectorXd& a, const VectorXd& b) {
  double worst = 0.0;
  for (Index j = 0; j < a.size(); ++j)
    worst = std::max(worst, std::abs(a[j] - b[j]) / std::max(1.0, std::abs(b[j])));
  return worst;
}

MatrixXd kronecker_lyapunov(const MatrixXd& sigma, const MatrixXd& gamma) {
  const Index d = sigma.rows();
  MatrixXd K = MatrixXd::Zero(d * d, d * d);
  // column-major vec: vec(Sigma A) = (I kron Sigma) vec A, vec(A Sigma) = (Sigma^T kron I) vec A
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) {
      K.block(i * d, j * d, d, d) += (i == j ? 1.0 : 0.0) * sigma;
      K.block(i * d, j * d, d, d) += sigma(j, i) * MatrixXd::Identity(d, d);
    }
  MatrixXd rhs = 2.0 * gamma;
  VectorXd v = K.fullPivLu().solve(Eigen::Map<const VectorXd>(rhs.data(), d * d));
  return Eigen::Map<const MatrixXd>(v.data(), d, d);
}

MatrixXd random_spd(Index d, std::uint64_t seed, double min_eig, double max_eig) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(std::log(min_eig), std::log(max_eig));
  MatrixXd M(d, d);
  for (Index i = 0; i < d * d; ++i) M.data()[i] = nd(eng);
  Eigen::HouseholderQR<MatrixXd> qr(M);
  MatrixXd Q = qr.householderQ();
  VectorXd lam(d);
  for (Index i = 0; i < d; ++i) lam[i] = std::exp(ud(eng));
  MatrixXd S = Q * lam.asDiagonal() * Q.transpose();
  return 0.5 * (S + S.transpose());
}

double batch_means_se(const VectorXd& x) {
  const Index m = x.size();
  const Index B = std::max<Index>(2, static_cast<Index>(std::sqrt(static_cast<double>(m))));
  const Index len = m / B;
  VectorXd means(B);
  for (Index b = 0; b < B; ++b) means[b] = x.segment(b * len, len).mean();
  const double mu = means.mean();
  const double var = (means.array() - mu).square().sum() / static_cast<double>(B - 1);
  return std::sqrt(var / static_cast<double>(B));
}

double conditional_logdensity(glmm::Family family, const MatrixXd& X, const MatrixXd& Z, const VectorXd& y,
                              const VectorXd& beta, const MatrixXd& Sigma, double phi, const VectorXd& gamma) {
  const VectorXd eta = X * beta + Z * gamma;
  double ll = 0.0;
  for (Index t = 0; t < y.size(); ++t) {
    switch (family) {
      case glmm::Family::Gaussian:
        ll += -0.5 * std::log(2 * std::numbers::pi * phi) - 0.5 * (y[t] - eta[t]) * (y[t] - eta[t]) / phi;
        break;
      case glmm::Family::BernoulliLogit:
        ll += y[t] * eta[t] - std::log1p(std::exp(eta[t]));
        break;
      case glmm::Family::Poisson:
        ll += y[t] * eta[t] - std::exp(eta[t]) - std::lgamma(y[t] + 1.0);
        break;
    }
  }
  Eigen::LLT<MatrixXd> llt(Sigma);
  const VectorXd z = llt.matrixL().solve(gamma);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return ll - 0.5 * z.squaredNorm() - 0.5 * logdet - 0.5 * gamma.size() * std::log(2 * std::numbers::pi);
}

Moments grid_moments_2d(const std::function<double(const VectorXd&)>& logdens, const VectorXd& centre,
                        const VectorXd& halfwidth, Index N) {
  MatrixXd L(N, N);
  const double h0 = 2.0 * halfwidth[0] / (N - 1), h1 = 2.0 * halfwidth[1] / (N - 1);
  VectorXd g(2);
  double top = -INFINITY;
  for (Index a = 0; a < N; ++a)
    for (Index b = 0; b < N; ++b) {
      g << centre[0] - halfwidth[0] + a * h0, centre[1] - halfwidth[1] + b * h1;
      L(a, b) = logdens(g);
      top = std::max(top, L(a, b));
    }
  double Zs = 0.0;
  VectorXd m = VectorXd::Zero(2);
  MatrixXd s2 = MatrixXd::Zero(2, 2);
  for (Index a = 0; a < N; ++a)
    for (Index b = 0; b < N; ++b) {
      g << centre[0] - halfwidth[0] + a * h0, centre[1] - halfwidth[1] + b * h1;
      const double w = std::exp(L(a, b) - top);
      Zs += w;
      m += w * g;
      s2 += w * g * g.transpose();
    }
  Moments out;
  out.mean = m / Zs;
  out.cov = s2 / Zs - out.mean * out.mean.transpose();
  return out;
}

Moments stacked_gls_posterior(const glmm::Dataset& data, double sigma2, const MatrixXd& Sigma, double prior_var) {
  const Index N = data.n_rows();
  MatrixXd V = MatrixXd::Zero(N, N);
  for (Index i = 0; i < data.n_subjects(); ++i) {
    const Index o = data.offsets()[i], m = data.subject_size(i);
    const MatrixXd Zi = data.Z().middleRows(o, m);
    V.block(o, o, m, m) = Zi * Sigma * Zi.transpose() + sigma2 * MatrixXd::Identity(m, m);
  }
  const MatrixXd Vinv = V.ldlt().solve(MatrixXd::Identity(N, N));
  MatrixXd P = data.X().transpose() * Vinv * data.X();
  if (std::isfinite(prior_var)) P += MatrixXd::Identity(data.p(), data.p()) / prior_var;
  Moments out;
  out.cov = P.inverse();
  out.mean = out.cov * (data.X().transpose() * Vinv * data.y());
  return out;
}

double gaussian_negloglik(const VectorXd& y, const VectorXd& mu, const MatrixXd& V) {
  Eigen::LDLT<MatrixXd> ldlt(V);
  const VectorXd r = y - mu;
  return 0.5 * r.dot(ldlt.solve(r)) + 0.5 * ldlt.vectorD().array().log().sum() +
         0.5 * y.size() * std::log(2 * std::numbers::pi);
}

}  // namespace oracle
