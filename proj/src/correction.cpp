#include "glmm/correction.hpp"

#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>

#include "glmm/errors.hpp"

namespace glmm {

namespace {

void require_square(const MatrixXd& m, Index d, const char* what) {
  if (m.rows() != d || m.cols() != d) throw ConfigError(std::string(what) + " has the wrong shape");
}

nlohmann::json to_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

MatrixXd compute_gamma(const MatrixXd& psi, double eps, Index n, Index S, double kappa) {
  if (psi.rows() != psi.cols()) throw ConfigError("Psi must be square");
  const double nn = static_cast<double>(n);
  MatrixXd g = eps * nn * nn / (2.0 * static_cast<double>(S)) * psi;
  g.diagonal().array() += kappa;
  return g;
}

MatrixXd solve_lyapunov(const MatrixXd& sigma, const MatrixXd& gamma) {
  const Index d = sigma.rows();
  require_square(sigma, d, "Sigma");
  require_square(gamma, d, "Gamma");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (sigma + sigma.transpose()));
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition of Sigma failed");
  const VectorXd& lam = es.eigenvalues();
  const double threshold = 1e-12 * sigma.trace() / static_cast<double>(d);
  if (!(lam(0) > threshold)) throw IllConditionedError("Sigma is not safely positive definite", lam(0));
  const MatrixXd& Q = es.eigenvectors();
  MatrixXd M = Q.transpose() * gamma * Q;
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) M(i, j) *= 2.0 / (lam(i) + lam(j));
  MatrixXd A = Q * M * Q.transpose();
  return 0.5 * (A + A.transpose());
}

double lyapunov_residual(const MatrixXd& sigma, const MatrixXd& A, const MatrixXd& gamma) {
  return (sigma * A + A * sigma - 2.0 * gamma).norm() / (2.0 * gamma).norm();
}

MatrixXd predicted_inflation(const MatrixXd& A, const MatrixXd& gamma) { return solve_lyapunov(A, gamma); }

VectorXd sample_mean(const MatrixXd& samples) {
  if (samples.cols() < 1) throw ConfigError("no samples");
  return samples.rowwise().mean();
}

MatrixXd sample_covariance(const MatrixXd& samples) {
  if (samples.cols() < 2) throw ConfigError("covariance needs at least two samples");
  const MatrixXd dev = samples.colwise() - sample_mean(samples);
  return dev * dev.transpose() / static_cast<double>(samples.cols() - 1);
}

CorrectionInputs correction_inputs(const MatrixXd& samples, const MatrixXd& psi, double eps, Index n, Index S,
                                   double kappa) {
  CorrectionInputs in;
  in.omega_star = sample_mean(samples);
  in.sigma = sample_covariance(samples);
  in.psi = psi;
  in.eps = eps;
  in.n = n;
  in.S = S;
  in.kappa = kappa;
  return in;
}

CorrectionResult compute_correction(const CorrectionInputs& in) {
  const Index d = in.sigma.rows();
  require_square(in.sigma, d, "Sigma");
  require_square(in.psi, d, "Psi");
  if (in.omega_star.size() != d) throw ConfigError("Omega* has the wrong length");

  CorrectionResult c;
  c.omega_star = in.omega_star;
  c.gamma = compute_gamma(0.5 * (in.psi + in.psi.transpose()), in.eps, in.n, in.S, in.kappa);
  const MatrixXd sigma = 0.5 * (in.sigma + in.sigma.transpose());
  c.A = solve_lyapunov(sigma, c.gamma);
  c.residual = lyapunov_residual(sigma, c.A, c.gamma);

  Eigen::SelfAdjointEigenSolver<MatrixXd> ea(c.A);
  const double tr = c.A.trace();
  VectorXd lam = ea.eigenvalues();
  if (lam(0) < -1e-10 * std::abs(tr)) throw NumericError("solved A is not positive definite (eigenvalue " + std::to_string(lam(0)) + ")");
  const double floor = 1e-12 * std::abs(tr);
  for (Index j = 0; j < d; ++j) {
    if (lam(j) < floor) {
      lam(j) = floor;
      ++c.floored;
    }
  }
  if (c.floored > 0) c.A = ea.eigenvectors() * lam.asDiagonal() * ea.eigenvectors().transpose();
  c.A_eigenvalues = lam;
  c.sigma_eigenvalues = Eigen::SelfAdjointEigenSolver<MatrixXd>(sigma, Eigen::EigenvaluesOnly).eigenvalues();

  Eigen::LLT<MatrixXd> ls(sigma);
  Eigen::LLT<MatrixXd> la(c.A);
  if (ls.info() != Eigen::Success) throw NumericError("Cholesky of Sigma failed");
  if (la.info() != Eigen::Success) throw NumericError("Cholesky of A failed");
  c.E = ls.matrixU();
  c.F = la.matrixU();
  // G = (E^T F)^{-1} = F^{-1} E^{-T}; both factors triangular.
  const MatrixXd Et_inv = c.E.transpose().triangularView<Eigen::Lower>().solve(MatrixXd::Identity(d, d));
  c.G = c.F.triangularView<Eigen::Upper>().solve(Et_inv);
  c.A_inv = la.solve(MatrixXd::Identity(d, d));
  c.A_inv = 0.5 * (c.A_inv + c.A_inv.transpose());
  return c;
}

MatrixXd apply_correction(const CorrectionResult& c, const MatrixXd& samples) {
  const Index m = samples.cols();
  MatrixXd out(samples.rows(), m);
#pragma omp parallel for schedule(static)
  for (Index k = 0; k < m; ++k) out.col(k) = c.G * (samples.col(k) - c.omega_star) + c.omega_star;
  return out;
}

void write_correction_report(const CorrectionResult& c, std::ostream& out) {
  nlohmann::json j;
  j["omega_star"] = to_json(c.omega_star);
  j["gamma"] = to_json(c.gamma);
  j["A"] = to_json(c.A);
  j["A_inv"] = to_json(c.A_inv);
  j["G"] = to_json(c.G);
  j["lyapunov_residual"] = c.residual;
  j["sigma_eigenvalues"] = to_json(c.sigma_eigenvalues);
  j["A_eigenvalues"] = to_json(c.A_eigenvalues);
  j["floored_eigenvalues"] = c.floored;
  out << j.dump(2) << '\n';
}

}  // namespace glmm
