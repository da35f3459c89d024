#include "glmm/polya_gamma.hpp"

#include <cmath>
#include <numbers>

namespace glmm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTrunc = 0.64;  // switch point between the two series representations

// n-th coefficient of the alternating series for the J*(1, z) density.
double series_coef(int n, double x) {
  const double k = (n + 0.5) * kPi;
  if (x > kTrunc) return k * std::exp(-0.5 * k * k * x);
  const double h = n + 0.5;
  return k * std::pow(2.0 / (kPi * x), 1.5) * std::exp(-2.0 * h * h / x);
}

double log_norm_cdf(double a) {
  if (a > -30.0) return std::log(0.5 * std::erfc(-a / std::numbers::sqrt2));
  // Mills-ratio asymptote.
  return -0.5 * a * a - std::log(-a) - 0.5 * std::log(2.0 * kPi);
}

// P(IG(mu = 1/z, lambda = 1) < t).
double inverse_gaussian_cdf(double t, double z) {
  const double rt = 1.0 / std::sqrt(t);
  const double b = rt * (t * z - 1.0);
  const double a = -rt * (t * z + 1.0);
  return 0.5 * std::erfc(-b / std::numbers::sqrt2) + std::exp(2.0 * z + log_norm_cdf(a));
}

// Inverse Gaussian(mu = 1/z, 1) truncated to (0, kTrunc).
double truncated_inverse_gaussian(double z, Engine& eng) {
  std::exponential_distribution<double> expo(1.0);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double t = kTrunc;
  if (z < 1.0 / t) {
    // mu > t: proposal from the z = 0 (Levy) law, accept with exp(-z^2 x / 2).
    double x;
    for (;;) {
      double e1, e2;
      do {
        e1 = expo(eng);
        e2 = expo(eng);
      } while (e1 * e1 > 2.0 * e2 / t);
      x = t / ((1.0 + t * e1) * (1.0 + t * e1));
      const double accept = std::exp(-0.5 * z * z * x);
      if (unif(eng) <= accept) break;
    }
    return x;
  }
  const double mu = 1.0 / z;
  double x = t + 1.0;
  while (x >= t) {
    const double n = norm(eng);
    const double y = n * n;
    x = mu + 0.5 * mu * mu * y - 0.5 * mu * std::sqrt(4.0 * mu * y + (mu * y) * (mu * y));
    if (unif(eng) > mu / (mu + x)) x = mu * mu / x;
  }
  return x;
}

}  // namespace

double polya_gamma_mean(double c) {
  if (std::abs(c) < 1e-6) return 0.25 - c * c / 48.0;
  return std::tanh(0.5 * c) / (2.0 * c);
}

double draw_polya_gamma(double c, Engine& eng) {
  const double z = 0.5 * std::abs(c);
  const double K = kPi * kPi / 8.0 + 0.5 * z * z;
  const double p = kPi / (2.0 * K) * std::exp(-K * kTrunc);
  const double q = 2.0 * std::exp(-z) * inverse_gaussian_cdf(kTrunc, z);
  const double prob_right = p / (p + q);

  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (;;) {
    double x;
    if (unif(eng) < prob_right) {
      x = kTrunc + expo(eng) / K;
    } else {
      x = truncated_inverse_gaussian(z, eng);
    }
    double s = series_coef(0, x);
    const double y = unif(eng) * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_coef(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += series_coef(n, x);
        if (y > s) break;
      }
    }
  }
}

}  // namespace glmm
