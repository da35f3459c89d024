#include "glmm/family.hpp"

#include <cmath>
#include <numbers>

#include "glmm/errors.hpp"

namespace glmm {

Family parse_family(std::string_view name) {
  if (name == "gaussian") return Family::Gaussian;
  if (name == "bernoulli" || name == "bernoulli-logit" || name == "logit") return Family::BernoulliLogit;
  if (name == "poisson") return Family::Poisson;
  throw ConfigError("unknown family '" + std::string(name) + "'");
}

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::BernoulliLogit: return "bernoulli";
    case Family::Poisson: return "poisson";
  }
  return "?";
}

double softplus(double x) noexcept { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double logistic(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double ExponentialFamily::a(double phi) const noexcept { return tag_ == Family::Gaussian ? phi : 1.0; }

double ExponentialFamily::a_prime(double) const noexcept { return tag_ == Family::Gaussian ? 1.0 : 0.0; }

double ExponentialFamily::b(double theta) const noexcept {
  switch (tag_) {
    case Family::Gaussian: return 0.5 * theta * theta;
    case Family::BernoulliLogit: return softplus(theta);
    case Family::Poisson: return std::exp(theta);
  }
  return 0.0;
}

double ExponentialFamily::b_prime(double theta) const noexcept {
  switch (tag_) {
    case Family::Gaussian: return theta;
    case Family::BernoulliLogit: return std::exp(theta - softplus(theta));
    case Family::Poisson: return std::exp(theta);
  }
  return 0.0;
}

double ExponentialFamily::c(double y, double phi) const noexcept {
  switch (tag_) {
    case Family::Gaussian: return -0.5 * y * y / phi - 0.5 * std::log(2.0 * std::numbers::pi * phi);
    case Family::BernoulliLogit: return 0.0;
    case Family::Poisson: return -std::lgamma(y + 1.0);
  }
  return 0.0;
}

double ExponentialFamily::c_prime(double y, double phi) const noexcept {
  if (tag_ != Family::Gaussian) return 0.0;
  return 0.5 * y * y / (phi * phi) - 0.5 / phi;
}

double ExponentialFamily::mean(double theta) const noexcept {
  switch (tag_) {
    case Family::Gaussian: return theta;
    case Family::BernoulliLogit: return logistic(theta);
    case Family::Poisson: return std::exp(theta);
  }
  return 0.0;
}

}  // namespace glmm
