#pragma once

#include <string>
#include <string_view>

namespace glmm {

enum class Family { Gaussian, BernoulliLogit, Poisson };

Family parse_family(std::string_view name);
std::string_view to_string(Family f);

/// Canonical-link exponential family
///   log p(y | theta, phi) = (y theta - b(theta)) / a(phi) + c(y, phi).
///
/// For the Gaussian family phi is the variance sigma^2; the other two
/// families carry no dispersion and a(phi) == 1.
class ExponentialFamily {
 public:
  constexpr explicit ExponentialFamily(Family tag = Family::Gaussian) : tag_(tag) {}

  constexpr Family tag() const noexcept { return tag_; }
  constexpr bool has_dispersion() const noexcept { return tag_ == Family::Gaussian; }

  double a(double phi) const noexcept;
  double a_prime(double phi) const noexcept;
  double b(double theta) const noexcept;
  /// b'(theta); equals the inverse canonical link.
  double b_prime(double theta) const noexcept;
  double c(double y, double phi) const noexcept;
  /// d c(y, phi) / d phi
  double c_prime(double y, double phi) const noexcept;

  /// Inverse canonical link d^{-1}(theta), evaluated independently of b_prime.
  double mean(double theta) const noexcept;

  double loglik(double y, double theta, double phi) const noexcept {
    return (y * theta - b(theta)) / a(phi) + c(y, phi);
  }

 private:
  Family tag_;
};

/// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;
/// 1 / (1 + exp(-x)) without overflow.
double logistic(double x) noexcept;

}  // namespace glmm
