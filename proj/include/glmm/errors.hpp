#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace glmm {

/// Invalid configuration, inconsistent inputs, or malformed files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was requested that the chosen family or sampler cannot perform.
class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Overflow, non-finite intermediates, failed factorizations.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, std::int64_t subject = -1)
      : std::runtime_error(subject >= 0 ? what + " (subject " + std::to_string(subject) + ")" : what),
        subject_(subject) {}

  std::int64_t subject() const noexcept { return subject_; }

 private:
  std::int64_t subject_;
};

class IllConditionedError : public NumericError {
 public:
  IllConditionedError(const std::string& what, double eigenvalue)
      : NumericError(what + " (eigenvalue " + std::to_string(eigenvalue) + ")"), eigenvalue_(eigenvalue) {}

  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

/// Raised by the outer loop when an update is non-finite or exceeds the clamp.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, Eigen::VectorXd last_good, std::int64_t iteration)
      : std::runtime_error(what + " at iteration " + std::to_string(iteration)),
        last_good_(std::move(last_good)),
        iteration_(iteration) {}

  const Eigen::VectorXd& last_good() const noexcept { return last_good_; }
  std::int64_t iteration() const noexcept { return iteration_; }

 private:
  Eigen::VectorXd last_good_;
  std::int64_t iteration_;
};

}  // namespace glmm
