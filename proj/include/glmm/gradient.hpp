#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "glmm/dataset.hpp"
#include "glmm/model.hpp"
#include "glmm/rng.hpp"
#include "glmm/samplers.hpp"

namespace glmm {

enum class Exec { Serial, Parallel };

enum class PsiEstimator {
  /// Batch means for MCMC-backed draws, the iid formula otherwise.
  Auto,
  Iid,
  BatchMeans,
};

/// Hash of Omega's bytes; gradients evaluated at different Omega never share it.
std::uint64_t fingerprint(const VectorXd& omega);

/// g_hat_i = -(1/R) sum_r grad log p(Y_i, gamma_ir | Omega) and its
/// covariance estimate Psi_hat_i.
struct SubjectGradient {
  Index subject = -1;
  Index R = 0;
  VectorXd g;
  MatrixXd psi;
  std::uint64_t fingerprint = 0;
};

struct MinibatchGradient {
  std::vector<Index> members;
  /// Mean of the members' g_hat_i.
  VectorXd h;
  /// grad f_0 + n h.
  VectorXd full_grad;
};

/// Psi_hat = (1/n) sum (g_i - h)(g_i - h)^T + (1/n^2) sum Psi_hat_i.
struct PopulationCovariance {
  MatrixXd psi;
  MatrixXd between;
  MatrixXd monte_carlo;
  VectorXd h;
};

/// `joint_grads` holds grad log p(Y_i, gamma_ir | Omega) column-wise (d x R).
SubjectGradient gradient_from_samples(Index subject, const MatrixXd& joint_grads, PsiEstimator estimator,
                                      std::uint64_t fp = 0);

SubjectGradient estimate_subject_gradient(const Model& model, const Dataset& data, Index i, const VectorXd& omega,
                                          const Decoded& par, Index R, const SamplerOptions& opts,
                                          LatentState& state, Engine& eng,
                                          PsiEstimator estimator = PsiEstimator::Auto);

/// Uniform with replacement from 0..n-1.
std::vector<Index> draw_minibatch(Index n, Index S, Engine& eng);

MinibatchGradient aggregate_minibatch(const VectorXd& prior_grad, std::span<const SubjectGradient> parts, Index n);

PopulationCovariance population_covariance(std::span<const SubjectGradient> parts);

/// Owns the per-subject latent states (warm starts) and runs the per-subject
/// estimation either serially or with OpenMP. Both paths draw from the same
/// counter-based streams and reduce in slot order, so they agree bitwise.
class GradientEstimator {
 public:
  GradientEstimator(const Model& model, const Dataset& data, Index R, SamplerOptions opts, std::uint64_t seed,
                    Exec exec = Exec::Parallel, PsiEstimator estimator = PsiEstimator::Auto);

  /// Draws the minibatch for iteration k from its own stream and estimates it.
  MinibatchGradient minibatch_gradient(const VectorXd& omega, Index S, std::uint64_t k,
                                       std::vector<SubjectGradient>* parts = nullptr);
  MinibatchGradient minibatch_gradient(const VectorXd& omega, const std::vector<Index>& members, std::uint64_t k,
                                       std::vector<SubjectGradient>* parts = nullptr);

  /// One gradient per subject at a common Omega (for Psi_hat at Omega*).
  std::vector<SubjectGradient> full_pass(const VectorXd& omega, Index R, std::uint64_t pass_id);

  std::vector<LatentState>& states() { return states_; }
  const std::vector<LatentState>& states() const { return states_; }
  Exec exec() const { return exec_; }
  void set_exec(Exec e) { exec_ = e; }

  /// Mean acceptance rate across subjects with MH proposals (0 if none).
  double mean_acceptance() const;
  Index acceptance_warnings() const;

 private:
  const Model& model_;
  const Dataset& data_;
  Index R_;
  SamplerOptions opts_;
  std::uint64_t seed_;
  Exec exec_;
  PsiEstimator estimator_;
  std::vector<LatentState> states_;
};

/// Exponentially weighted running Psi estimate over minibatch members, used
/// by the dynamic correction mode. Approximate: members are evaluated at
/// different Omega.
class RunningPsi {
 public:
  explicit RunningPsi(double decay = 0.99) : decay_(decay) {}

  void update(std::span<const SubjectGradient> parts);
  bool ready() const { return weight_ > 0.0; }
  MatrixXd estimate(Index n) const;

  double weight() const { return weight_; }
  const VectorXd& first_moment() const { return m1_; }
  const MatrixXd& second_moment() const { return m2_; }
  const MatrixXd& monte_carlo_moment() const { return mc_; }
  /// Restores a state captured through the accessors above (checkpoints).
  void restore(double weight, VectorXd m1, MatrixXd m2, MatrixXd mc);

 private:
  double decay_;
  double weight_ = 0.0;
  VectorXd m1_;
  MatrixXd m2_;
  MatrixXd mc_;
};

}  // namespace glmm
