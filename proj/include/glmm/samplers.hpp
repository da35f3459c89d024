#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include <Eigen/Dense>

#include "glmm/dataset.hpp"
#include "glmm/model.hpp"
#include "glmm/rng.hpp"

namespace glmm {

enum class SamplerKind { Auto, ExactGaussian, PolyaGammaGibbs, RandomWalkMH, PriorMixture };

SamplerKind parse_sampler_kind(std::string_view name);
std::string_view to_string(SamplerKind k);

struct SamplerOptions {
  SamplerKind kind = SamplerKind::Auto;
  Index burn_in = 100;
  /// Reuse the subject's last latent state as the next initialization.
  bool warm_start = true;
  double mh_initial_scale = 0.5;
  double mh_target_accept = 0.35;
};

/// Per-subject sampler state. Not safe for concurrent use; distinct subjects
/// own distinct states.
struct LatentState {
  VectorXd gamma;
  double log_scale = std::log(0.5);
  std::int64_t adapt_steps = 0;
  std::int64_t accepted = 0;
  std::int64_t proposed = 0;

  double acceptance_rate() const { return proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
  /// True when enough proposals were made and the rate is outside [0.1, 0.6].
  bool acceptance_warning() const {
    return proposed >= 100 && (acceptance_rate() < 0.1 || acceptance_rate() > 0.6);
  }
};

/// Draws are returned column-wise: q x R.
struct LatentDraws {
  MatrixXd draws;
  /// True when the columns are iid from the exact conditional.
  bool independent = true;
};

/// The sampler that `Auto` resolves to for this model: exact Gaussian for the
/// Gaussian family, Polya-Gamma Gibbs for logit, random-walk MH otherwise;
/// wrapped in the prior mixture when the missingness model is active.
SamplerKind resolve_sampler(const Model& model, SamplerKind requested);

/// Exact conditional for the Gaussian family:
///   V = (Z^T Z / s2 + Sigma^{-1})^{-1},  m = V Z^T (Y - X beta) / s2.
void gaussian_conditional_moments(const SubjectView& s, const Decoded& par, VectorXd& mean, MatrixXd& cov);
MatrixXd sample_exact_gaussian(const Model& model, const SubjectView& s, const Decoded& par, Index R, Engine& eng);

/// Polya-Gamma Gibbs: omega_t | gamma ~ PG(1, eta_t), gamma | omega Gaussian.
MatrixXd pg_gibbs_run(const Model& model, const SubjectView& s, const Decoded& par, Index R, Index burn_in,
                      LatentState& state, Engine& eng);

/// Gaussian random-walk Metropolis-Hastings on log p(Y_i, gamma | Omega). The
/// proposal scale adapts (Robbins-Monro toward `target_accept`) during burn-in
/// only.
MatrixXd rw_mh_run(const Model& model, const SubjectView& s, const Decoded& par, Index R, Index burn_in,
                   LatentState& state, Engine& eng, double target_accept = 0.35);

/// iid draws from N(0, Sigma).
MatrixXd sample_prior(const Decoded& par, Index R, Engine& eng);

/// w_i = 1: prior draws; w_i = 0: the family's conditional sampler.
LatentDraws sample_mixture_conditional(const Model& model, const SubjectView& s, const Decoded& par, int w, Index R,
                                       const SamplerOptions& opts, LatentState& state, Engine& eng);

/// Dispatches to the configured sampler for subject i.
LatentDraws draw_latents(const Model& model, const Dataset& data, Index i, const Decoded& par, Index R,
                         const SamplerOptions& opts, LatentState& state, Engine& eng);

}  // namespace glmm
