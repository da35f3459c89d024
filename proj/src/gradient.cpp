#include "glmm/gradient.hpp"

#include <cmath>
#include <cstring>

#include "glmm/errors.hpp"

namespace glmm {

std::uint64_t fingerprint(const VectorXd& omega) {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(omega.size()));
  for (Index j = 0; j < omega.size(); ++j) {
    std::uint64_t bits;
    const double v = omega(j);
    std::memcpy(&bits, &v, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  return h;
}

SubjectGradient gradient_from_samples(Index subject, const MatrixXd& joint_grads, PsiEstimator estimator,
                                      std::uint64_t fp) {
  const Index d = joint_grads.rows();
  const Index R = joint_grads.cols();
  if (R < 2) throw ConfigError("subject gradient needs R >= 2 draws");
  SubjectGradient out;
  out.subject = subject;
  out.R = R;
  out.fingerprint = fp;
  const VectorXd mean = joint_grads.rowwise().mean();
  out.g = -mean;

  const Index batches = static_cast<Index>(std::floor(std::sqrt(static_cast<double>(R))));
  if (estimator == PsiEstimator::BatchMeans && batches >= 2) {
    const Index len = R / batches;
    MatrixXd bm(d, batches);
    for (Index b = 0; b < batches; ++b) bm.col(b) = joint_grads.middleCols(R - (batches - b) * len, len).rowwise().mean();
    const VectorXd centre = bm.rowwise().mean();
    const MatrixXd dev = bm.colwise() - centre;
    out.psi = dev * dev.transpose() / static_cast<double>(batches * (batches - 1));
  } else {
    const MatrixXd dev = joint_grads.colwise() - mean;
    out.psi = dev * dev.transpose() / static_cast<double>(R * (R - 1));
  }
  out.psi = 0.5 * (out.psi + out.psi.transpose()).eval();
  return out;
}

SubjectGradient estimate_subject_gradient(const Model& model, const Dataset& data, Index i, const VectorXd& omega,
                                          const Decoded& par, Index R, const SamplerOptions& opts,
                                          LatentState& state, Engine& eng, PsiEstimator estimator) {
  if (R < 2) throw ConfigError("estimate_subject_gradient requires R >= 2");
  const LatentDraws latent = draw_latents(model, data, i, par, R, opts, state, eng);
  MatrixXd grads(model.dim(), R);
  VectorXd gamma(latent.draws.rows());
  for (Index r = 0; r < R; ++r) {
    gamma = latent.draws.col(r);
    model.joint_grad(data, i, par, gamma, grads.col(r));
  }
  if (estimator == PsiEstimator::Auto) estimator = latent.independent ? PsiEstimator::Iid : PsiEstimator::BatchMeans;
  return gradient_from_samples(i, grads, estimator, fingerprint(omega));
}

std::vector<Index> draw_minibatch(Index n, Index S, Engine& eng) {
  if (n < 1 || S < 1) throw ConfigError("minibatch requires n >= 1 and S >= 1");
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<Index> members(static_cast<size_t>(S));
  for (auto& m : members) m = pick(eng);
  return members;
}

MinibatchGradient aggregate_minibatch(const VectorXd& prior_grad, std::span<const SubjectGradient> parts, Index n) {
  if (parts.empty()) throw ConfigError("empty minibatch");
  MinibatchGradient mb;
  mb.h = VectorXd::Zero(prior_grad.size());
  for (const auto& p : parts) {
    mb.members.push_back(p.subject);
    mb.h += p.g;
  }
  mb.h /= static_cast<double>(parts.size());
  mb.full_grad = prior_grad + static_cast<double>(n) * mb.h;
  return mb;
}

PopulationCovariance population_covariance(std::span<const SubjectGradient> parts) {
  if (parts.empty()) throw ConfigError("population covariance needs at least one subject gradient");
  const auto fp = parts.front().fingerprint;
  for (const auto& p : parts)
    if (p.fingerprint != fp) throw ConfigError("subject gradients were evaluated at different Omega");
  const Index d = parts.front().g.size();
  const double n = static_cast<double>(parts.size());
  PopulationCovariance pc;
  pc.h = VectorXd::Zero(d);
  for (const auto& p : parts) pc.h += p.g;
  pc.h /= n;
  pc.between = MatrixXd::Zero(d, d);
  pc.monte_carlo = MatrixXd::Zero(d, d);
  for (const auto& p : parts) {
    const VectorXd dev = p.g - pc.h;
    pc.between.noalias() += dev * dev.transpose();
    pc.monte_carlo += p.psi;
  }
  pc.between /= n;
  pc.monte_carlo /= n * n;
  pc.psi = pc.between + pc.monte_carlo;
  return pc;
}

GradientEstimator::GradientEstimator(const Model& model, const Dataset& data, Index R, SamplerOptions opts,
                                     std::uint64_t seed, Exec exec, PsiEstimator estimator)
    : model_(model),
      data_(data),
      R_(R),
      opts_(opts),
      seed_(seed),
      exec_(exec),
      estimator_(estimator),
      states_(static_cast<size_t>(data.n_subjects())) {
  model_.check(data_);
  if (R_ < 2) throw ConfigError("inner draw count R must be >= 2");
}

MinibatchGradient GradientEstimator::minibatch_gradient(const VectorXd& omega, Index S, std::uint64_t k,
                                                        std::vector<SubjectGradient>* parts) {
  Engine eng = make_stream(seed_, StreamTag::Minibatch, k);
  return minibatch_gradient(omega, draw_minibatch(data_.n_subjects(), S, eng), k, parts);
}

MinibatchGradient GradientEstimator::minibatch_gradient(const VectorXd& omega, const std::vector<Index>& members,
                                                        std::uint64_t k, std::vector<SubjectGradient>* parts) {
  const Decoded par = model_.decode(omega);
  const Index S = static_cast<Index>(members.size());
  const auto n = static_cast<std::uint64_t>(data_.n_subjects());
  std::vector<SubjectGradient> out(members.size());
  // Duplicate members start from the same snapshot; write-back happens in
  // slot order after the parallel region.
  std::vector<LatentState> local(members.size());
  for (Index s = 0; s < S; ++s) local[static_cast<size_t>(s)] = states_[static_cast<size_t>(members[static_cast<size_t>(s)])];

  auto work = [&](Index s) {
    const auto us = static_cast<size_t>(s);
    const Index i = members[us];
    Engine eng = make_stream(seed_, StreamTag::Latent, k, static_cast<std::uint64_t>(s) * n + static_cast<std::uint64_t>(i));
    out[us] = estimate_subject_gradient(model_, data_, i, omega, par, R_, opts_, local[us], eng, estimator_);
  };

  if (exec_ == Exec::Parallel) {
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (Index s = 0; s < S; ++s) {
      try {
        work(s);
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
  } else {
    for (Index s = 0; s < S; ++s) work(s);
  }

  for (Index s = 0; s < S; ++s) states_[static_cast<size_t>(members[static_cast<size_t>(s)])] = local[static_cast<size_t>(s)];
  auto mb = aggregate_minibatch(model_.prior_grad(omega), out, data_.n_subjects());
  if (parts) *parts = std::move(out);
  return mb;
}

std::vector<SubjectGradient> GradientEstimator::full_pass(const VectorXd& omega, Index R, std::uint64_t pass_id) {
  const Decoded par = model_.decode(omega);
  const Index n = data_.n_subjects();
  std::vector<SubjectGradient> out(static_cast<size_t>(n));
  auto work = [&](Index i) {
    const auto ui = static_cast<size_t>(i);
    Engine eng = make_stream(seed_, StreamTag::PsiPass, pass_id, static_cast<std::uint64_t>(i));
    out[ui] = estimate_subject_gradient(model_, data_, i, omega, par, R, opts_, states_[ui], eng, estimator_);
  };
  if (exec_ == Exec::Parallel) {
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (Index i = 0; i < n; ++i) {
      try {
        work(i);
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
  } else {
    for (Index i = 0; i < n; ++i) work(i);
  }
  return out;
}

double GradientEstimator::mean_acceptance() const {
  double sum = 0.0;
  Index count = 0;
  for (const auto& s : states_) {
    if (s.proposed > 0) {
      sum += s.acceptance_rate();
      ++count;
    }
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

Index GradientEstimator::acceptance_warnings() const {
  Index c = 0;
  for (const auto& s : states_) c += s.acceptance_warning() ? 1 : 0;
  return c;
}

void RunningPsi::update(std::span<const SubjectGradient> parts) {
  for (const auto& p : parts) {
    if (m1_.size() == 0) {
      m1_ = VectorXd::Zero(p.g.size());
      m2_ = MatrixXd::Zero(p.g.size(), p.g.size());
      mc_ = MatrixXd::Zero(p.g.size(), p.g.size());
    }
    const double keep = decay_;
    const double add = 1.0 - decay_;
    m1_ = keep * m1_ + add * p.g;
    m2_ = keep * m2_ + add * p.g * p.g.transpose();
    mc_ = keep * mc_ + add * p.psi;
    weight_ = keep * weight_ + add;
  }
}

void RunningPsi::restore(double weight, VectorXd m1, MatrixXd m2, MatrixXd mc) {
  weight_ = weight;
  m1_ = std::move(m1);
  m2_ = std::move(m2);
  mc_ = std::move(mc);
}

MatrixXd RunningPsi::estimate(Index n) const {
  if (!ready()) throw ConfigError("running Psi estimate has no data yet");
  const VectorXd m = m1_ / weight_;
  MatrixXd cov = m2_ / weight_ - m * m.transpose();
  cov += mc_ / weight_ / static_cast<double>(n);
  return 0.5 * (cov + cov.transpose());
}

}  // namespace glmm
