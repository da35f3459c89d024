// Serial reference vs OpenMP for the per-subject kernels.

#include <benchmark/benchmark.h>

#include "glmm/gradient.hpp"
#include "glmm/reference.hpp"
#include "glmm/sim.hpp"

using namespace glmm;

namespace {

struct Problem {
  Design design;
  TrueParams truth;
  Model model;
  Dataset data;
  VectorXd omega;

  Problem(Design d, Index n)
      : design(d),
        truth(default_truth(d)),
        model(design_model(d, truth)),
        data(generate_data(d, n, 10, truth, 1)),
        omega(model.encode(truth.beta, truth.Sigma, truth.sigma2)) {}
};

const Problem& problem(Design d) {
  static const Problem gaussian(Design::GaussianUnknown, 2000);
  static const Problem bernoulli(Design::Bernoulli, 2000);
  return d == Design::Bernoulli ? bernoulli : gaussian;
}

void minibatch(benchmark::State& state, Design d, Exec exec) {
  const Problem& p = problem(d);
  GradientEstimator est(p.model, p.data, 100, SamplerOptions{}, 7, exec);
  const Index S = state.range(0);
  std::uint64_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(est.minibatch_gradient(p.omega, S, k++).full_grad);
  state.SetItemsProcessed(state.iterations() * S);
}

void full_pass(benchmark::State& state, Design d, Exec exec) {
  const Problem& p = problem(d);
  GradientEstimator est(p.model, p.data, 50, SamplerOptions{}, 7, exec);
  std::uint64_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(est.full_pass(p.omega, 50, k++));
  state.SetItemsProcessed(state.iterations() * p.data.n_subjects());
}

void gibbs(benchmark::State& state, Exec exec) {
  const Problem& p = problem(Design::Bernoulli);
  GibbsOptions go;
  go.iterations = 20;
  go.exec = exec;
  for (auto _ : state) benchmark::DoNotOptimize(full_gibbs_bernoulli(p.model, p.data, go).samples);
  state.SetItemsProcessed(state.iterations() * go.iterations);
}

}  // namespace

BENCHMARK_CAPTURE(minibatch, gaussian_serial, Design::GaussianUnknown, Exec::Serial)->Arg(5)->Arg(50);
BENCHMARK_CAPTURE(minibatch, gaussian_omp, Design::GaussianUnknown, Exec::Parallel)->Arg(5)->Arg(50);
BENCHMARK_CAPTURE(minibatch, bernoulli_serial, Design::Bernoulli, Exec::Serial)->Arg(5)->Arg(50);
BENCHMARK_CAPTURE(minibatch, bernoulli_omp, Design::Bernoulli, Exec::Parallel)->Arg(5)->Arg(50);
BENCHMARK_CAPTURE(full_pass, gaussian_serial, Design::GaussianUnknown, Exec::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(full_pass, gaussian_omp, Design::GaussianUnknown, Exec::Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(gibbs, serial, Exec::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(gibbs, omp, Exec::Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
