#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "glmm/correction.hpp"
#include "glmm/errors.hpp"
#include "glmm/reference.hpp"
#include "glmm/sgld.hpp"
#include "glmm/sim.hpp"
#include "oracles.hpp"

using namespace glmm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "glmm_unit";
  fs::create_directories(dir);
  return dir / name;
}

struct LmmSetup {
  TrueParams truth = default_truth(Design::LmmFixed);
  Model model{design_model(Design::LmmFixed, truth)};
  Dataset data = generate_data(Design::LmmFixed, 100, 10, truth, 8);
};

}  // namespace

TEST(StepSize, Examples) {
  EXPECT_NEAR(step_size(1000, 5, 0.5), 1.5811e-4, 1e-8);
  EXPECT_NEAR(step_size(10, 1, 1.0), 1e-2, 1e-15);
  EXPECT_NEAR(step_size(10000, 10, 0.7), 1.5849e-6, 1e-10);
  EXPECT_THROW(step_size(10, 1, 0.0), ConfigError);
  EXPECT_THROW(step_size(10, 1, 1.5), ConfigError);
}

TEST(SelectDelta, Examples) {
  for (Index n : {2, 10, 1000}) EXPECT_DOUBLE_EQ(select_delta(n, 1), 0.55);
  EXPECT_DOUBLE_EQ(select_delta(10000, 10), 0.65);
  EXPECT_THROW(select_delta(50, 50), ConfigError);
}

TEST(SgldUpdate, ZeroGradientWithoutNoiseIsFixedPoint) {
  Engine eng = make_stream(1, StreamTag::Noise);
  VectorXd w = VectorXd::LinSpaced(4, -1, 2);
  EXPECT_EQ(sgld_update(w, VectorXd::Zero(4), 0.1, 0.0, eng), w);
}

TEST(SgldUpdate, NoiseMoments) {
  const double eps = 0.01;
  const int reps = 10000;
  MatrixXd inc(2, reps);
  for (int r = 0; r < reps; ++r) {
    Engine eng = make_stream(2, StreamTag::Noise, static_cast<std::uint64_t>(r));
    inc.col(r) = sgld_update(VectorXd::Zero(2), VectorXd::Zero(2), eps, 1.0, eng);
  }
  const MatrixXd cov = sample_covariance(inc);
  const double var = 2 * eps;
  for (Index j = 0; j < 2; ++j) {
    EXPECT_LT(std::abs(inc.row(j).mean()), 3 * std::sqrt(var / reps));
    EXPECT_LT(std::abs(cov(j, j) - var), 3 * var * std::sqrt(2.0 / reps));
  }
  EXPECT_LT(std::abs(cov(0, 1)), 3 * var / std::sqrt(reps));
}

TEST(RunSgld, ZeroIterationsKeepsStart) {
  SgldConfig cfg;
  cfg.K = 0;
  FunctionSource src([](const VectorXd& w) { return w; });
  const VectorXd w0 = VectorXd::Constant(3, 0.5);
  Chain c = run_sgld(cfg, src, 10, w0, {"a", "b", "c"}, {"x", "x", "x"});
  ASSERT_EQ(c.size(), 1);
  EXPECT_EQ(VectorXd(c.samples.col(0)), w0);
}

TEST(RunSgld, OuStationaryCovariance) {
  const MatrixXd A = oracle::random_spd(3, 5, 0.5, 2.0);
  SgldConfig cfg;
  cfg.S = 1;
  cfg.delta = 1.0;
  cfg.K = 2000000;
  cfg.thin = 20;
  cfg.seed = 3;
  FunctionSource src([&](const VectorXd& w) { return VectorXd(A * w); });
  // n = 10: eps = 1/100
  Chain c = run_sgld(cfg, src, 10, VectorXd::Zero(3), {"a", "b", "c"}, {"x", "x", "x"});
  const MatrixXd emp = sample_covariance(c.samples);
  const double rel = (emp * A + A * emp - 2 * MatrixXd::Identity(3, 3)).norm() / (2 * std::sqrt(3.0));
  EXPECT_LT(rel, 0.05);
}

TEST(RunSgld, DivergenceCarriesLastGoodState) {
  SgldConfig cfg;
  cfg.K = 100;
  cfg.checkpoint_path = scratch("diverge.ckpt").string();
  FunctionSource src([](const VectorXd& w) { return VectorXd(-1e12 * (w.array() + 1.0)); });
  try {
    run_sgld(cfg, src, 10, VectorXd::Zero(2), {"a", "b"}, {"x", "x"});
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.iteration(), 0);
    EXPECT_EQ(e.last_good(), VectorXd::Zero(2));
  }
}

TEST(RunSgld, NumericFailureInGradientIsDivergence) {
  SgldConfig cfg;
  cfg.K = 100;
  FunctionSource src([](const VectorXd& w) -> VectorXd {
    if (w.norm() > 0.5) throw NumericError("bad state", 3);
    return VectorXd::Constant(2, -50.0);
  });
  try {
    run_sgld(cfg, src, 10, VectorXd::Zero(2), {"a", "b"}, {"x", "x"});
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.iteration(), 0);
    EXPECT_GT(e.last_good().norm(), 0.5);
  }
}

TEST(RunChain, SameSeedIsBitwiseIdentical) {
  LmmSetup s;
  SgldConfig cfg;
  cfg.K = 500;
  cfg.R = 20;
  cfg.seed = 42;
  const Chain a = run_chain(cfg, s.model, s.data);
  const Chain b = run_chain(cfg, s.model, s.data);
  EXPECT_EQ(a.samples, b.samples);
  cfg.seed = 43;
  EXPECT_NE(run_chain(cfg, s.model, s.data).samples, a.samples);
}

TEST(RunChain, SerialAndParallelAreBitwiseIdentical) {
  const TrueParams t = default_truth(Design::Bernoulli);
  Model m(design_model(Design::Bernoulli, t));
  Dataset data = generate_data(Design::Bernoulli, 60, 6, t, 2);
  SgldConfig cfg;
  cfg.K = 200;
  cfg.R = 20;
  cfg.exec = Exec::Serial;
  const Chain a = run_chain(cfg, m, data);
  cfg.exec = Exec::Parallel;
  const Chain b = run_chain(cfg, m, data);
  EXPECT_EQ(a.samples, b.samples);
}

TEST(RunChain, ResumeFromCheckpointIsBitwiseIdentical) {
  const TrueParams t = default_truth(Design::Bernoulli);
  Model m(design_model(Design::Bernoulli, t));
  Dataset data = generate_data(Design::Bernoulli, 100, 5, t, 6);
  SgldConfig cfg;
  cfg.K = 400;
  cfg.R = 20;
  cfg.seed = 9;
  const Chain full = run_chain(cfg, m, data);

  cfg.checkpoint_every = 150;
  cfg.checkpoint_path = scratch("resume.ckpt").string();
  run_chain(cfg, m, data);
  // the last checkpoint holds iteration 300; finish from there
  const Chain resumed = resume_chain(cfg.checkpoint_path, m, data);
  EXPECT_EQ(resumed.completed, 400);
  EXPECT_EQ(resumed.samples, full.samples);
  EXPECT_EQ(resumed.omega_final, full.omega_final);
}

TEST(RunChain, LmmChainMeanNearClosedForm) {
  LmmSetup s;
  SgldConfig cfg;
  cfg.delta = 0.5;
  cfg.T = 20;
  cfg.seed = 5;
  const Chain c = run_chain(cfg, s.model, s.data);
  const LmmPosterior post = lmm_posterior(s.data, s.truth.sigma2, s.truth.Sigma, s.model.spec().prior);
  const VectorXd mean = sample_mean(c.tail(0.75));
  for (Index j = 0; j < 2; ++j) EXPECT_LT(std::abs(mean[j] - post.mean[j]), 3 * std::sqrt(post.cov(j, j)));
}

TEST(RunChain, DynamicCorrectionProducesSnapshots) {
  LmmSetup s;
  SgldConfig cfg;
  cfg.K = 3000;
  cfg.R = 20;
  cfg.correction_interval = 1000;
  const Chain c = run_chain(cfg, s.model, s.data);
  ASSERT_FALSE(c.dynamic.empty());
  EXPECT_EQ(c.dynamic.back().iteration, 3000);
  EXPECT_EQ(c.dynamic.back().G.rows(), s.model.dim());
}

TEST(ChainCsv, RoundTrip) {
  LmmSetup s;
  SgldConfig cfg;
  cfg.K = 50;
  cfg.R = 10;
  const Chain c = run_chain(cfg, s.model, s.data);
  const std::string path = scratch("chain.csv").string();
  write_chain_csv(c, path);
  std::vector<std::string> names;
  std::vector<Index> iters;
  const MatrixXd back = read_chain_csv(path, &names, &iters);
  EXPECT_EQ(names, c.names);
  EXPECT_EQ(iters, c.iterations);
  EXPECT_EQ(back, c.samples);
  EXPECT_TRUE(fs::exists(path + ".json"));
}

TEST(ChainCsv, RejectsMissingFile) { EXPECT_THROW(read_chain_csv(scratch("nope.csv").string()), ConfigError); }

TEST(SgldConfig, JsonRoundTrip) {
  SgldConfig c;
  c.S = 7;
  c.delta = 0.3;
  c.K = 123;
  c.seed = 99;
  c.sampler.kind = SamplerKind::RandomWalkMH;
  c.omega0 = VectorXd::LinSpaced(3, 0, 1);
  const SgldConfig b = config_from_json(config_to_json(c));
  EXPECT_EQ(b.S, 7);
  EXPECT_EQ(b.delta, 0.3);
  EXPECT_EQ(b.K, std::optional<Index>(123));
  EXPECT_EQ(b.seed, 99u);
  EXPECT_EQ(b.sampler.kind, SamplerKind::RandomWalkMH);
  EXPECT_EQ(b.omega0, c.omega0);
}
