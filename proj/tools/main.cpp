#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "config_file.hpp"
#include "glmm/correction.hpp"
#include "glmm/dataset.hpp"
#include "glmm/errors.hpp"
#include "glmm/model.hpp"
#include "glmm/reference.hpp"
#include "glmm/sgld.hpp"
#include "glmm/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace glmm;

namespace {

struct ModelOptions {
  std::string family = "gaussian";
  bool estimate_sigma = true;
  std::vector<double> fixed_sigma;
  bool estimate_dispersion = true;
  double fixed_dispersion = 1.0;
  bool missingness = false;
  std::vector<Index> alpha_columns;
  PriorSpec prior;
  std::string sigma_transform = "log-sd-fisher";
  std::string dispersion_transform = "log-sd";

  void add(CLI::App* app) {
    app->add_option("--family", family, "gaussian | bernoulli | poisson");
    app->add_option("--estimate-sigma", estimate_sigma, "sample the random-effects covariance");
    app->add_option("--fixed-sigma", fixed_sigma, "row-major q x q Sigma when not estimated")->delimiter(',');
    app->add_option("--estimate-dispersion", estimate_dispersion, "Gaussian: sample the residual sd");
    app->add_option("--fixed-dispersion", fixed_dispersion, "Gaussian residual variance when fixed");
    app->add_option("--missingness", missingness, "all-zero indicator model (needs the w column)");
    app->add_option("--alpha-columns", alpha_columns, "X columns entering the indicator model")->delimiter(',');
    app->add_option("--beta-mean", prior.beta_mean);
    app->add_option("--beta-var", prior.beta_var);
    app->add_option("--halft-nu", prior.halft_nu);
    app->add_option("--halft-scale", prior.halft_scale);
    app->add_option("--alpha-var", prior.alpha_var);
    app->add_option("--sigma-transform", sigma_transform, "only log-sd-fisher is implemented");
    app->add_option("--dispersion-transform", dispersion_transform, "only log-sd is implemented");
  }

  ModelSpec spec(const Dataset& data) const {
    if (sigma_transform != "log-sd-fisher") throw ConfigError("unsupported sigma transform " + sigma_transform);
    if (dispersion_transform != "log-sd") throw ConfigError("unsupported dispersion transform " + dispersion_transform);
    ModelSpec m;
    m.family = ExponentialFamily(parse_family(family));
    m.p = data.p();
    m.q = data.q();
    m.estimate_sigma = estimate_sigma;
    if (!estimate_sigma) {
      if (static_cast<Index>(fixed_sigma.size()) != m.q * m.q) throw ConfigError("--fixed-sigma needs q*q values");
      m.fixed_sigma = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          fixed_sigma.data(), m.q, m.q);
    }
    m.estimate_dispersion = estimate_dispersion;
    m.fixed_dispersion = fixed_dispersion;
    m.missingness = missingness;
    m.alpha_columns = alpha_columns;
    m.prior = prior;
    return m;
  }
};

struct SgldOptions {
  Index S = 5;
  std::string delta = "auto";
  double kappa = 1.0;
  Index R = 100;
  std::optional<Index> K;
  double T = 100.0;
  Index thin = 0;
  Index target_samples = 5000;
  std::uint64_t seed = 1;
  std::string sampler = "auto";
  Index burn_in = 100;
  bool warm_start = true;
  double budget_seconds = 0.0;
  Index checkpoint_every = 0;
  std::string checkpoint;
  Index correction_interval = 0;
  bool serial = false;

  void add(CLI::App* app) {
    app->add_option("--S", S, "minibatch size");
    app->add_option("--delta", delta, "step-size exponent, or auto");
    app->add_option("--kappa", kappa, "1 = SGLD, 0 = SGD");
    app->add_option("--R", R, "inner draws per subject");
    app->add_option("--K", K, "outer iterations (overrides --T)");
    app->add_option("--T", T, "continuous-time budget, K = ceil(T / eps)");
    app->add_option("--thin", thin, "thinning stride (0: keep about --target-samples)");
    app->add_option("--target-samples", target_samples);
    app->add_option("--seed", seed);
    app->add_option("--sampler", sampler, "auto | exact | pg | mh | mixture");
    app->add_option("--burn-in", burn_in, "inner-chain burn-in");
    app->add_option("--warm-start", warm_start, "reuse each subject's last latent draw");
    app->add_option("--budget-seconds", budget_seconds, "stop after this much wall time");
    app->add_option("--checkpoint-every", checkpoint_every);
    app->add_option("--checkpoint", checkpoint, "checkpoint file");
    app->add_option("--correction-interval", correction_interval, "dynamic correction period (0 = off)");
    app->add_flag("--serial", serial, "run the per-subject work without OpenMP");
  }

  SgldConfig config(Index n) const {
    SgldConfig c;
    c.S = S;
    c.delta = delta == "auto" ? select_delta(n, S) : std::stod(delta);
    c.kappa = kappa;
    c.R = R;
    c.K = K;
    c.T = T;
    c.thin = thin;
    c.target_samples = target_samples;
    c.seed = seed;
    c.sampler.kind = parse_sampler_kind(sampler);
    c.sampler.burn_in = burn_in;
    c.sampler.warm_start = warm_start;
    c.budget_seconds = budget_seconds;
    c.checkpoint_every = checkpoint_every;
    c.checkpoint_path = checkpoint;
    c.correction_interval = correction_interval;
    c.exec = serial ? Exec::Serial : Exec::Parallel;
    return c;
  }
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return json::parse(in);
}

void print_chain_summary(const Chain& chain, const MatrixXd& samples, std::ostream& out) {
  const VectorXd mean = sample_mean(samples);
  const MatrixXd cov = samples.cols() > 1 ? sample_covariance(samples) : MatrixXd::Zero(mean.size(), mean.size());
  out << "eps=" << chain.eps << " K=" << chain.completed << "/" << chain.K << " kept=" << chain.size()
      << " runtime=" << chain.runtime_seconds << "s";
  if (chain.mean_acceptance > 0.0) out << " inner-acceptance=" << chain.mean_acceptance;
  out << '\n';
  for (Index j = 0; j < mean.size(); ++j)
    out << "  " << chain.names[static_cast<size_t>(j)] << "  mean=" << mean(j) << "  var=" << cov(j, j) << '\n';
}

int cmd_generate(const std::string& design, Index n, Index ni, std::uint64_t seed, const std::string& out) {
  const Design d = parse_design(design);
  const TrueParams truth = default_truth(d);
  const Dataset data = generate_data(d, n, ni, truth, seed);
  write_dataset_csv(data, out);
  json meta{{"design", design}, {"n", n}, {"ni", ni}, {"seed", seed},
            {"beta", std::vector<double>(truth.beta.data(), truth.beta.data() + truth.beta.size())},
            {"Sigma", std::vector<double>(truth.Sigma.data(), truth.Sigma.data() + truth.Sigma.size())},
            {"sigma2", truth.sigma2},
            {"alpha", std::vector<double>(truth.alpha.data(), truth.alpha.data() + truth.alpha.size())}};
  std::ofstream(out + ".json") << meta.dump(2) << '\n';
  std::cout << "wrote " << data.n_subjects() << " subjects, " << data.n_rows() << " rows to " << out << '\n';
  return 0;
}

int cmd_fit(const std::string& data_path, const ModelOptions& mo, const SgldOptions& so, const std::string& out,
            bool resume) {
  const Dataset data = read_dataset_csv(data_path);
  const Model model(mo.spec(data));
  Chain chain;
  if (resume) {
    if (so.checkpoint.empty()) throw ConfigError("--resume needs --checkpoint");
    chain = resume_chain(so.checkpoint, model, data, so.serial ? Exec::Serial : Exec::Parallel);
  } else {
    chain = run_chain(so.config(data.n_subjects()), model, data);
  }
  if (chain.acceptance_warnings > 0)
    std::clog << "warning: " << chain.acceptance_warnings << " subjects have inner MH acceptance outside [0.1, 0.6]\n";
  print_chain_summary(chain, chain.samples, std::cout);
  if (!out.empty()) write_chain_csv(chain, out, nullptr, json{{"data", data_path}}.dump());
  return 0;
}

int cmd_correct(const std::string& data_path, const ModelOptions& mo, const std::string& chain_path, Index R_psi,
                double tail, const std::string& out, const std::string& report) {
  const Dataset data = read_dataset_csv(data_path);
  const Model model(mo.spec(data));
  const json meta = read_json(chain_path + ".json");
  Chain chain;
  chain.config = config_from_json(meta.at("config").dump());
  chain.eps = meta.at("eps").get<double>();
  chain.n = meta.at("n").get<Index>();
  chain.K = meta.at("K").get<Index>();
  chain.completed = meta.at("completed").get<Index>();
  chain.stride = meta.at("stride").get<Index>();
  chain.runtime_seconds = meta.at("runtime_seconds").get<double>();
  chain.samples = read_chain_csv(chain_path, &chain.names, &chain.iterations);
  if (chain.n != data.n_subjects()) throw ConfigError("chain and dataset disagree on n");
  if (chain.names != model.layout().names) throw ConfigError("chain coordinates do not match the model");
  chain.blocks = model.layout().blocks;

  const MatrixXd samples = chain.tail(tail);
  const VectorXd omega_star = sample_mean(samples);
  const MatrixXd psi = psi_at(model, data, omega_star, R_psi > 0 ? R_psi : chain.config.R, chain.config.sampler,
                              chain.config.seed, chain.config.exec);
  const auto res = compute_correction(correction_inputs(samples, psi, chain.eps, chain.n, chain.config.S,
                                                        chain.config.kappa));
  const MatrixXd corrected = apply_correction(res, samples);
  std::cout << "Lyapunov residual " << res.residual << '\n';
  Chain tail_chain = chain;
  tail_chain.samples = samples;
  tail_chain.iterations.assign(chain.iterations.end() - samples.cols(), chain.iterations.end());
  std::cout << "uncorrected:\n";
  print_chain_summary(tail_chain, samples, std::cout);
  std::cout << "corrected:\n";
  print_chain_summary(tail_chain, corrected, std::cout);
  if (!out.empty()) write_chain_csv(tail_chain, out, &corrected, json{{"source_chain", chain_path}}.dump());
  if (!report.empty()) {
    std::ofstream r(report);
    write_correction_report(res, r);
  }
  return 0;
}

int cmd_gibbs(const std::string& data_path, const ModelOptions& mo, const GibbsOptions& go, const std::string& out) {
  const Dataset data = read_dataset_csv(data_path);
  const Model model(mo.spec(data));
  const GibbsChain g = full_gibbs_bernoulli(model, data, go);
  Chain c;
  c.names = g.names;
  c.blocks = model.layout().blocks;
  c.samples = g.samples;
  c.iterations = g.iterations;
  c.n = data.n_subjects();
  c.K = go.burn_in + go.iterations;
  c.completed = c.K;
  c.stride = go.thin;
  c.runtime_seconds = g.runtime_seconds;
  c.config.seed = go.seed;
  std::cout << "Sigma MH acceptance " << g.sigma_acceptance << '\n';
  print_chain_summary(c, g.samples, std::cout);
  if (!out.empty())
    write_chain_csv(c, out, nullptr,
                    json{{"sampler", "gibbs"}, {"data", data_path}, {"sigma_acceptance", g.sigma_acceptance}}.dump());
  return 0;
}

int cmd_report(const std::string& metrics, const std::string& out_csv) {
  const auto rows = compare_report(read_metrics_csv(metrics));
  write_report_text(rows, std::cout);
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    write_report_csv(rows, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SGLD for generalized linear mixed models with covariance correction"};
  app.require_subcommand(1);

  std::string design = "lmm-fixed";
  Index n = 100, ni = 10;
  std::uint64_t seed = 1;
  std::string out, data_path, chain_path, report, metrics;
  auto* gen = app.add_subcommand("generate", "simulate a dataset from one of the built-in designs");
  gen->add_option("--design", design, "lmm-fixed | gaussian-unknown | bernoulli | poisson | missingness");
  gen->add_option("--n", n, "subjects");
  gen->add_option("--ni", ni, "observations per subject");
  gen->add_option("--seed", seed);
  gen->add_option("--out", out, "dataset CSV")->required();

  ModelOptions fit_model;
  SgldOptions fit_sgld;
  bool resume = false;
  auto* fit = app.add_subcommand("fit", "run SGLD on a dataset");
  fit->add_option("--data", data_path)->required();
  fit->add_option("--out", out, "chain CSV");
  fit->add_flag("--resume", resume, "continue from --checkpoint");
  fit_model.add(fit);
  fit_sgld.add(fit);

  ModelOptions cor_model;
  Index R_psi = 0;
  double tail = 0.75;
  auto* cor = app.add_subcommand("correct", "apply the Lyapunov covariance correction to a chain");
  cor->add_option("--data", data_path)->required();
  cor->add_option("--chain", chain_path)->required();
  cor->add_option("--R-psi", R_psi, "draws per subject for Psi at Omega* (0: the chain's R)");
  cor->add_option("--tail", tail, "fraction of the most recent samples used");
  cor->add_option("--out", out, "corrected chain CSV");
  cor->add_option("--report", report, "correction report");
  cor_model.add(cor);

  ModelOptions gibbs_model;
  gibbs_model.family = "bernoulli";
  GibbsOptions go;
  bool gibbs_serial = false;
  auto* gib = app.add_subcommand("gibbs", "full-data Polya-Gamma Gibbs for the logit GLMM");
  gib->add_option("--data", data_path)->required();
  gib->add_option("--iterations", go.iterations);
  gib->add_option("--burn-in", go.burn_in);
  gib->add_option("--thin", go.thin);
  gib->add_option("--sigma-mh-steps", go.sigma_mh_steps);
  gib->add_option("--adapt-sweeps", go.adapt_sweeps);
  gib->add_option("--seed", go.seed);
  gib->add_flag("--serial", gibbs_serial);
  gib->add_option("--out", out, "chain CSV");
  gibbs_model.add(gib);

  ExperimentConfig ec;
  std::string ec_design = "lmm-fixed";
  std::vector<Index> S_grid{5};
  std::vector<double> delta_grid;
  std::string sampler = "auto";
  bool no_timings = false, bench_serial = false;
  std::optional<Index> ec_K;
  auto* bench = app.add_subcommand("bench", "run a simulation experiment and write metrics");
  bench->add_option("--design", ec_design);
  bench->add_option("--n", ec.n);
  bench->add_option("--ni", ec.ni);
  bench->add_option("--S", S_grid, "minibatch sizes")->delimiter(',');
  bench->add_option("--delta", delta_grid, "delta values (default: auto per S)")->delimiter(',');
  bench->add_option("--replications", ec.replications);
  bench->add_option("--seed", ec.seed);
  bench->add_option("--out-dir", ec.out_dir)->required();
  bench->add_option("--T", ec.T);
  bench->add_option("--K", ec_K);
  bench->add_option("--budget-seconds", ec.budget_seconds);
  bench->add_option("--R", ec.R);
  bench->add_option("--R-psi", ec.R_psi);
  bench->add_option("--target-samples", ec.target_samples);
  bench->add_option("--sampler", sampler);
  bench->add_option("--burn-in", ec.sampler.burn_in);
  bench->add_option("--gibbs-iterations", ec.gibbs_iterations);
  bench->add_option("--gibbs-burn-in", ec.gibbs_burn_in);
  bench->add_option("--jobs", ec.jobs, "replications run concurrently");
  bench->add_option("--write-chains", ec.write_chains);
  bench->add_flag("--no-timings", no_timings, "write wall_seconds as NA");
  bench->add_flag("--serial", bench_serial);
  bench->add_option("--beta-var", ec.prior.beta_var);
  bench->add_option("--halft-nu", ec.prior.halft_nu);
  bench->add_option("--halft-scale", ec.prior.halft_scale);

  std::string report_csv;
  auto* rep = app.add_subcommand("report", "summarise a metrics CSV");
  rep->add_option("--metrics", metrics)->required();
  rep->add_option("--out", report_csv, "report CSV");

  try {
    std::vector<std::string> raw(argv + 1, argv + argc);
    auto args = cli::merge_arguments(raw, [&](const std::string& verb, const std::string& key) {
      bool known = false;
      const CLI::App& capp = app;
      for (const auto* sub : capp.get_subcommands([](const CLI::App*) { return true; }))
        known = known || sub->get_option_no_throw("--" + key) != nullptr;
      if (!known) throw ConfigError("config key '" + key + "' is not an option of any command");
      const auto* sub = verb.empty() ? nullptr : app.get_subcommand_no_throw(verb);
      return sub == nullptr || sub->get_option_no_throw("--" + key) != nullptr;
    });
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*gen) return cmd_generate(design, n, ni, seed, out);
    if (*fit) return cmd_fit(data_path, fit_model, fit_sgld, out, resume);
    if (*cor) return cmd_correct(data_path, cor_model, chain_path, R_psi, tail, out, report);
    if (*gib) {
      go.exec = gibbs_serial ? Exec::Serial : Exec::Parallel;
      return cmd_gibbs(data_path, gibbs_model, go, out);
    }
    if (*bench) {
      ec.design = parse_design(ec_design);
      ec.S_grid = S_grid;
      ec.delta_grid = delta_grid;
      ec.K = ec_K;
      ec.sampler.kind = parse_sampler_kind(sampler);
      ec.record_timings = !no_timings;
      ec.exec = bench_serial ? Exec::Serial : Exec::Parallel;
      const auto summary = run_experiment(ec);
      std::cout << "replications: " << summary.replications << ", failed: " << summary.failures << '\n';
      write_report_text(compare_report(summary.rows), std::cout);
      return summary.failures * 10 > summary.replications ? 1 : 0;
    }
    if (*rep) return cmd_report(metrics, report_csv);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
