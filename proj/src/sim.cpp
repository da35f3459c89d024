#include "glmm/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "glmm/errors.hpp"
#include "glmm/reference.hpp"
#include "glmm/rng.hpp"

namespace glmm {

namespace fs = std::filesystem;
using nlohmann::json;

Design parse_design(std::string_view name) {
  if (name == "lmm-fixed") return Design::LmmFixed;
  if (name == "gaussian-unknown") return Design::GaussianUnknown;
  if (name == "bernoulli") return Design::Bernoulli;
  if (name == "poisson") return Design::Poisson;
  if (name == "missingness") return Design::Missingness;
  throw ConfigError("unknown design '" + std::string(name) + "'");
}

std::string_view to_string(Design d) {
  switch (d) {
    case Design::LmmFixed: return "lmm-fixed";
    case Design::GaussianUnknown: return "gaussian-unknown";
    case Design::Bernoulli: return "bernoulli";
    case Design::Poisson: return "poisson";
    case Design::Missingness: return "missingness";
  }
  return "?";
}

TrueParams default_truth(Design d) {
  TrueParams t;
  t.Sigma.resize(2, 2);
  t.Sigma << 1.5, -0.25, -0.25, 1.5;
  t.sigma2 = 2.0;
  if (d == Design::Missingness) {
    t.beta.resize(3);
    t.beta << 1.5, -0.5, 0.5;
    t.alpha.resize(2);
    t.alpha << -1.0, 0.5;
  } else {
    t.beta.resize(2);
    t.beta << 1.5, -0.5;
  }
  return t;
}

ModelSpec design_model(Design d, const TrueParams& truth, const PriorSpec& prior) {
  ModelSpec m;
  m.prior = prior;
  m.p = truth.beta.size();
  m.q = truth.Sigma.rows();
  switch (d) {
    case Design::LmmFixed:
      m.family = ExponentialFamily(Family::Gaussian);
      m.estimate_sigma = false;
      m.fixed_sigma = truth.Sigma;
      m.estimate_dispersion = false;
      m.fixed_dispersion = truth.sigma2;
      break;
    case Design::GaussianUnknown:
      m.family = ExponentialFamily(Family::Gaussian);
      break;
    case Design::Bernoulli:
      m.family = ExponentialFamily(Family::BernoulliLogit);
      break;
    case Design::Poisson:
      m.family = ExponentialFamily(Family::Poisson);
      break;
    case Design::Missingness:
      m.family = ExponentialFamily(Family::BernoulliLogit);
      m.missingness = true;
      m.alpha_columns = {2};
      break;
  }
  return m;
}

Dataset generate_data(Design d, Index n, Index ni, const TrueParams& truth, std::uint64_t seed) {
  if (n < 1 || ni < 1) throw ConfigError("generate_data requires n >= 1 and n_i >= 1");
  Engine eng = make_stream(seed, StreamTag::Data);
  const Index p = truth.beta.size();
  const Index q = truth.Sigma.rows();
  const Index rows = n * ni;
  MatrixXd X(rows, p), Z(rows, q);
  VectorXd y(rows);
  std::vector<Index> offsets(static_cast<size_t>(n + 1));
  std::vector<int> w;
  const MatrixXd L = Eigen::LLT<MatrixXd>(truth.Sigma).matrixL();
  const double sd = std::sqrt(truth.sigma2);

  auto draw_gamma = [&] {
    VectorXd z(q);
    for (Index j = 0; j < q; ++j) z(j) = std_normal(eng);
    return VectorXd(L * z);
  };

  for (Index i = 0; i < n; ++i) {
    const Index off = i * ni;
    offsets[static_cast<size_t>(i)] = off;
    if (d == Design::Missingness) {
      const double xi = std_normal(eng);
      for (Index t = 0; t < ni; ++t) {
        const double tau = ni > 1 ? static_cast<double>(t) / static_cast<double>(ni - 1) : 0.0;
        X.row(off + t) << 1.0, tau, xi;
        Z.row(off + t) << 1.0, tau;
      }
      const double pw = logistic(truth.alpha(0) + truth.alpha(1) * xi);
      const int wi = uniform01(eng) < pw ? 1 : 0;
      w.push_back(wi);
      if (wi == 1) {
        y.segment(off, ni).setZero();
        continue;
      }
      // Y_i given w_i = 0 has at least one event.
      for (int attempt = 0;; ++attempt) {
        if (attempt == 10000) throw NumericError("could not draw a non-zero outcome vector", i);
        const VectorXd eta = X.middleRows(off, ni) * truth.beta + Z.middleRows(off, ni) * draw_gamma();
        for (Index t = 0; t < ni; ++t) y(off + t) = uniform01(eng) < logistic(eta(t)) ? 1.0 : 0.0;
        if (y.segment(off, ni).sum() > 0.0) break;
      }
      continue;
    }
    for (Index t = 0; t < ni; ++t) {
      const double x = std_normal(eng);
      X.row(off + t) << 1.0, x;
      Z.row(off + t) << 1.0, x;
    }
    const VectorXd eta = X.middleRows(off, ni) * truth.beta + Z.middleRows(off, ni) * draw_gamma();
    for (Index t = 0; t < ni; ++t) {
      switch (d) {
        case Design::LmmFixed:
        case Design::GaussianUnknown:
          y(off + t) = eta(t) + sd * std_normal(eng);
          break;
        case Design::Bernoulli:
          y(off + t) = uniform01(eng) < logistic(eta(t)) ? 1.0 : 0.0;
          break;
        case Design::Poisson:
          y(off + t) = static_cast<double>(std::poisson_distribution<long long>(std::exp(eta(t)))(eng));
          break;
        case Design::Missingness:
          break;
      }
    }
  }
  offsets[static_cast<size_t>(n)] = rows;
  if (d == Design::Missingness) return Dataset(std::move(X), std::move(Z), std::move(y), std::move(offsets), w);
  return Dataset(std::move(X), std::move(Z), std::move(y), std::move(offsets));
}

namespace {

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(12) << v;
  return ss.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("NA"); }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s == "NA" || s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace

void write_metrics_header(std::ostream& out) {
  out << "design,n,S,delta,method,parameter,posterior_mean,log_posterior_variance,ppd_log_ratio,wall_seconds,"
         "replication\n";
}

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
  out << r.design << ',' << r.n << ',' << r.S << ',' << fmt(r.delta) << ',' << r.method << ',' << r.parameter << ','
      << fmt(r.posterior_mean) << ',' << fmt(r.log_posterior_variance) << ',' << fmt(r.ppd_log_ratio) << ','
      << fmt(r.wall_seconds) << ',' << r.replication << '\n';
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("design,n,S,delta,method,parameter", 0) != 0)
    throw ConfigError("metrics CSV: unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 11) throw ConfigError("metrics CSV: expected 11 columns in '" + line + "'");
    MetricsRow r;
    r.design = c[0];
    r.n = std::stoll(c[1]);
    r.S = std::stoll(c[2]);
    r.delta = std::stod(c[3]);
    r.method = c[4];
    r.parameter = c[5];
    r.posterior_mean = std::stod(c[6]);
    r.log_posterior_variance = std::stod(c[7]);
    r.ppd_log_ratio = parse_opt(c[8]);
    r.wall_seconds = parse_opt(c[9]);
    r.replication = std::stoll(c[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_metrics_csv(in);
}

MatrixXd psi_at(const Model& model, const Dataset& data, const VectorXd& omega, Index R, const SamplerOptions& opts,
                std::uint64_t seed, Exec exec) {
  GradientEstimator est(model, data, R, opts, seed, exec);
  const auto parts = est.full_pass(omega, R, 0);
  return population_covariance(parts).psi;
}

SgldFit fit_and_correct(const SgldConfig& config, const Model& model, const Dataset& data, Index R_psi,
                        double tail_fraction) {
  SgldFit fit;
  fit.chain = run_chain(config, model, data);
  fit.tail = fit.chain.tail(tail_fraction);
  const auto start = std::chrono::steady_clock::now();
  const VectorXd omega_star = sample_mean(fit.tail);
  fit.psi = psi_at(model, data, omega_star, R_psi > 0 ? R_psi : config.R, config.sampler, config.seed, config.exec);
  fit.correction = compute_correction(
      correction_inputs(fit.tail, fit.psi, fit.chain.eps, data.n_subjects(), config.S, config.kappa));
  fit.corrected = apply_correction(fit.correction, fit.tail);
  fit.correction_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return fit;
}

namespace {

struct RepOutput {
  std::vector<MetricsRow> rows;
  std::vector<std::string> files;
  std::uint64_t seed = 0;
  std::string error;
};

std::string delta_tag(double delta) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(3) << delta;
  return ss.str();
}

void append_rows(std::vector<MetricsRow>& rows, const MetricsRow& base, const std::vector<std::string>& names,
                 const MatrixXd& samples, std::optional<double> ppd, std::optional<double> seconds) {
  const VectorXd mean = sample_mean(samples);
  const MatrixXd cov = sample_covariance(samples);
  for (Index j = 0; j < samples.rows(); ++j) {
    MetricsRow r = base;
    r.parameter = names[static_cast<size_t>(j)];
    r.posterior_mean = mean(j);
    r.log_posterior_variance = std::log(cov(j, j));
    r.ppd_log_ratio = ppd;
    r.wall_seconds = seconds;
    rows.push_back(std::move(r));
  }
}

RepOutput run_replication(const ExperimentConfig& cfg, Index rep, Exec exec) {
  RepOutput out;
  const TrueParams truth = cfg.truth ? *cfg.truth : default_truth(cfg.design);
  const std::uint64_t rep_seed = derive_seed(cfg.seed, StreamTag::Replication, static_cast<std::uint64_t>(rep));
  out.seed = rep_seed;
  const Dataset data = generate_data(cfg.design, cfg.n, cfg.ni, truth, derive_seed(rep_seed, StreamTag::Data));
  const Model model(design_model(cfg.design, truth, cfg.prior));
  const auto& names = model.layout().names;
  const std::string design(to_string(cfg.design));
  auto timing = [&](double s) { return cfg.record_timings ? std::optional<double>(s) : std::nullopt; };
  auto path_for = [&](const std::string& name) { return (fs::path(cfg.out_dir) / name).string(); };

  // Oracles computed once per replication, reported for every (S, delta).
  std::optional<LmmPosterior> post;
  double post_seconds = 0.0;
  MatrixXd Xnew, Znew;
  std::optional<PpdMoments> ppd_true;
  if (cfg.design == Design::LmmFixed) {
    const auto t0 = std::chrono::steady_clock::now();
    post = lmm_posterior(data, truth.sigma2, truth.Sigma, cfg.prior);
    post_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Engine eng = make_stream(rep_seed, StreamTag::Data, 1);
    Xnew.resize(cfg.ni, 2);
    for (Index t = 0; t < cfg.ni; ++t) Xnew.row(t) << 1.0, std_normal(eng);
    Znew = Xnew;
    ppd_true = lmm_ppd(*post, Xnew, Znew, truth.sigma2, truth.Sigma);
  }
  std::optional<GibbsChain> gibbs;
  MatrixXd gibbs_tail;
  if (cfg.design == Design::Bernoulli && cfg.gibbs_iterations > 0) {
    GibbsOptions go;
    go.iterations = cfg.gibbs_iterations;
    go.burn_in = cfg.gibbs_burn_in;
    go.adapt_sweeps = std::min<Index>(cfg.gibbs_burn_in, 1000);
    go.seed = derive_seed(rep_seed, StreamTag::Gibbs);
    go.exec = exec;
    gibbs = full_gibbs_bernoulli(model, data, go);
    const Index m = gibbs->samples.cols();
    gibbs_tail = gibbs->samples.rightCols(m - m / 4);
  }

  for (const Index S : cfg.S_grid) {
    std::vector<double> deltas = cfg.delta_grid;
    if (deltas.empty()) deltas.push_back(select_delta(cfg.n, S));
    for (const double delta : deltas) {
      MetricsRow base;
      base.design = design;
      base.n = cfg.n;
      base.S = S;
      base.delta = delta;
      base.replication = rep;

      if (post) {
        base.method = "closed-form";
        for (Index j = 0; j < post->mean.size(); ++j) {
          MetricsRow r = base;
          r.parameter = names[static_cast<size_t>(j)];
          r.posterior_mean = post->mean(j);
          r.log_posterior_variance = std::log(post->cov(j, j));
          r.ppd_log_ratio = 0.0;
          r.wall_seconds = timing(post_seconds);
          out.rows.push_back(r);
        }
      }
      if (gibbs) {
        base.method = "gibbs";
        append_rows(out.rows, base, names, gibbs_tail, std::nullopt, timing(gibbs->runtime_seconds));
      }

      SgldConfig sc;
      sc.S = S;
      sc.delta = delta;
      sc.R = cfg.R;
      sc.K = cfg.K;
      sc.T = cfg.T;
      sc.target_samples = cfg.target_samples;
      sc.budget_seconds = cfg.budget_seconds;
      sc.sampler = cfg.sampler;
      sc.exec = exec;
      sc.seed = derive_seed(rep_seed, StreamTag::Replication, static_cast<std::uint64_t>(S),
                            static_cast<std::uint64_t>(std::llround(delta * 1000.0)));
      const SgldFit fit = fit_and_correct(sc, model, data, cfg.R_psi);

      std::optional<double> ppd_raw, ppd_cor;
      if (ppd_true) {
        const auto& L = model.layout();
        Engine e1 = make_stream(sc.seed, StreamTag::Data, 2);
        Engine e2 = make_stream(sc.seed, StreamTag::Data, 3);
        ppd_raw = ppd_log_ratio(chain_ppd_variance(fit.tail.middleRows(L.beta, L.n_beta), Xnew, Znew, truth.sigma2,
                                                   truth.Sigma, e1),
                                ppd_true->cov);
        ppd_cor = ppd_log_ratio(chain_ppd_variance(fit.corrected.middleRows(L.beta, L.n_beta), Xnew, Znew,
                                                   truth.sigma2, truth.Sigma, e2),
                                ppd_true->cov);
      }
      base.method = "sgld";
      append_rows(out.rows, base, names, fit.tail, ppd_raw, timing(fit.chain.runtime_seconds));
      base.method = "sgld-corrected";
      append_rows(out.rows, base, names, fit.corrected, ppd_cor,
                  timing(fit.chain.runtime_seconds + fit.correction_seconds));

      if (!cfg.out_dir.empty() && cfg.write_chains) {
        const std::string stem = "chains/rep" + std::to_string(rep) + "_S" + std::to_string(S) + "_delta" +
                                 delta_tag(delta);
        const std::string extra = json{{"design", design}, {"replication", rep}}.dump();
        Chain tail_chain = fit.chain;
        tail_chain.samples = fit.tail;
        tail_chain.iterations.assign(fit.chain.iterations.end() - fit.tail.cols(), fit.chain.iterations.end());
        write_chain_csv(fit.chain, path_for(stem + ".csv"), nullptr, extra);
        write_chain_csv(tail_chain, path_for(stem + "_corrected.csv"), &fit.corrected, extra);
        std::ofstream rep_out(path_for("reports/rep" + std::to_string(rep) + "_S" + std::to_string(S) + "_delta" +
                                       delta_tag(delta) + "_correction.json"));
        write_correction_report(fit.correction, rep_out);
        out.files.push_back(stem + ".csv");
        out.files.push_back(stem + "_corrected.csv");
      }
    }
  }
  return out;
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  if (cfg.replications < 1) throw ConfigError("replications must be >= 1");
  if (cfg.S_grid.empty()) throw ConfigError("S grid is empty");
  if (!cfg.out_dir.empty()) {
    fs::create_directories(fs::path(cfg.out_dir) / "chains");
    fs::create_directories(fs::path(cfg.out_dir) / "reports");
  }
  const Index reps = cfg.replications;
  std::vector<RepOutput> outputs(static_cast<size_t>(reps));
  const int jobs = std::max(1, cfg.jobs);
  const Exec inner = jobs > 1 ? Exec::Serial : cfg.exec;

  auto one = [&](Index r) {
    try {
      outputs[static_cast<size_t>(r)] = run_replication(cfg, r, inner);
    } catch (const std::exception& e) {
      outputs[static_cast<size_t>(r)].error = e.what();
    }
  };
  if (jobs > 1) {
#pragma omp parallel for num_threads(jobs) schedule(dynamic)
    for (Index r = 0; r < reps; ++r) one(r);
  } else {
    for (Index r = 0; r < reps; ++r) one(r);
  }

  ExperimentSummary summary;
  summary.replications = reps;
  json manifest;
  manifest["tool"] = "glmm-sgld";
  manifest["version"] = "1.0.0";
  manifest["design"] = std::string(to_string(cfg.design));
  manifest["n"] = cfg.n;
  manifest["ni"] = cfg.ni;
  manifest["seed"] = cfg.seed;
  manifest["S_grid"] = cfg.S_grid;
  manifest["delta_grid"] = cfg.delta_grid;
  manifest["T"] = cfg.T;
  manifest["R"] = cfg.R;
  const TrueParams truth = cfg.truth ? *cfg.truth : default_truth(cfg.design);
  manifest["truth"] = {{"beta", std::vector<double>(truth.beta.data(), truth.beta.data() + truth.beta.size())},
                       {"Sigma", {{truth.Sigma(0, 0), truth.Sigma(0, 1)}, {truth.Sigma(1, 0), truth.Sigma(1, 1)}}},
                       {"sigma2", truth.sigma2},
                       {"alpha", std::vector<double>(truth.alpha.data(), truth.alpha.data() + truth.alpha.size())}};
  json reps_json = json::array();
  std::vector<std::string> files;
  for (Index r = 0; r < reps; ++r) {
    auto& o = outputs[static_cast<size_t>(r)];
    reps_json.push_back({{"replication", r}, {"seed", o.seed}, {"ok", o.error.empty()}, {"error", o.error}});
    if (!o.error.empty()) {
      ++summary.failures;
      summary.errors.push_back("replication " + std::to_string(r) + ": " + o.error);
      std::clog << "replication " << r << " failed: " << o.error << '\n';
      continue;
    }
    summary.rows.insert(summary.rows.end(), o.rows.begin(), o.rows.end());
    files.insert(files.end(), o.files.begin(), o.files.end());
  }
  manifest["replications"] = reps_json;

  if (!cfg.out_dir.empty()) {
    const std::string metrics = (fs::path(cfg.out_dir) / "metrics.csv").string();
    {
      std::ofstream out(metrics);
      if (!out) throw ConfigError("cannot write " + metrics);
      write_metrics_header(out);
      for (const auto& r : summary.rows) write_metrics_row(out, r);
    }
    files.insert(files.begin(), "metrics.csv");
    json hashes;
    for (const auto& f : files) {
      const auto full = (fs::path(cfg.out_dir) / f).string();
      hashes[f] = sha256_file(full);
      if (f != "metrics.csv") hashes[f + ".json"] = sha256_file(full + ".json");
    }
    manifest["files"] = hashes;
    std::ofstream m((fs::path(cfg.out_dir) / "manifest.json").string());
    m << manifest.dump(2) << '\n';
  }
  return summary;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw ConfigError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<ReportRow> compare_report(const std::vector<MetricsRow>& rows) {
  using Key = std::tuple<std::string, Index, Index, double, std::string, std::string>;
  using OracleKey = std::tuple<std::string, Index, Index, double, std::string, Index>;
  std::map<OracleKey, double> oracle;
  for (const auto& r : rows)
    if (r.method == "closed-form" || r.method == "gibbs")
      oracle[{r.design, r.n, r.S, r.delta, r.parameter, r.replication}] = r.log_posterior_variance;

  std::map<Key, std::vector<const MetricsRow*>> groups;
  for (const auto& r : rows) groups[{r.design, r.n, r.S, r.delta, r.method, r.parameter}].push_back(&r);

  std::vector<ReportRow> out;
  for (const auto& [key, members] : groups) {
    ReportRow rr;
    std::tie(rr.design, rr.n, rr.S, rr.delta, rr.method, rr.parameter) = key;
    rr.replications = static_cast<Index>(members.size());
    std::vector<double> lv, ratio, ppd;
    bool all_matched = true;
    for (const auto* m : members) {
      lv.push_back(m->log_posterior_variance);
      if (m->ppd_log_ratio) ppd.push_back(*m->ppd_log_ratio);
      const bool is_oracle = m->method == "closed-form" || m->method == "gibbs";
      const auto it = oracle.find({m->design, m->n, m->S, m->delta, m->parameter, m->replication});
      if (is_oracle || it == oracle.end()) {
        all_matched = false;
      } else {
        ratio.push_back(std::exp(m->log_posterior_variance - it->second));
      }
    }
    double sum = 0.0;
    for (double v : lv) sum += v;
    rr.mean_log_variance = sum / static_cast<double>(lv.size());
    rr.q025_log_variance = quantile(lv, 0.025);
    rr.q975_log_variance = quantile(lv, 0.975);
    if (all_matched && !ratio.empty()) {
      double rs = 0.0;
      for (double v : ratio) rs += v;
      rr.mean_variance_ratio = rs / static_cast<double>(ratio.size());
      rr.q025_variance_ratio = quantile(ratio, 0.025);
      rr.q975_variance_ratio = quantile(ratio, 0.975);
    }
    if (!ppd.empty()) {
      double ps = 0.0;
      for (double v : ppd) ps += v;
      rr.mean_ppd_log_ratio = ps / static_cast<double>(ppd.size());
    }
    out.push_back(std::move(rr));
  }
  return out;
}

void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out) {
  out << "design,n,S,delta,method,parameter,replications,mean_log_variance,q025_log_variance,q975_log_variance,"
         "mean_variance_ratio,q025_variance_ratio,q975_variance_ratio,mean_ppd_log_ratio\n";
  for (const auto& r : rows) {
    out << r.design << ',' << r.n << ',' << r.S << ',' << fmt(r.delta) << ',' << r.method << ',' << r.parameter << ','
        << r.replications << ',' << fmt(r.mean_log_variance) << ',' << fmt(r.q025_log_variance) << ','
        << fmt(r.q975_log_variance) << ',' << fmt(r.mean_variance_ratio) << ',' << fmt(r.q025_variance_ratio) << ','
        << fmt(r.q975_variance_ratio) << ',' << fmt(r.mean_ppd_log_ratio) << '\n';
  }
}

void write_report_text(const std::vector<ReportRow>& rows, std::ostream& out) {
  std::string last;
  for (const auto& r : rows) {
    const std::string head = r.design + "  n=" + std::to_string(r.n) + "  S=" + std::to_string(r.S) +
                             "  delta=" + fmt(r.delta);
    if (head != last) {
      out << '\n' << head << '\n';
      out << std::left << std::setw(16) << "method" << std::setw(12) << "parameter" << std::right << std::setw(6)
          << "reps" << std::setw(12) << "log var" << std::setw(24) << "95% interval" << std::setw(10) << "ratio"
          << std::setw(10) << "ppd" << '\n';
      last = head;
    }
    std::ostringstream interval;
    interval << std::fixed << std::setprecision(3) << '[' << r.q025_log_variance << ", " << r.q975_log_variance << ']';
    out << std::left << std::setw(16) << r.method << std::setw(12) << r.parameter << std::right << std::setw(6)
        << r.replications << std::setw(12) << std::fixed << std::setprecision(3) << r.mean_log_variance
        << std::setw(24) << interval.str() << std::setw(10)
        << (r.mean_variance_ratio ? fmt(std::round(*r.mean_variance_ratio * 1000.0) / 1000.0) : "NA")
        << std::setw(10) << (r.mean_ppd_log_ratio ? fmt(std::round(*r.mean_ppd_log_ratio * 1000.0) / 1000.0) : "NA")
        << '\n';
    out.unsetf(std::ios::fixed);
  }
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream ss;
  for (unsigned int j = 0; j < len; ++j) ss << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[j]);
  return ss.str();
}

}  // namespace glmm
