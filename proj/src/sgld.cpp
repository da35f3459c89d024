#include "glmm/sgld.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "glmm/correction.hpp"
#include "glmm/errors.hpp"

namespace glmm {

using nlohmann::json;

namespace {

constexpr double kUpdateClamp = 1e6;
constexpr std::uint64_t kWarmStartBase = std::uint64_t{1} << 62;

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

json mat_json(const MatrixXd& m) {
  json out = json::array();
  for (Index c = 0; c < m.cols(); ++c) out.push_back(vec_json(m.col(c)));
  return out;
}

MatrixXd json_mat(const json& j, Index rows) {
  MatrixXd m(rows, static_cast<Index>(j.size()));
  for (Index c = 0; c < m.cols(); ++c) m.col(c) = json_vec(j[static_cast<size_t>(c)]);
  return m;
}

json sampler_json(const SamplerOptions& s) {
  return {{"kind", std::string(to_string(s.kind))},
          {"burn_in", s.burn_in},
          {"warm_start", s.warm_start},
          {"mh_initial_scale", s.mh_initial_scale},
          {"mh_target_accept", s.mh_target_accept}};
}

json config_json(const SgldConfig& c) {
  json j;
  j["S"] = c.S;
  j["delta"] = c.delta;
  j["kappa"] = c.kappa;
  j["R"] = c.R;
  j["K"] = c.K ? json(*c.K) : json(nullptr);
  j["T"] = c.T;
  j["thin"] = c.thin;
  j["target_samples"] = c.target_samples;
  j["seed"] = c.seed;
  j["omega0"] = vec_json(c.omega0);
  j["warmstart_epochs"] = c.warmstart_epochs;
  j["sampler"] = sampler_json(c.sampler);
  j["exec"] = c.exec == Exec::Serial ? "serial" : "parallel";
  j["psi_estimator"] = static_cast<int>(c.psi_estimator);
  j["budget_seconds"] = c.budget_seconds;
  j["checkpoint_every"] = c.checkpoint_every;
  j["checkpoint_path"] = c.checkpoint_path;
  j["correction_interval"] = c.correction_interval;
  j["psi_decay"] = c.psi_decay;
  return j;
}

SgldConfig config_of(const json& j) {
  SgldConfig c;
  c.S = j.at("S").get<Index>();
  c.delta = j.at("delta").get<double>();
  c.kappa = j.at("kappa").get<double>();
  c.R = j.at("R").get<Index>();
  if (!j.at("K").is_null()) c.K = j.at("K").get<Index>();
  c.T = j.at("T").get<double>();
  c.thin = j.at("thin").get<Index>();
  c.target_samples = j.at("target_samples").get<Index>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.omega0 = json_vec(j.at("omega0"));
  c.warmstart_epochs = j.at("warmstart_epochs").get<Index>();
  const auto& s = j.at("sampler");
  c.sampler.kind = parse_sampler_kind(s.at("kind").get<std::string>());
  c.sampler.burn_in = s.at("burn_in").get<Index>();
  c.sampler.warm_start = s.at("warm_start").get<bool>();
  c.sampler.mh_initial_scale = s.at("mh_initial_scale").get<double>();
  c.sampler.mh_target_accept = s.at("mh_target_accept").get<double>();
  c.exec = j.at("exec").get<std::string>() == "serial" ? Exec::Serial : Exec::Parallel;
  c.psi_estimator = static_cast<PsiEstimator>(j.at("psi_estimator").get<int>());
  c.budget_seconds = j.at("budget_seconds").get<double>();
  c.checkpoint_every = j.at("checkpoint_every").get<Index>();
  c.checkpoint_path = j.at("checkpoint_path").get<std::string>();
  c.correction_interval = j.at("correction_interval").get<Index>();
  c.psi_decay = j.at("psi_decay").get<double>();
  return c;
}

void write_checkpoint(const Chain& chain, const std::vector<VectorXd>& kept, const VectorXd& omega,
                      const std::vector<LatentState>* states) {
  const auto& path = chain.config.checkpoint_path;
  if (path.empty()) return;
  json j;
  j["config"] = config_json(chain.config);
  j["names"] = chain.names;
  j["blocks"] = chain.blocks;
  j["n"] = chain.n;
  j["eps"] = chain.eps;
  j["K"] = chain.K;
  j["completed"] = chain.completed;
  j["stride"] = chain.stride;
  j["omega_initial"] = vec_json(chain.omega_initial);
  j["omega"] = vec_json(omega);
  json samples = json::array();
  for (const auto& v : kept) samples.push_back(vec_json(v));
  j["samples"] = samples;
  j["iterations"] = chain.iterations;
  j["timestamps"] = chain.timestamps;
  j["runtime_seconds"] = chain.runtime_seconds;
  j["grad_norm_sum"] = chain.grad_norm_sum;
  json psi;
  psi["weight"] = chain.running_psi.weight();
  if (chain.running_psi.ready()) {
    psi["m1"] = vec_json(chain.running_psi.first_moment());
    psi["m2"] = mat_json(chain.running_psi.second_moment());
    psi["mc"] = mat_json(chain.running_psi.monte_carlo_moment());
  }
  j["running_psi"] = psi;
  json dyn = json::array();
  for (const auto& d : chain.dynamic)
    dyn.push_back({{"iteration", d.iteration},
                   {"omega_star", vec_json(d.omega_star)},
                   {"G", mat_json(d.G)},
                   {"A_inv", mat_json(d.A_inv)}});
  j["dynamic"] = dyn;
  json st = json::array();
  if (states) {
    for (const auto& s : *states)
      st.push_back({{"gamma", vec_json(s.gamma)},
                    {"log_scale", s.log_scale},
                    {"adapt_steps", s.adapt_steps},
                    {"accepted", s.accepted},
                    {"proposed", s.proposed}});
  }
  j["latent_states"] = st;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write checkpoint " + tmp);
    out << j.dump();
  }
  std::rename(tmp.c_str(), path.c_str());
}

struct Restored {
  Chain chain;
  std::vector<LatentState> states;
};

Restored read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  const json j = json::parse(in);
  Restored r;
  Chain& c = r.chain;
  c.config = config_of(j.at("config"));
  c.names = j.at("names").get<std::vector<std::string>>();
  c.blocks = j.at("blocks").get<std::vector<std::string>>();
  c.n = j.at("n").get<Index>();
  c.eps = j.at("eps").get<double>();
  c.K = j.at("K").get<Index>();
  c.completed = j.at("completed").get<Index>();
  c.stride = j.at("stride").get<Index>();
  c.omega_initial = json_vec(j.at("omega_initial"));
  c.omega_final = json_vec(j.at("omega"));
  const Index d = c.omega_final.size();
  c.samples = json_mat(j.at("samples"), d);
  c.iterations = j.at("iterations").get<std::vector<Index>>();
  c.timestamps = j.at("timestamps").get<std::vector<double>>();
  c.runtime_seconds = j.at("runtime_seconds").get<double>();
  c.grad_norm_sum = j.at("grad_norm_sum").get<double>();
  c.running_psi = RunningPsi(c.config.psi_decay);
  const auto& psi = j.at("running_psi");
  if (psi.contains("m1"))
    c.running_psi.restore(psi.at("weight").get<double>(), json_vec(psi.at("m1")), json_mat(psi.at("m2"), d),
                          json_mat(psi.at("mc"), d));
  for (const auto& dj : j.at("dynamic")) {
    DynamicCorrection dc;
    dc.iteration = dj.at("iteration").get<Index>();
    dc.omega_star = json_vec(dj.at("omega_star"));
    dc.G = json_mat(dj.at("G"), d);
    dc.A_inv = json_mat(dj.at("A_inv"), d);
    c.dynamic.push_back(std::move(dc));
  }
  for (const auto& sj : j.at("latent_states")) {
    LatentState s;
    s.gamma = json_vec(sj.at("gamma"));
    s.log_scale = sj.at("log_scale").get<double>();
    s.adapt_steps = sj.at("adapt_steps").get<std::int64_t>();
    s.accepted = sj.at("accepted").get<std::int64_t>();
    s.proposed = sj.at("proposed").get<std::int64_t>();
    r.states.push_back(std::move(s));
  }
  return r;
}

}  // namespace

double step_size(Index n, Index S, double delta) {
  if (n < 1 || S < 1) throw ConfigError("step_size requires n >= 1 and S >= 1");
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
  return static_cast<double>(S) * std::pow(static_cast<double>(n), -(1.0 + delta));
}

double select_delta(Index n, Index S) {
  if (S < 1 || S > n) throw ConfigError("select_delta requires 1 <= S <= n");
  for (int j = 1; j <= 10; ++j) {
    const double delta = j / 10.0;
    // eps < 1/n  <=>  S < n^delta; the margin keeps exact ties out.
    if (static_cast<double>(S) < std::pow(static_cast<double>(n), delta) * (1.0 - 1e-12)) return 0.5 * (delta + 1.0);
  }
  throw ConfigError("no delta on the grid gives eps < 1/n for n = " + std::to_string(n) + ", S = " +
                    std::to_string(S));
}

VectorXd MinibatchSource::gradient(const VectorXd& omega, std::uint64_t k, std::vector<SubjectGradient>* parts) {
  return est_.minibatch_gradient(omega, S_, k, parts).full_grad;
}

VectorXd sgld_update(const VectorXd& omega, const VectorXd& grad, double eps, double kappa, Engine& eng) {
  VectorXd next = omega - eps * grad;
  if (kappa != 0.0) {
    const double scale = kappa * std::sqrt(2.0 * eps);
    for (Index j = 0; j < next.size(); ++j) next(j) += scale * std_normal(eng);
  }
  return next;
}

MatrixXd Chain::tail(double fraction) const {
  const Index m = samples.cols();
  const Index keep = std::max<Index>(1, static_cast<Index>(std::ceil(fraction * static_cast<double>(m))));
  return samples.rightCols(std::min(keep, m));
}

Chain run_sgld(const SgldConfig& config, GradientSource& source, Index n, const VectorXd& omega0,
               const std::vector<std::string>& names, const std::vector<std::string>& blocks, const Chain* resume) {
  using clock = std::chrono::steady_clock;
  if (config.S < 1) throw ConfigError("S must be >= 1");
  if (config.kappa != 0.0 && config.kappa != 1.0) throw ConfigError("kappa must be 0 or 1");
  if (!omega0.allFinite()) throw ConfigError("Omega_0 is not finite");

  Chain chain;
  std::vector<VectorXd> kept;
  VectorXd omega;
  Index k0 = 0;
  if (resume) {
    chain = *resume;
    chain.config.exec = config.exec;
    for (Index c = 0; c < chain.samples.cols(); ++c) kept.emplace_back(chain.samples.col(c));
    omega = chain.omega_final;
    k0 = chain.completed;
  } else {
    chain.config = config;
    chain.names = names;
    chain.blocks = blocks;
    chain.n = n;
    chain.eps = step_size(n, config.S, config.delta);
    if (config.delta > 0.0 && static_cast<double>(config.S) > std::pow(static_cast<double>(n), config.delta))
      std::clog << "warning: eps = " << chain.eps << " is not below 1/n; the chain may be unstable\n";
    chain.K = config.K ? *config.K : static_cast<Index>(std::ceil(config.T / chain.eps));
    if (chain.K < 0) throw ConfigError("K must be >= 0");
    chain.stride = config.thin > 0 ? config.thin
                                   : std::max<Index>(1, chain.K / std::max<Index>(1, config.target_samples));
    chain.omega_initial = omega0;
    chain.running_psi = RunningPsi(config.psi_decay);
    omega = omega0;
  }
  const SgldConfig& cfg = chain.config;
  const double eps = chain.eps;
  const Index d = omega.size();
  const bool dynamic = cfg.correction_interval > 0;
  std::vector<SubjectGradient> parts;

  const auto start = clock::now();
  const double runtime_before = chain.runtime_seconds;
  auto elapsed = [&] { return runtime_before + std::chrono::duration<double>(clock::now() - start).count(); };

  for (Index k = k0; k < chain.K; ++k) {
    if (cfg.budget_seconds > 0.0 && elapsed() > cfg.budget_seconds) {
      chain.budget_stopped = true;
      break;
    }
    const auto uk = static_cast<std::uint64_t>(k);
    auto diverged = [&](const std::string& why) {
      chain.completed = k;
      chain.omega_final = omega;
      chain.runtime_seconds = elapsed();
      write_checkpoint(chain, kept, omega, source.latent_states());
      return DivergenceError(why, omega, k);
    };
    VectorXd grad;
    try {
      grad = source.gradient(omega, uk, dynamic ? &parts : nullptr);
    } catch (const NumericError& e) {
      throw diverged(std::string("SGLD gradient failed (") + e.what() + ")");
    }
    Engine eng = make_stream(cfg.seed, StreamTag::Noise, uk);
    const VectorXd next = sgld_update(omega, grad, eps, cfg.kappa, eng);
    if (!grad.allFinite() || !next.allFinite() || (next - omega).cwiseAbs().maxCoeff() > kUpdateClamp)
      throw diverged("SGLD update diverged");
    omega = next;
    chain.grad_norm_sum += grad.norm();

    if ((k + 1) % chain.stride == 0) {
      kept.push_back(omega);
      chain.iterations.push_back(k + 1);
      chain.timestamps.push_back(elapsed());
    }
    if (dynamic) {
      chain.running_psi.update(parts);
      if ((k + 1) % cfg.correction_interval == 0 && static_cast<Index>(kept.size()) >= std::max<Index>(d + 2, 20)) {
        const Index m = static_cast<Index>(kept.size());
        const Index start_col = m / 4;
        MatrixXd recent(d, m - start_col);
        for (Index c = start_col; c < m; ++c) recent.col(c - start_col) = kept[static_cast<size_t>(c)];
        try {
          const auto res = compute_correction(
              correction_inputs(recent, chain.running_psi.estimate(n), eps, n, cfg.S, cfg.kappa));
          chain.dynamic.push_back({k + 1, res.omega_star, res.G, res.A_inv});
        } catch (const NumericError& e) {
          std::clog << "dynamic correction skipped at iteration " << k + 1 << ": " << e.what() << '\n';
        }
      }
    }
    chain.completed = k + 1;
    if (cfg.checkpoint_every > 0 && (k + 1) % cfg.checkpoint_every == 0) {
      chain.omega_final = omega;
      chain.runtime_seconds = elapsed();
      write_checkpoint(chain, kept, omega, source.latent_states());
    }
  }

  if (chain.K == 0 && kept.empty()) {
    kept.push_back(omega);
    chain.iterations.push_back(0);
    chain.timestamps.push_back(0.0);
  }
  chain.samples.resize(d, static_cast<Index>(kept.size()));
  for (size_t c = 0; c < kept.size(); ++c) chain.samples.col(static_cast<Index>(c)) = kept[c];
  chain.omega_final = omega;
  chain.runtime_seconds = elapsed();
  chain.mean_grad_norm = chain.completed > 0 ? chain.grad_norm_sum / static_cast<double>(chain.completed) : 0.0;
  return chain;
}

VectorXd warm_start_beta(const Model& model, const Dataset& data, GradientEstimator& est, VectorXd omega, Index S,
                         double eps, Index epochs) {
  const auto& L = model.layout();
  const Index n = data.n_subjects();
  const Index iters = epochs * ((n + S - 1) / S);
  for (Index j = 0; j < iters; ++j) {
    const auto g = est.minibatch_gradient(omega, S, kWarmStartBase + static_cast<std::uint64_t>(j)).full_grad;
    const VectorXd step = eps * g.segment(L.beta, L.n_beta);
    if (!step.allFinite() || step.cwiseAbs().maxCoeff() > kUpdateClamp)
      throw DivergenceError("beta warm start diverged", omega, j);
    omega.segment(L.beta, L.n_beta) -= step;
  }
  return omega;
}

Chain run_chain(const SgldConfig& config, const Model& model, const Dataset& data) {
  model.check(data);
  const Index n = data.n_subjects();
  GradientEstimator est(model, data, config.R, config.sampler, config.seed, config.exec, config.psi_estimator);
  VectorXd omega0 = config.omega0;
  if (omega0.size() == 0) {
    omega0 = warm_start_beta(model, data, est, model.prior_center(), config.S, step_size(n, config.S, config.delta),
                             config.warmstart_epochs);
  } else if (omega0.size() != model.dim()) {
    throw ConfigError("Omega_0 has length " + std::to_string(omega0.size()) + ", model needs " +
                      std::to_string(model.dim()));
  }
  MinibatchSource src(est, config.S);
  Chain chain = run_sgld(config, src, n, omega0, model.layout().names, model.layout().blocks);
  chain.mean_acceptance = est.mean_acceptance();
  chain.acceptance_warnings = est.acceptance_warnings();
  return chain;
}

Chain resume_chain(const std::string& checkpoint_path, const Model& model, const Dataset& data,
                   std::optional<Exec> exec) {
  Restored r = read_checkpoint(checkpoint_path);
  SgldConfig config = r.chain.config;
  if (exec) config.exec = *exec;
  if (r.chain.n != data.n_subjects()) throw ConfigError("checkpoint was written for a different dataset");
  GradientEstimator est(model, data, config.R, config.sampler, config.seed, config.exec, config.psi_estimator);
  if (r.states.size() == est.states().size()) est.states() = std::move(r.states);
  MinibatchSource src(est, config.S);
  Chain chain = run_sgld(config, src, r.chain.n, r.chain.omega_initial, r.chain.names, r.chain.blocks, &r.chain);
  chain.mean_acceptance = est.mean_acceptance();
  chain.acceptance_warnings = est.acceptance_warnings();
  return chain;
}

void write_chain_csv(const Chain& chain, const std::string& path, const MatrixXd* samples,
                     const std::string& extra_metadata_json) {
  const MatrixXd& m = samples ? *samples : chain.samples;
  {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out.precision(17);
    out << "iter,block,coord,value\n";
    for (Index c = 0; c < m.cols(); ++c) {
      const Index it = c < static_cast<Index>(chain.iterations.size()) ? chain.iterations[static_cast<size_t>(c)] : c;
      for (Index j = 0; j < m.rows(); ++j)
        out << it << ',' << chain.blocks[static_cast<size_t>(j)] << ',' << chain.names[static_cast<size_t>(j)] << ','
            << m(j, c) << '\n';
    }
  }
  json meta;
  meta["config"] = config_json(chain.config);
  meta["seed"] = chain.config.seed;
  meta["eps"] = chain.eps;
  meta["n"] = chain.n;
  meta["K"] = chain.K;
  meta["completed"] = chain.completed;
  meta["stride"] = chain.stride;
  meta["samples"] = m.cols();
  meta["runtime_seconds"] = chain.runtime_seconds;
  meta["budget_stopped"] = chain.budget_stopped;
  meta["mean_grad_norm"] = chain.mean_grad_norm;
  meta["mean_acceptance"] = chain.mean_acceptance;
  meta["acceptance_warnings"] = chain.acceptance_warnings;
  meta["names"] = chain.names;
  meta["sampler"] = "sgld";
  meta["corrected"] = samples != nullptr;
  if (!extra_metadata_json.empty()) meta.update(json::parse(extra_metadata_json));
  std::ofstream out(path + ".json");
  if (!out) throw ConfigError("cannot write " + path + ".json");
  out << meta.dump(2) << '\n';
}

MatrixXd read_chain_csv(const std::string& path, std::vector<std::string>* names, std::vector<Index>* iterations) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("iter,block,coord,value", 0) != 0) throw ConfigError(path + ": unexpected chain header");
  std::vector<std::string> order;
  std::map<std::string, Index> index;
  std::vector<Index> iters;
  std::vector<std::vector<double>> cols;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string it, block, coord, value;
    std::getline(ss, it, ',');
    std::getline(ss, block, ',');
    std::getline(ss, coord, ',');
    std::getline(ss, value, ',');
    const Index iter = std::stoll(it);
    const bool known = index.count(coord) > 0;
    if (cols.empty() || (known && cols.back().size() == order.size())) {
      cols.emplace_back();
      iters.push_back(iter);
    }
    if (!known) {
      if (cols.size() > 1) throw ConfigError(path + ": coordinate " + coord + " appears late");
      index[coord] = static_cast<Index>(order.size());
      order.push_back(coord);
    } else if (order[cols.back().size()] != coord) {
      throw ConfigError(path + ": coordinates out of order near iteration " + it);
    }
    cols.back().push_back(std::stod(value));
  }
  if (!cols.empty() && cols.back().size() != order.size()) throw ConfigError(path + ": truncated chain");
  MatrixXd m(static_cast<Index>(order.size()), static_cast<Index>(cols.size()));
  for (size_t c = 0; c < cols.size(); ++c)
    for (size_t j = 0; j < order.size(); ++j) m(static_cast<Index>(j), static_cast<Index>(c)) = cols[c][j];
  if (names) *names = order;
  if (iterations) *iterations = iters;
  return m;
}

std::string config_to_json(const SgldConfig& c) { return config_json(c).dump(); }

SgldConfig config_from_json(const std::string& text) { return config_of(json::parse(text)); }

}  // namespace glmm
