/*
 * Copyright 2026 The cmdp-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cmdp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "cmdp/instances.hpp"
#include "cmdp/markov.hpp"
#include "cmdp/model_io.hpp"

namespace cmdp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("experiment: " + what);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Reads the fields of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& doc, std::string name) : doc_(doc), name_(std::move(name)) {
    require(doc_.is_object(), "'" + name_ + "' must be an object");
  }

  template <typename T>
  void field(const char* key, T& out) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument("experiment: '" + name_ + "." + key + "' has the wrong type");
    }
  }

  template <typename T>
  void field(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    T value{};
    field(key, value);
    out = value;
  }

  Section sub(const char* key) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    return Section(it == doc_.end() ? empty() : *it, name_ + "." + key);
  }

  void finish() const {
    for (const auto& item : doc_.items())
      require(seen_.count(item.key()) > 0, "unknown key '" + name_ + "." + item.key() + "'");
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }

  const json& doc_;
  std::string name_;
  std::set<std::string> seen_;
};

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

double finite_or_nan(const json& v) { return v.is_null() ? kNaN : v.get<double>(); }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

Vector read_mu(const std::string& path) {
  const json doc = read_json_file(path);
  return vector_from_json(doc.is_object() ? doc.at("mu") : doc);
}

}  // namespace

void ExperimentConfig::validate() const {
  static const std::set<std::string> kinds{"random", "hard", "slater", "file"};
  require(kinds.count(instance.kind) > 0, "instance.kind must be random, hard, slater or file");
  if (instance.kind == "file") {
    require(!instance.path.empty(), "instance.path is required for kind 'file'");
    require(fs::exists(instance.path), "model file '" + instance.path + "' does not exist");
  } else {
    require(instance.states >= 1 && instance.actions >= 1 && instance.constraints >= 0,
            "instance dimensions must be positive");
    require(instance.gamma > 0.0 && instance.gamma < 1.0, "instance.gamma must lie in (0, 1)");
  }
  require(instance.mix >= 0.0 && instance.mix <= 1.0, "instance.mix must lie in [0, 1]");
  require(instance.mu_path.empty() || fs::exists(instance.mu_path),
          "reference file '" + instance.mu_path + "' does not exist");

  require(dataset.path.empty() || fs::exists(dataset.path), "dataset file '" + dataset.path + "' does not exist");
  require(!dataset.n || *dataset.n >= 1, "dataset.n must be positive");
  require(dataset.burn_in >= 0, "dataset.burn_in must be >= 0");
  require(dataset.behavior == "uniform" || fs::exists(dataset.behavior),
          "behavior policy '" + dataset.behavior + "' is neither 'uniform' nor an existing file");

  require(solver.mode == "fixed" || solver.mode == "adaptive", "solver.mode must be fixed or adaptive");
  require(solver.epsilon > 0.0, "solver.epsilon must be positive");
  require(solver.delta > 0.0 && solver.delta < 1.0, "solver.delta must lie in (0, 1)");
  require(!solver.psi || *solver.psi >= 1.0, "solver.psi must be >= 1");
  require(!solver.phi || *solver.phi > 0.0, "solver.phi must be positive");
  require(!solver.T || *solver.T >= 0, "solver.T must be >= 0");
  require(!solver.N_e || *solver.N_e >= 1, "solver.N_e must be positive");
  require(!solver.N_v || *solver.N_v >= 1, "solver.N_v must be positive");
  require(!solver.varsigma || (*solver.varsigma > 0.0 && *solver.varsigma <= 1.0),
          "solver.varsigma must lie in (0, 1]");
  require(solver.budget > 0.0, "solver.budget must be positive");
  require(solver.psi_init >= 1.0, "solver.psi_init must be >= 1");
  require(solver.max_rounds >= 1, "solver.max_rounds must be positive");
  require(diagnostics.checkpoints >= 0, "diagnostics.checkpoints must be >= 0");
  require(!output_dir.empty(), "output_dir must not be empty");
}

json to_json(const ExperimentConfig& c) {
  const InstanceSpec& i = c.instance;
  const DatasetSpec& d = c.dataset;
  const SolverSpec& s = c.solver;
  return {{"instance",
           {{"kind", i.kind},
            {"path", i.path},
            {"mu_path", i.mu_path},
            {"states", i.states},
            {"actions", i.actions},
            {"constraints", i.constraints},
            {"gamma", i.gamma},
            {"slater_target", i.slater_target},
            {"mix", i.mix},
            {"C", i.C},
            {"varpi", i.varpi},
            {"theta", i.theta},
            {"seed", i.seed}}},
          {"dataset",
           {{"mode", to_string(d.mode)},
            {"path", d.path},
            {"n", opt_json(d.n)},
            {"seed", d.seed},
            {"behavior", d.behavior},
            {"burn_in", d.burn_in}}},
          {"solver",
           {{"mode", s.mode},
            {"epsilon", s.epsilon},
            {"delta", s.delta},
            {"psi", opt_json(s.psi)},
            {"phi", opt_json(s.phi)},
            {"T", opt_json(s.T)},
            {"N_e", opt_json(s.N_e)},
            {"N_v", opt_json(s.N_v)},
            {"varsigma", opt_json(s.varsigma)},
            {"budget", s.budget},
            {"seed", s.seed},
            {"psi_init", s.psi_init},
            {"max_rounds", s.max_rounds},
            {"exit_constant", s.exit_constant},
            {"thresholds", {{"flow", s.thresholds.flow}, {"utility", s.thresholds.utility}}}}},
          {"diagnostics", {{"checkpoints", c.diagnostics.checkpoints}, {"ground_truth", c.diagnostics.ground_truth}}},
          {"output_dir", c.output_dir}};
}

ExperimentConfig experiment_config_from_json(const json& doc) {
  ExperimentConfig c;
  Section root(doc, "config");
  {
    Section s = root.sub("instance");
    InstanceSpec& i = c.instance;
    s.field("kind", i.kind);
    s.field("path", i.path);
    s.field("mu_path", i.mu_path);
    s.field("states", i.states);
    s.field("actions", i.actions);
    s.field("constraints", i.constraints);
    s.field("gamma", i.gamma);
    s.field("slater_target", i.slater_target);
    s.field("mix", i.mix);
    s.field("C", i.C);
    s.field("varpi", i.varpi);
    s.field("theta", i.theta);
    s.field("seed", i.seed);
    s.finish();
  }
  {
    Section s = root.sub("dataset");
    DatasetSpec& d = c.dataset;
    std::string mode = to_string(d.mode);
    s.field("mode", mode);
    d.mode = dataset_mode_from_string(mode);
    s.field("path", d.path);
    s.field("n", d.n);
    s.field("seed", d.seed);
    s.field("behavior", d.behavior);
    s.field("burn_in", d.burn_in);
    s.finish();
  }
  {
    Section s = root.sub("solver");
    SolverSpec& v = c.solver;
    s.field("mode", v.mode);
    s.field("epsilon", v.epsilon);
    s.field("delta", v.delta);
    s.field("psi", v.psi);
    s.field("phi", v.phi);
    s.field("T", v.T);
    s.field("N_e", v.N_e);
    s.field("N_v", v.N_v);
    s.field("varsigma", v.varsigma);
    s.field("budget", v.budget);
    s.field("seed", v.seed);
    s.field("psi_init", v.psi_init);
    s.field("max_rounds", v.max_rounds);
    s.field("exit_constant", v.exit_constant);
    Section t = s.sub("thresholds");
    t.field("flow", v.thresholds.flow);
    t.field("utility", v.thresholds.utility);
    t.finish();
    s.finish();
  }
  {
    Section s = root.sub("diagnostics");
    s.field("checkpoints", c.diagnostics.checkpoints);
    s.field("ground_truth", c.diagnostics.ground_truth);
    s.finish();
  }
  root.field("output_dir", c.output_dir);
  root.finish();
  return c;
}

ResolvedInstance resolve_instance(const ExperimentConfig& config) {
  const InstanceSpec& spec = config.instance;
  std::optional<CmdpModel> model;
  Vector mu;
  if (spec.kind == "random") {
    model = random_cmdp(spec.states, spec.actions, spec.constraints, spec.gamma, spec.slater_target, spec.seed);
    const CmdpSolution sol = solve_cmdp(*model);
    require(sol.status == LpStatus::Optimal, "random instance has no safe policy");
    const int n = model->num_pairs();
    mu = spec.mix * (1.0 - spec.gamma) * sol.occupancy + Vector::Constant(n, (1.0 - spec.mix) / n);
    mu /= mu.sum();
  } else if (spec.kind == "hard") {
    HardInstance h = build_hard_cmdp(
        random_hard_params(spec.states, spec.actions, spec.constraints, spec.C, spec.gamma, spec.seed, spec.varpi));
    model = std::move(h.model);
    mu = std::move(h.mu);
  } else if (spec.kind == "slater") {
    const std::vector<int> theta = spec.theta.empty() ? std::vector<int>(spec.states, 1) : spec.theta;
    HardInstance h = build_slater_instance(spec.states, spec.actions, spec.C, spec.gamma, theta, spec.varpi);
    model = std::move(h.model);
    mu = std::move(h.mu);
  } else {
    model = load_model(spec.path);
  }
  if (!spec.mu_path.empty()) mu = read_mu(spec.mu_path);

  ResolvedInstance out{std::move(*model), Vector(), std::nullopt};
  if (config.dataset.mode == DatasetMode::Asynchronous) {
    out.behavior = config.dataset.behavior == "uniform"
                       ? Policy::uniform(out.model.num_states(), out.model.num_actions())
                       : policy_from_json(read_json_file(config.dataset.behavior));
    out.mu = stationary_distribution(out.model, *out.behavior);
  } else {
    out.mu = std::move(mu);
  }
  if (out.mu.size() > 0) check_pair_distribution(out.model, out.mu, "experiment");
  return out;
}

std::unique_ptr<TupleStream> open_stream(const ExperimentConfig& config, const ResolvedInstance& instance) {
  const DatasetSpec& d = config.dataset;
  if (!d.path.empty())
    return std::make_unique<DatasetStream>(std::make_shared<const OfflineDataset>(load_dataset(d.path)));
  const bool async = d.mode == DatasetMode::Asynchronous;
  require(async || instance.mu.size() > 0, "synchronous sampling needs a reference distribution (instance.mu_path)");
  if (d.n) {
    OfflineDataset data = async ? sample_async(instance.model, *instance.behavior, *d.n, d.seed, d.burn_in)
                                : sample_sync(instance.model, instance.mu, *d.n, d.seed);
    return std::make_unique<DatasetStream>(std::make_shared<const OfflineDataset>(std::move(data)));
  }
  if (async) return std::make_unique<AsyncSamplerStream>(instance.model, *instance.behavior, d.seed, d.burn_in);
  return std::make_unique<SyncSamplerStream>(instance.model, instance.mu, d.seed);
}

SaddleSpec saddle_spec(const Vector& mu, const Vector& mu_hat, double psi, double kappa, double phi) {
  require(mu.size() == mu_hat.size(), "mu and mu_hat differ in size");
  return SaddleSpec{mu_hat, mu.cwiseQuotient(mu_hat), psi, kappa, phi};
}

double duality_gap(const CmdpModel& model, const SaddleSpec& spec, const Vector& x_bar,
                   std::optional<double> restricted) {
  const double outer = restricted ? *restricted : restricted_value(model, spec).value;
  return outer - penalized_value(model, spec, x_bar);
}

Diagnostics diagnose(const CmdpModel& model, const Vector& mu, const Policy& policy, const Vector& x_bar,
                     const Vector& mu_hat, double psi, double kappa, double phi) {
  const CmdpSolution sol = solve_cmdp(model);
  require(sol.status == LpStatus::Optimal, "the model has no safe policy");
  const PolicyValue value = evaluate(model, policy);
  Diagnostics d;
  d.opt_reward = sol.value;
  d.policy_reward = value.reward;
  d.reward_gap = sol.value - value.reward;
  d.violation = violation(value);
  d.gap_estimate = duality_gap(model, saddle_spec(mu, mu_hat, psi, kappa, phi), x_bar);
  return d;
}

json to_json(const SolveReport& r) {
  json doc{{"policy", policy_to_json(r.policy)},
           {"x_bar", vector_to_json(r.x_bar)},
           {"mu_hat", vector_to_json(r.mu_hat)},
           {"psi", r.psi},
           {"phi", r.phi},
           {"kappa", r.kappa},
           {"eta", r.eta},
           {"opt_reward", number_or_null(r.opt_reward)},
           {"policy_reward", number_or_null(r.policy_reward)},
           {"reward_gap", number_or_null(r.reward_gap)},
           {"violation", number_or_null(r.violation)},
           {"gap_estimate", number_or_null(r.gap_estimate)},
           {"wall_ms", r.wall_ms},
           {"tuples_consumed", r.tuples_consumed},
           {"seed", r.seed},
           {"checkpoints", r.curve.size()},
           {"config", r.config}};
  if (r.adaptive) doc["adaptive"] = to_json(*r.adaptive);
  return doc;
}

DiagnoseOutcome diagnose_report(const CmdpModel& model, const Vector& mu, const json& report, double tolerance) {
  require(mu.size() > 0, "diagnostics need simulator ground truth: supply the true reference distribution mu");
  DiagnoseOutcome out;
  out.recomputed = diagnose(model, mu, policy_from_json(report.at("policy")), vector_from_json(report.at("x_bar")),
                            vector_from_json(report.at("mu_hat")), report.at("psi").get<double>(),
                            report.at("kappa").get<double>(), report.at("phi").get<double>());
  out.stored.opt_reward = finite_or_nan(report.at("opt_reward"));
  out.stored.policy_reward = finite_or_nan(report.at("policy_reward"));
  out.stored.reward_gap = finite_or_nan(report.at("reward_gap"));
  out.stored.violation = finite_or_nan(report.at("violation"));
  out.stored.gap_estimate = finite_or_nan(report.at("gap_estimate"));
  const auto compare = [&](const char* name, double a, double b) {
    if (!(std::abs(a - b) <= tolerance)) out.mismatches.emplace_back(name);
  };
  compare("opt_reward", out.recomputed.opt_reward, out.stored.opt_reward);
  compare("policy_reward", out.recomputed.policy_reward, out.stored.policy_reward);
  compare("reward_gap", out.recomputed.reward_gap, out.stored.reward_gap);
  compare("violation", out.recomputed.violation, out.stored.violation);
  compare("gap_estimate", out.recomputed.gap_estimate, out.stored.gap_estimate);
  return out;
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
  std::ofstream os(path);
  require(static_cast<bool>(os), "cannot write '" + path + "'");
  os << "t,gap_estimate,reward_gap,violation,eta,wall_ms\n" << std::setprecision(12);
  for (const CurvePoint& p : curve)
    os << p.t << ',' << p.gap_estimate << ',' << p.reward_gap << ',' << p.violation << ',' << p.eta << ','
       << p.wall_ms << '\n';
  require(static_cast<bool>(os), "write to '" + path + "' failed");
}

SolveReport run_experiment(const ExperimentConfig& config, bool write) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  const ResolvedInstance inst = resolve_instance(config);
  const CmdpModel& model = inst.model;
  const bool have_truth = config.diagnostics.ground_truth && inst.mu.size() > 0;
  std::optional<GroundTruth> truth;
  if (have_truth || !config.solver.psi || !config.solver.phi) {
    require(inst.mu.size() > 0, "solver.psi and solver.phi are required without a reference distribution");
    truth = ground_truth(model, inst.mu);
  }
  const SolverSpec& sv = config.solver;
  const double phi = sv.phi ? *sv.phi : truth->slater_margin;
  require(phi > 0.0, "the Slater margin is not positive; no conservative run is possible");
  const double psi_default = truth ? std::max(truth->concentrability, 1.0) : 1.0;
  require(sv.psi || std::isfinite(psi_default), "C* is infinite for this mu; set solver.psi");

  ExperimentConfig echo = config;
  echo.solver.phi = phi;
  if (sv.mode == "fixed") echo.solver.psi = sv.psi ? *sv.psi : psi_default;
  if (write) fs::create_directories(config.output_dir);

  const ProblemInfo info = ProblemInfo::of(model);
  std::unique_ptr<TupleStream> stream = open_stream(config, inst);
  SolveReport rep;
  rep.seed = sv.seed;
  rep.phi = phi;
  std::vector<DpdlCheckpoint> checkpoints;
  if (sv.mode == "fixed") {
    ScheduleOptions sched;
    sched.T = sv.T;
    sched.N_e = sv.N_e;
    sched.varsigma = sv.varsigma;
    sched.budget = sv.budget;
    sched.seed = sv.seed;
    const DpdlConfig cfg = default_schedule(sv.epsilon, sv.delta, *echo.solver.psi, phi, info, sched);
    DpdlResult res = run_dpdl(info, *stream, cfg, RunOptions{config.diagnostics.checkpoints});
    rep.policy = res.policy;
    rep.x_bar = res.x_bar;
    rep.mu_hat = res.reference.mu_hat;
    rep.psi = cfg.psi;
    rep.kappa = cfg.kappa;
    rep.eta = cfg.eta;
    checkpoints = std::move(res.checkpoints);
    rep.config = to_json(echo);
    rep.config["dpdl"] = to_json(cfg);
  } else {
    AdaptiveOptions ao;
    ao.psi_init = sv.psi_init;
    ao.max_rounds = sv.max_rounds;
    ao.exit_constant = sv.exit_constant;
    ao.thresholds = sv.thresholds;
    ao.T = sv.T;
    ao.N_e = sv.N_e;
    ao.N_v = sv.N_v;
    ao.varsigma = sv.varsigma;
    ao.budget = sv.budget;
    ao.seed = sv.seed;
    ao.run = RunOptions{config.diagnostics.checkpoints};
    try {
      rep.adaptive = adaptive_dpdl(info, *stream, sv.epsilon, sv.delta, phi, ao);
    } catch (const AdaptiveError& e) {
      if (write) write_json_file(to_json(e.trace()), (fs::path(config.output_dir) / "adaptive.json").string());
      throw;
    }
    AdaptiveRound& last = rep.adaptive->rounds.back();
    rep.policy = last.policy;
    rep.x_bar = last.x_bar;
    rep.mu_hat = last.mu_hat;
    rep.psi = last.psi;
    rep.kappa = last.config.kappa;
    rep.eta = last.config.eta;
    checkpoints = std::move(last.checkpoints);
    rep.config = to_json(echo);
  }
  rep.tuples_consumed = stream->consumed();

  rep.opt_reward = rep.policy_reward = rep.reward_gap = rep.violation = rep.gap_estimate = kNaN;
  std::optional<SaddleSpec> spec;
  std::optional<double> restricted;
  if (have_truth) {
    spec = saddle_spec(inst.mu, rep.mu_hat, rep.psi, rep.kappa, phi);
    restricted = restricted_value(model, *spec).value;
    const PolicyValue value = evaluate(model, rep.policy);
    rep.opt_reward = truth->opt_reward;
    rep.policy_reward = value.reward;
    rep.reward_gap = truth->opt_reward - value.reward;
    rep.violation = violation(value);
    rep.gap_estimate = duality_gap(model, *spec, rep.x_bar, restricted);
  }
  for (const DpdlCheckpoint& cp : checkpoints) {
    CurvePoint p{cp.t, kNaN, kNaN, kNaN, rep.eta, cp.wall_ms};
    if (have_truth) {
      const PolicyValue value = evaluate(model, policy_of_weights(cp.x_bar, model.num_states(), model.num_actions()));
      p.gap_estimate = duality_gap(model, *spec, cp.x_bar, restricted);
      p.reward_gap = truth->opt_reward - value.reward;
      p.violation = violation(value);
    }
    rep.curve.push_back(p);
  }
  rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  if (write) {
    const fs::path dir(config.output_dir);
    write_json_file(to_json(rep), (dir / "report.json").string());
    write_curve_csv(rep.curve, (dir / "checkpoints.csv").string());
    if (rep.adaptive) write_json_file(to_json(*rep.adaptive), (dir / "adaptive.json").string());
  }
  return rep;
}

int sweep_threads() {
  if (const char* env = std::getenv("CMDP_LAB_THREADS")) {
    const int n = std::atoi(env);
    require(n >= 1, "CMDP_LAB_THREADS must be a positive integer");
    return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<SolveReport> run_sweep(const ExperimentConfig& config, std::uint64_t first, std::uint64_t last,
                                   int threads) {
  require(first <= last, "empty seed range");
  require(threads >= 1, "thread count must be positive");
  const std::size_t count = static_cast<std::size_t>(last - first + 1);
  std::vector<std::optional<SolveReport>> reports(count);
  std::vector<std::string> errors(count);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      ExperimentConfig c = config;
      const std::uint64_t seed = first + i;
      c.solver.seed = seed;
      c.dataset.seed = seed;
      c.output_dir = (fs::path(config.output_dir) / ("seed_" + std::to_string(seed))).string();
      try {
        reports[i] = run_experiment(c, true);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  fs::create_directories(config.output_dir);
  const std::string path = (fs::path(config.output_dir) / "summary.csv").string();
  std::ofstream os(path);
  require(static_cast<bool>(os), "cannot write '" + path + "'");
  os << "seed,status,reward_gap,violation,gap_estimate,psi,wall_ms\n" << std::setprecision(12);
  std::vector<SolveReport> out;
  for (std::size_t i = 0; i < count; ++i) {
    os << first + i << ',';
    if (reports[i]) {
      const SolveReport& r = *reports[i];
      os << "ok," << r.reward_gap << ',' << r.violation << ',' << r.gap_estimate << ',' << r.psi << ',' << r.wall_ms
         << '\n';
      out.push_back(*reports[i]);
    } else {
      std::string msg = errors[i];
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      os << "error: " << msg << ",,,,,\n";
    }
  }
  return out;
}

}  // namespace cmdp
