// Copyright 2026 The dgbs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// dgbs: batch front end. Every command reads one JSON run configuration and
// writes CSV/JSON artifacts tagged with the configuration hash.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "dgbs/experiment.hpp"
#include "dgbs/fock.hpp"
#include "dgbs/metrics.hpp"
#include "dgbs/parallel.hpp"
#include "dgbs/reconstruction.hpp"

namespace dgbs::cli {
namespace {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kDomainError = 1, kUsageError = 2 };

/// Non-finite values become strings so the JSON stays valid.
Json number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

Json vector_to_json(const VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

Json vector_to_json(const Eigen::VectorXi& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

std::string file_safe(std::string name) {
  for (char& ch : name)
    if (ch == ':') ch = '_';
  return name;
}

/// Collision-free pattern as a hex bitmask, bit j = mode j, most significant
/// nibble first.
std::string hex_mask(const DetectionPattern& n) {
  static const char* digits = "0123456789abcdef";
  const Index nibbles = std::max<Index>(1, (n.modes() + 3) / 4);
  std::string out(static_cast<std::size_t>(nibbles), '0');
  for (Index j = 0; j < n.modes(); ++j)
    if (n[j] > 0) {
      auto& ch = out[static_cast<std::size_t>(nibbles - 1 - j / 4)];
      const int v = static_cast<int>(std::string_view(digits).find(ch)) | (1 << (j % 4));
      ch = digits[v];
    }
  return out;
}

class Output {
 public:
  Output(fs::path dir, std::string hash) : dir_(std::move(dir)), hash_(std::move(hash)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  /// Opens a CSV file whose first line carries the config hash.
  std::ofstream csv(const std::string& name) const {
    std::ofstream out = open(name);
    out << "# config_hash=" << hash_ << '\n';
    return out;
  }

  void json(const std::string& name, Json j) const {
    j["config_hash"] = hash_;
    std::ofstream out = open(name);
    out << j.dump(2) << '\n';
  }

 private:
  std::ofstream open(const std::string& name) const {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir_ / name).string());
    return out;
  }

  fs::path dir_;
  std::string hash_;
};

struct Context {
  RunConfig cfg;
  Output out;

  Section root() const { return cfg.root(); }
  Scenario scenario() const {
    if (!root().has("scenario")) throw SchemaError("/scenario", "required value is missing");
    return scenario_from(root().child("scenario"), cfg.base_dir);
  }
};

std::vector<ModelSpec> models_from(const Section& root, std::vector<ModelSpec> fallback) {
  if (!root.has("models")) return fallback;
  const Json& m = root.raw("models");
  if (!m.is_array() || m.empty()) throw SchemaError("/models", "expected a non-empty array of model names");
  std::vector<ModelSpec> out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::string p = "/models/" + std::to_string(i);
    if (!m[i].is_string()) throw SchemaError(p, "expected a model name");
    out.push_back(parse_model(m[i].get<std::string>(), p));
  }
  return out;
}

ModelSpec model_at(const Section& s, const std::string& key, const ModelSpec& fallback) {
  return s.has(key) ? parse_model(s.string(key, ""), s.path(key)) : fallback;
}

int int_in(const Section& s, const std::string& key, long long fallback, long long lo, long long hi) {
  const long long v = s.integer(key, fallback);
  if (v < lo || v > hi)
    throw SchemaError(s.path(key), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(v);
}

double positive(const Section& s, const std::string& key, double fallback) {
  const double v = s.number(key, fallback);
  if (!(v > 0.0)) throw SchemaError(s.path(key), "must be > 0");
  return v;
}

// --- probs ---------------------------------------------------------------------

int cmd_probs(const Context& ctx) {
  const Section s = ctx.root().child("probs");
  s.allow({"n_min", "n_max", "collision_free"});
  const int n_max = int_in(s, "n_max", 4, 0, 64);
  const int n_min = int_in(s, "n_min", n_max, 0, n_max);
  const bool cf = s.boolean("collision_free", true);
  const Scenario sc = ctx.scenario();
  const auto models = models_from(ctx.root(), {ModelSpec::full(), ModelSpec::classical()});

  std::vector<std::vector<PatternDistribution>> dists(models.size());
  Json summary = Json::array();
  for (std::size_t m = 0; m < models.size(); ++m) {
    std::ofstream csv = ctx.out.csv("probs_" + file_safe(models[m].to_string()) + ".csv");
    csv << "photons,pattern,probability,unnormalized\n";
    for (int n = n_min; n <= n_max; ++n) {
      PatternDistribution d = enumerate_distribution(sc, n, cf, models[m]);
      for (std::size_t i = 0; i < d.size(); ++i)
        csv << n << ',' << d.patterns[i].to_string() << ',' << format_double(d.probabilities[i]) << ','
            << format_double(d.probabilities[i] * d.unnormalized_sum) << '\n';
      summary.push_back({{"model", d.model},
                         {"photons", n},
                         {"patterns", d.size()},
                         {"total_probability", number(d.unnormalized_sum)},
                         {"clamped", d.clamped}});
      dists[m].push_back(std::move(d));
    }
  }

  std::ofstream csv = ctx.out.csv("tvd.csv");
  csv << "model_a,model_b,photons,tvd\n";
  for (std::size_t a = 0; a < models.size(); ++a)
    for (std::size_t b = a; b < models.size(); ++b)
      for (int n = n_min; n <= n_max; ++n) {
        const auto& pa = dists[a][static_cast<std::size_t>(n - n_min)];
        const auto& pb = dists[b][static_cast<std::size_t>(n - n_min)];
        csv << pa.model << ',' << pb.model << ',' << n << ',' << format_double(tvd(pa, pb)) << '\n';
      }
  ctx.out.json("probs.json", {{"command", "probs"}, {"distributions", summary}});
  return kOk;
}

// --- lock ----------------------------------------------------------------------

DriftModel drift_from(const Section& s) {
  s.allow({"walk_sigma", "amplitude", "period", "step"});
  DriftModel d;
  d.walk_sigma = s.number("walk_sigma", d.walk_sigma);
  d.amplitude = s.number("amplitude", d.amplitude);
  d.period = s.number("period", d.period);
  d.step = s.number("step", d.step);
  try {
    d.validate();
  } catch (const ConfigError& e) {
    throw SchemaError(s.pointer(), e.what());
  }
  return d;
}

PidConfig pid_from(const Section& s) {
  s.allow({"kp", "ki", "kd", "setpoint", "update_interval", "limit"});
  PidConfig p;
  p.kp = s.number("kp", p.kp);
  p.ki = s.number("ki", p.ki);
  p.kd = s.number("kd", p.kd);
  p.setpoint = s.number("setpoint", p.setpoint);
  p.update_interval = s.number("update_interval", p.update_interval);
  p.limit = s.number("limit", p.limit);
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw SchemaError(s.pointer(), e.what());
  }
  return p;
}

struct LockRun {
  PidConfig pid;
  std::vector<LockPair> pairs;
  double slope = 0.0;
  LockTrace closed;
  LockTrace open;
};

LockRun run_lock(const Context& ctx, const Scenario& sc) {
  const Section s = ctx.root().child("lock");
  s.allow({"duration", "initial_phase", "pairs", "tune", "tune_duration", "drift", "pid"});
  const double duration = positive(s, "duration", 60.0);
  const DriftModel drift = drift_from(s.child("drift"));
  LockRun run;
  run.pid = pid_from(s.child("pid"));
  const double initial = s.number("initial_phase", run.pid.setpoint);
  const int pair_count = int_in(s, "pairs", 6, 1, 1000);

  const ProbabilityEngine engine(sc.output_state());
  run.pairs = choose_lock_pairs(engine, run.pid.setpoint, static_cast<std::size_t>(pair_count));
  const ErrorSignal signal(engine, run.pairs);
  // Zero of the error signal sits at the setpoint.
  const double offset = signal.value(run.pid.setpoint);
  const auto error = [&](double phi) { return signal.value(phi) - offset; };
  run.slope = signal.slope(run.pid.setpoint);
  if (!(std::abs(run.slope) > 0.0)) throw Error("error signal is flat at the setpoint");

  const std::uint64_t seed = ctx.cfg.seed();
  if (s.boolean("tune", true))
    run.pid = tune_pid(drift, run.pid, error, run.slope, positive(s, "tune_duration", 30.0), splitmix64(seed));
  run.closed = pid_lock(drift, run.pid, error, duration, seed, initial);
  run.open = pid_lock(drift, run.pid, error, duration, seed, initial, false);
  return run;
}

int cmd_lock(const Context& ctx) {
  const LockRun run = run_lock(ctx, ctx.scenario());
  std::ofstream csv = ctx.out.csv("lock.csv");
  csv << "time,phi,drift,control,phi_open\n";
  for (std::size_t i = 0; i < run.closed.time.size(); ++i)
    csv << format_double(run.closed.time[i]) << ',' << format_double(run.closed.phi[i]) << ','
        << format_double(run.closed.drift[i]) << ',' << format_double(run.closed.control[i]) << ','
        << format_double(run.open.phi[i]) << '\n';

  Json pairs = Json::array();
  for (const auto& p : run.pairs) pairs.push_back({{"j", p.j}, {"k", p.k}, {"sign", p.sign}});
  const auto& t = run.closed;
  ctx.out.json("lock.json",
                {{"command", "lock"},
                 {"pid", {{"kp", run.pid.kp}, {"ki", run.pid.ki}, {"kd", run.pid.kd},
                          {"setpoint", run.pid.setpoint}, {"update_interval", run.pid.update_interval}}},
                 {"pairs", pairs},
                 {"error_slope", run.slope},
                 {"locked", {{"residual_std", number(t.residual_std)}, {"residual_max", number(t.residual_max)},
                             {"range", number(t.range)}, {"locked", t.locked}, {"saturated", t.saturated},
                             {"diverged", t.diverged}}},
                 {"open_loop", {{"range", number(run.open.range)}, {"residual_std", number(run.open.residual_std)}}}});
  if (t.diverged) {
    std::cerr << "dgbs: lock diverged with the configured gains\n";
    return kDomainError;
  }
  return kOk;
}

// --- simulate ------------------------------------------------------------------

ScanSpec scan_from(const Section& s, ScanSpec spec) {
  spec.windows = int_in(s, "windows", spec.windows, 1, 1000);
  spec.points_per_window = int_in(s, "points_per_window", spec.points_per_window, 1, 100000);
  spec.pulses = positive(s, "pulses", spec.pulses);
  spec.max_order = int_in(s, "max_order", spec.max_order, 1, 16);
  spec.collisions = s.boolean("collisions", spec.collisions);
  spec.noise = s.boolean("noise", spec.noise);
  return spec;
}

Index second_port_from(const Section& s, const Scenario& sc) {
  if (!s.has("second_port")) return -1;
  const long long p = s.integer("second_port", -1);
  if (p < 0 || p >= sc.modes()) throw SchemaError(s.path("second_port"), "port out of range");
  return static_cast<Index>(p);
}

const std::initializer_list<const char*> kSimulateKeys = {
    "mode", "pulses", "n_max", "model", "phi", "windows", "points_per_window", "max_order", "collisions",
    "noise", "second_port", "pulses_per_update"};

std::vector<MeasurementRecord> simulate_records(const Context& ctx, const Scenario& sc) {
  const Section s = ctx.root().child("simulate");
  s.allow(kSimulateKeys);
  return simulate_experiment(sc, second_port_from(s, sc), scan_from(s, {}), ctx.cfg.seed());
}

void write_clicks(const Context& ctx, const SampleRun& run, const std::string& mode) {
  std::ofstream csv = ctx.out.csv("clicks.csv");
  csv << "pulse,pattern,phi\n";
  std::vector<std::uint64_t> by_n;
  for (const auto& c : run.clicks) {
    csv << c.pulse << ',' << hex_mask(c.pattern) << ',' << format_double(c.phi) << '\n';
    const auto n = static_cast<std::size_t>(c.pattern.total());
    if (by_n.size() <= n) by_n.resize(n + 1, 0);
    ++by_n[n];
  }
  if (by_n.empty()) by_n.resize(1, 0);
  by_n[0] = run.vacuum;
  ctx.out.json("simulate.json", {{"command", "simulate"},
                                 {"mode", mode},
                                 {"pulses", run.pulses},
                                 {"vacuum", run.vacuum},
                                 {"discarded", run.discarded},
                                 {"clicks", run.clicks.size()},
                                 {"counts_by_photons", by_n}});
}

int cmd_simulate(const Context& ctx) {
  const Section s = ctx.root().child("simulate");
  s.allow(kSimulateKeys);
  const Scenario sc = ctx.scenario();
  const std::string mode = s.string("mode", "records");
  const std::uint64_t seed = ctx.cfg.seed();

  if (mode == "records") {
    const auto records = simulate_records(ctx, sc);
    std::ofstream csv = ctx.out.csv("records.csv");
    write_records_csv(csv, records);
    Json settings = Json::array();
    for (const auto& r : records)
      settings.push_back({{"setting", to_string(r.setting)}, {"points", r.points.size()},
                          {"pulses", r.total_pulses()}});
    ctx.out.json("simulate.json", {{"command", "simulate"}, {"mode", mode}, {"modes", sc.modes()},
                                   {"settings", settings}});
    return kOk;
  }

  const ModelSpec model = model_at(s, "model", ModelSpec::full());
  const int n_max = int_in(s, "n_max", 4, 0, 16);
  const ProbabilityEngine engine(sc.output_state(model));
  if (mode == "clicks") {
    const double pulses = positive(s, "pulses", 1e6);
    const SampleRun run = sample_patterns(engine, model, static_cast<std::uint64_t>(pulses), n_max, seed,
                                          s.number("phi", 0.0));
    write_clicks(ctx, run, mode);
    return kOk;
  }
  if (mode == "locked") {
    const LockRun lock = run_lock(ctx, sc);
    const double per_update = positive(s, "pulses_per_update", 1e5);
    const SampleRun run = sample_locked(engine, model, lock.closed, lock.pid.update_interval,
                                        static_cast<std::uint64_t>(per_update), n_max, splitmix64(seed + 1));
    write_clicks(ctx, run, mode);
    return kOk;
  }
  throw SchemaError(s.path("mode"), "expected \"records\", \"clicks\" or \"locked\"");
}

// --- reconstruct -----------------------------------------------------------------

Json truth_comparison(const ReconstructionResult& r, const Scenario& sc) {
  const GaussianState state = sc.output_state();
  AMatrix a = a_matrix(state);
  GammaVector g = gamma_vector(state);
  gauge_fix(a, g);
  const double err_b = (r.a.b() - a.b()).cwiseAbs().maxCoeff();
  const double err_c = (r.a.c() - a.c()).cwiseAbs().maxCoeff();
  const double err_g = (r.gamma.cast<Complex>() - VectorXc(g.head())).cwiseAbs().maxCoeff();
  Json j = {{"max_abs_error_b", err_b}, {"max_abs_error_c", err_c}, {"max_abs_error_gamma", err_g}};
  const ProbabilityEngine rebuilt(r.a, r.gamma_vector());
  const ProbabilityEngine truth(state);
  for (int n : {3, 4}) {
    if (n > sc.modes()) break;
    try {
      const double d = tvd(enumerate_distribution(rebuilt, n, true, ModelSpec::full()),
                           enumerate_distribution(truth, n, true, ModelSpec::full()));
      j["tvd_" + std::to_string(n) + "fold"] = d;
    } catch (const NumericalError& e) {
      j["tvd_" + std::to_string(n) + "fold"] = std::string("unavailable: ") + e.what();
    }
  }
  return j;
}

int cmd_reconstruct(const Context& ctx) {
  const Section s = ctx.root().child("reconstruct");
  s.allow({"records", "modes", "weighted", "windows", "level_scaled_ranking", "gamma_tolerance",
           "degeneracy_tolerance", "optimize", "optimizer", "truth"});
  ReconstructionOptions opt;
  opt.weighted = s.boolean("weighted", opt.weighted);
  opt.windows = int_in(s, "windows", opt.windows, 1, 1000);
  opt.level_scaled_ranking = s.boolean("level_scaled_ranking", opt.level_scaled_ranking);
  opt.gamma_tolerance = s.number("gamma_tolerance", opt.gamma_tolerance);
  opt.degeneracy_tolerance = s.number("degeneracy_tolerance", opt.degeneracy_tolerance);
  opt.optimize = s.boolean("optimize", opt.optimize);
  const Section o = s.child("optimizer");
  o.allow({"restarts", "initial_step", "final_step", "restart_sigma", "max_evaluations"});
  opt.optimizer.restarts = int_in(o, "restarts", opt.optimizer.restarts, 1, 10000);
  opt.optimizer.initial_step = positive(o, "initial_step", opt.optimizer.initial_step);
  opt.optimizer.final_step = positive(o, "final_step", opt.optimizer.final_step);
  opt.optimizer.restart_sigma = o.number("restart_sigma", opt.optimizer.restart_sigma);
  opt.optimizer.max_evaluations = int_in(o, "max_evaluations", opt.optimizer.max_evaluations, 1, 100000000);
  opt.optimizer.seed = ctx.cfg.seed();

  const bool has_scenario = ctx.root().has("scenario");
  std::optional<Scenario> sc;
  if (has_scenario) sc = ctx.scenario();
  std::vector<MeasurementRecord> records;
  if (s.has("records")) {
    fs::path file = s.string("records", "");
    if (file.is_relative()) file = ctx.cfg.base_dir / file;
    std::ifstream in(file);
    if (!in) throw SchemaError(s.path("records"), "cannot open " + file.string());
    Index modes = 0;
    if (s.has("modes")) modes = int_in(s, "modes", 0, 1, 64);
    else if (sc) modes = sc->modes();
    else throw SchemaError(s.path("modes"), "needed when no scenario is given");
    records = read_records_csv(in, modes);
  } else {
    if (!sc) throw SchemaError(s.path("records"), "give a records file or a scenario to simulate");
    records = simulate_records(ctx, *sc);
  }

  const ReconstructionResult r = reconstruct(records, opt);
  Json params = Json::array();
  for (const auto& p : r.optimization.parameters)
    params.push_back({{"j", p.j}, {"k", p.k}, {"block", p.is_b ? "B" : "C"}, {"start", p.start},
                      {"value", p.value}, {"spread", p.spread}, {"has_estimate", p.has_estimate}});
  Json j = {{"command", "reconstruct"},
            {"modes", r.modes()},
            {"physical", r.physical},
            {"B", matrix_to_json(r.a.b())},
            {"C", matrix_to_json(r.a.c())},
            {"gamma", vector_to_json(r.gamma)},
            {"flags", {{"B", int_matrix_to_json(r.flags_b)}, {"C", int_matrix_to_json(r.flags_c)},
                       {"gamma", vector_to_json(r.flags_gamma)}}},
            {"sigma", {{"B_abs", real_matrix_to_json(r.sigma_b_abs)}, {"B_arg", real_matrix_to_json(r.sigma_b_arg)},
                       {"C_re", real_matrix_to_json(r.sigma_c_re)}, {"C_im", real_matrix_to_json(r.sigma_c_im)},
                       {"C_diag", vector_to_json(r.sigma_c_diag)}, {"gamma", vector_to_json(r.sigma_gamma)}}},
            {"optimization", {{"parameters", params},
                              {"objective_before", number(r.optimization.objective_before)},
                              {"objective_after", number(r.optimization.objective_after)},
                              {"evaluations", r.optimization.evaluations},
                              {"converged", r.optimization.converged}}},
            {"notes", r.notes}};
  if (r.mu.size() > 0) {
    j["mu"] = matrix_to_json(r.mu);
    j["mu_reference"] = r.mu_reference;
    j["flags"]["mu"] = vector_to_json(r.flags_mu);
  }
  if (s.boolean("truth", has_scenario)) {
    if (!sc) throw SchemaError(s.path("truth"), "needs a scenario");
    j["truth"] = truth_comparison(r, *sc);
  }
  ctx.out.json("reconstruction.json", j);
  if (!r.physical) {
    std::cerr << "dgbs: reconstructed kernel does not describe a physical state\n";
    return kDomainError;
  }
  return kOk;
}

// --- compare -------------------------------------------------------------------

int cmd_compare(const Context& ctx) {
  const Section s = ctx.root().child("compare");
  s.allow({"model_a", "model_b", "sample_model", "samples", "n_min", "n_max", "normalization"});
  const ModelSpec a = model_at(s, "model_a", ModelSpec::korder(4));
  const ModelSpec b = model_at(s, "model_b", ModelSpec::full());
  const ModelSpec source = model_at(s, "sample_model", ModelSpec::full());
  const int count = int_in(s, "samples", 500, 1, 100000000);
  const int n_max = int_in(s, "n_max", 6, 1, 16);
  const int n_min = int_in(s, "n_min", std::min(4, n_max), 0, n_max);
  const std::string norm_name = s.string("normalization", "fixed_n");
  LikelihoodNormalization norm;
  if (norm_name == "fixed_n") norm = LikelihoodNormalization::kFixedN;
  else if (norm_name == "raw") norm = LikelihoodNormalization::kRaw;
  else throw SchemaError(s.path("normalization"), "expected \"fixed_n\" or \"raw\"");

  const Scenario sc = ctx.scenario();
  const ProbabilityEngine engine(sc.output_state(source));
  const auto samples =
      sample_conditional(engine, source, static_cast<std::size_t>(count), n_min, n_max, ctx.cfg.seed());
  const LikelihoodTrace trace = likelihood_ratio(samples, a, b, sc, norm);

  std::ofstream csv = ctx.out.csv("likelihood.csv");
  csv << "sample,pattern,photons,increment,cumulative_log\n";
  for (std::size_t i = 0; i < samples.size(); ++i)
    csv << i << ',' << samples[i].to_string() << ',' << samples[i].total() << ','
        << format_double(trace.increments[i]) << ',' << format_double(trace.cumulative_log[i]) << '\n';
  ctx.out.json("compare.json", {{"command", "compare"},
                                {"model_a", a.to_string()},
                                {"model_b", b.to_string()},
                                {"sample_model", source.to_string()},
                                {"normalization", norm_name},
                                {"samples", trace.samples},
                                {"log_l", number(trace.log_l)},
                                {"l", number(trace.l())},
                                {"flagged", trace.flagged}});
  return kOk;
}

// --- oracle --------------------------------------------------------------------

int cmd_oracle(const Context& ctx) {
  const Section s = ctx.root().child("oracle");
  s.allow({"max_photons", "cutoff", "epsilon", "tolerance", "collision_free"});
  const int max_photons = int_in(s, "max_photons", 3, 0, 16);
  const int cutoff = int_in(s, "cutoff", 0, 0, 64);
  const double epsilon = positive(s, "epsilon", 1e-9);
  const double tolerance = positive(s, "tolerance", 1e-6);
  const bool cf = s.boolean("collision_free", false);
  const Scenario sc = ctx.scenario();

  const FockOracle oracle(sc.source, sc.transfer, max_photons, cutoff, epsilon);
  const ProbabilityEngine engine(sc.output_state());
  std::ofstream csv = ctx.out.csv("oracle.csv");
  csv << "pattern,photons,engine,oracle,abs_diff\n";
  double worst = 0.0;
  std::size_t patterns = 0;
  for (int n = 0; n <= max_photons; ++n)
    for (const auto& p : enumerate_patterns(sc.modes(), n, cf)) {
      const double e = engine.probability(p, ModelSpec::full()), f = oracle.probability(p);
      const double diff = std::abs(e - f);
      worst = std::max(worst, diff);
      ++patterns;
      csv << p.to_string() << ',' << n << ',' << format_double(e) << ',' << format_double(f) << ','
          << format_double(diff) << '\n';
    }
  const bool pass = worst <= tolerance;
  ctx.out.json("oracle.json", {{"command", "oracle"},
                               {"patterns", patterns},
                               {"max_abs_diff", worst},
                               {"tolerance", tolerance},
                               {"cutoff", oracle.cutoff()},
                               {"truncation_loss", oracle.truncation_loss()},
                               {"pass", pass}});
  if (!pass) {
    std::cerr << "dgbs: engine and oracle differ by " << format_double(worst) << '\n';
    return kDomainError;
  }
  return kOk;
}

// --- driver --------------------------------------------------------------------

struct Flags {
  std::string config;
  std::optional<long long> seed;
  std::string out;
  std::vector<std::string> models;
  std::optional<int> k;
  std::optional<int> n_max;
};

/// Folds command-line overrides into the document so the hash covers them.
void apply_overrides(RunConfig& cfg, const std::string& command, const Flags& f) {
  Json& doc = cfg.doc;
  if (f.seed) doc["seed"] = *f.seed;
  if (command == "probs") {
    if (!f.models.empty() || f.k) {
      Json list = f.models.empty() ? (doc.contains("models") ? doc["models"] : Json::array({"full", "classical"}))
                                   : Json(f.models);
      if (f.k) list.push_back("korder:" + std::to_string(*f.k));
      doc["models"] = list;
    }
    if (f.n_max) doc["probs"]["n_max"] = *f.n_max;
  } else if (command == "simulate") {
    if (f.models.size() > 1) throw SchemaError("/simulate/model", "--model may be given once");
    if (!f.models.empty()) doc["simulate"]["model"] = f.models.front();
    if (f.k) doc["simulate"]["model"] = "korder:" + std::to_string(*f.k);
    if (f.n_max) doc["simulate"]["n_max"] = *f.n_max;
  } else if (command == "compare") {
    if (f.models.size() > 1) throw SchemaError("/compare/model_a", "--model may be given once");
    if (!f.models.empty()) doc["compare"]["model_a"] = f.models.front();
    if (f.k) doc["compare"]["model_a"] = "korder:" + std::to_string(*f.k);
    if (f.n_max) doc["compare"]["n_max"] = *f.n_max;
  } else if (command == "oracle") {
    if (f.n_max) doc["oracle"]["max_photons"] = *f.n_max;
  }
}

void check_workers() {
  const char* env = std::getenv("DGBS_WORKERS");
  if (env == nullptr) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*env == '\0' || *end != '\0' || n < 1 || n > 1024)
    throw SchemaError("$DGBS_WORKERS", "expected an integer in [1, 1024]");
}

int run(int argc, char** argv) {
  CLI::App app{"Displaced Gaussian boson sampling: probabilities, simulation, reconstruction and validation."};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "override the configuration seed")->check(CLI::NonNegativeNumber);
  app.add_option("--out", f.out, "output directory (default: the configuration's \"output\" or .)");
  app.footer("Environment: DGBS_WORKERS sets the worker thread count (default 1).\n"
             "Exit codes: 0 ok, 1 domain error, 2 usage error.");

  const auto add_model_flags = [&](CLI::App* sub, bool many) {
    sub->add_option("--model", f.models, many ? "model (repeatable): full, korder:<k>, squeezer_only, classical"
                                              : "model: full, korder:<k>, squeezer_only, classical");
    sub->add_option("--k", f.k, "k-order model korder:<k>")->check(CLI::NonNegativeNumber);
  };
  CLI::App* probs = app.add_subcommand("probs", "exact N-fold distributions per model and pairwise TVD");
  add_model_flags(probs, true);
  probs->add_option("--n-max", f.n_max, "largest photon number")->check(CLI::NonNegativeNumber);
  CLI::App* simulate = app.add_subcommand("simulate", "synthetic measurement records or click streams");
  add_model_flags(simulate, false);
  simulate->add_option("--n-max", f.n_max, "largest sampled photon number")->check(CLI::NonNegativeNumber);
  app.add_subcommand("reconstruct", "recover B, C and gamma from measurement records");
  CLI::App* compare = app.add_subcommand("compare", "likelihood ratio of two models on sampled data");
  add_model_flags(compare, false);
  compare->add_option("--n-max", f.n_max, "largest sampled photon number")->check(CLI::NonNegativeNumber);
  app.add_subcommand("lock", "PID phase-lock simulation");
  CLI::App* oracle = app.add_subcommand("oracle", "engine against the truncated Fock-space oracle");
  oracle->add_option("--n-max", f.n_max, "largest photon number compared")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  check_workers();
  RunConfig cfg = load_config(f.config);
  apply_overrides(cfg, command, f);
  fs::path out_dir = ".";
  if (!f.out.empty()) {
    out_dir = f.out;
  } else if (cfg.root().has("output")) {
    out_dir = cfg.root().string("output", ".");
    if (out_dir.is_relative()) out_dir = cfg.base_dir / out_dir;
  }
  finalize(cfg);
  const Context ctx{cfg, Output(out_dir, cfg.hash)};

  if (command == "probs") return cmd_probs(ctx);
  if (command == "simulate") return cmd_simulate(ctx);
  if (command == "reconstruct") return cmd_reconstruct(ctx);
  if (command == "compare") return cmd_compare(ctx);
  if (command == "lock") return cmd_lock(ctx);
  return cmd_oracle(ctx);
}

}  // namespace
}  // namespace dgbs::cli

int main(int argc, char** argv) {
  using namespace dgbs;
  try {
    return cli::run(argc, argv);
  } catch (const cli::SchemaError& e) {
    std::cerr << "dgbs: configuration error at " << e.what() << '\n';
    return cli::kUsageError;
  } catch (const ConfigError& e) {
    std::cerr << "dgbs: invalid input: " << e.what() << '\n';
    return cli::kUsageError;
  } catch (const Error& e) {
    std::cerr << "dgbs: " << e.what() << '\n';
    return cli::kDomainError;
  } catch (const std::exception& e) {
    std::cerr << "dgbs: internal error: " << e.what() << '\n';
    return cli::kDomainError;
  }
}
