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

#include "dgbs/experiment.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "dgbs/parallel.hpp"

namespace dgbs {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kChunk = 1ULL << 16;

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) { return splitmix64(seed + kGolden * (index + 1)); }

// Counter-based uniform stream.
struct UniformStream {
  std::uint64_t state;
  double next() { return to_unit(splitmix64(state++)); }
};

std::uint64_t as_count(double pulses) {
  if (!(pulses >= 0.0) || pulses > 9.0e18) throw ConfigError("pulse count out of range");
  return static_cast<std::uint64_t>(std::llround(pulses));
}

}  // namespace

// --- circuits and scenarios --------------------------------------------------

MatrixXc haar_unitary(Index d, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXc z(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) z(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<MatrixXc> qr(z);
  MatrixXc q = qr.householderQ();
  for (Index j = 0; j < d; ++j) {
    const Complex r = qr.matrixQR()(j, j);
    q.col(j) *= r / std::abs(r);
  }
  return q;
}

Scenario paper_scenario(const PaperScenarioParams& params) {
  if (!(params.eta > 0.0 && params.eta <= 1.0)) throw ConfigError("eta must lie in (0, 1]");
  if (!(params.n_alpha >= 0.0)) throw ConfigError("n_alpha must be >= 0");
  SourceConfig cfg;
  cfg.eta.coupling = params.eta;
  cfg.r = squeezing_from_detected(params.n_pdc, params.eta, params.rate);
  cfg.alpha_mag = std::sqrt(params.n_alpha);
  cfg.phi = params.phi;
  cfg.squeezer_ports = params.squeezer_ports;
  cfg.coherent_port = params.coherent_port;
  cfg.validate(params.modes);
  const MatrixXc t = std::sqrt(params.eta) * haar_unitary(params.modes, params.seed);
  return Scenario{cfg, TransferMatrix(t)};
}

Scenario with_coherent_port(const Scenario& scenario, Index port) {
  Scenario out = scenario;
  out.source.coherent_port = port;
  out.source.validate(scenario.modes());
  return out;
}

// --- sampling ------------------------------------------------------------------

SamplingTable SamplingTable::build(const ProbabilityEngine& engine, const ModelSpec& model, int n_max, int n_min,
                                   bool collision_free, std::size_t budget) {
  if (n_min < 0 || n_max < n_min) throw ConfigError("invalid photon-number range for sampling");
  SamplingTable table;
  table.modes = engine.modes();
  for (int n = n_min; n <= n_max; ++n) {
    auto batch = enumerate_patterns(engine.modes(), n, collision_free, budget);
    if (table.patterns.size() + batch.size() > budget) throw ResourceError("sampling table exceeds the pattern budget");
    table.patterns.insert(table.patterns.end(), batch.begin(), batch.end());
  }
  table.probabilities.resize(table.patterns.size());
  parallel_for(table.patterns.size(),
               [&](std::size_t i) { table.probabilities[i] = engine.probability(table.patterns[i], model); });
  table.cumulative.resize(table.patterns.size());
  CompensatedSum<double> sum;
  for (std::size_t i = 0; i < table.patterns.size(); ++i) {
    if (table.probabilities[i] < 0.0) {
      table.probabilities[i] = 0.0;
      ++table.clamped;
    }
    sum.add(table.probabilities[i]);
    table.cumulative[i] = sum.value();
  }
  table.covered = sum.value();
  if (table.covered > 1.0 + 1e-9) throw NumericalError("sampling table probabilities exceed 1");
  return table;
}

std::size_t SamplingTable::draw(double u) const {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return static_cast<std::size_t>(it - cumulative.begin());
}

SampleRun sample_patterns(const SamplingTable& table, std::uint64_t pulses, std::uint64_t seed, double phi,
                          std::uint64_t first_pulse) {
  const std::uint64_t chunks = (pulses + kChunk - 1) / kChunk;
  std::vector<SampleRun> parts(static_cast<std::size_t>(chunks));
  parallel_for(parts.size(), [&](std::size_t c) {
    UniformStream u{stream_seed(seed, c)};
    SampleRun& part = parts[c];
    const std::uint64_t begin = c * kChunk;
    const std::uint64_t end = std::min(pulses, begin + kChunk);
    for (std::uint64_t p = begin; p < end; ++p) {
      const std::size_t i = table.draw(u.next());
      if (i >= table.size()) {
        ++part.discarded;
      } else if (table.patterns[i].total() == 0) {
        ++part.vacuum;
      } else {
        part.clicks.push_back({first_pulse + p, table.patterns[i], phi});
      }
    }
  });
  SampleRun run;
  run.pulses = pulses;
  for (auto& part : parts) {
    run.vacuum += part.vacuum;
    run.discarded += part.discarded;
    run.clicks.insert(run.clicks.end(), part.clicks.begin(), part.clicks.end());
  }
  return run;
}

SampleRun sample_patterns(const ProbabilityEngine& engine, const ModelSpec& model, std::uint64_t pulses, int n_max,
                          std::uint64_t seed, double phi) {
  const ProbabilityEngine shifted = phi == 0.0 ? engine : engine.with_coherent_phase(phi);
  return sample_patterns(SamplingTable::build(shifted, model, n_max), pulses, seed, phi);
}

std::vector<double> sample_counts(const SamplingTable& table, double pulses, std::uint64_t seed) {
  std::mt19937_64 rng(stream_seed(seed, 0));
  std::vector<double> counts(table.size() + 1, 0.0);
  std::uint64_t left = as_count(pulses);
  double mass_left = 1.0;
  for (std::size_t i = 0; i < table.size() && left > 0; ++i) {
    const double q = mass_left > 0.0 ? std::clamp(table.probabilities[i] / mass_left, 0.0, 1.0) : 0.0;
    std::binomial_distribution<std::uint64_t> draw(left, q);
    const std::uint64_t x = q >= 1.0 ? left : draw(rng);
    counts[i] = static_cast<double>(x);
    left -= x;
    mass_left -= table.probabilities[i];
  }
  counts.back() = static_cast<double>(left);
  return counts;
}

std::vector<DetectionPattern> sample_conditional(const ProbabilityEngine& engine, const ModelSpec& model,
                                                 std::size_t count, int n_min, int n_max, std::uint64_t seed) {
  const SamplingTable table = SamplingTable::build(engine, model, n_max, n_min);
  if (!(table.covered > 0.0)) throw NumericalError("no probability mass in the requested photon-number range");
  std::vector<DetectionPattern> out;
  out.reserve(count);
  UniformStream u{stream_seed(seed, 0)};
  while (out.size() < count) {
    const std::size_t i = table.draw(u.next() * table.covered);
    if (i < table.size()) out.push_back(table.patterns[i]);
  }
  return out;
}

std::vector<double> nfold_rates(const ProbabilityEngine& engine, const ModelSpec& model, int n_max) {
  std::vector<double> rates;
  for (int n = 0; n <= n_max; ++n) rates.push_back(enumerate_distribution(engine, n, true, model).unnormalized_sum);
  return rates;
}

// --- synthetic measurement records -------------------------------------------

MeasurementRecord simulate_record(const ProbabilityEngine& engine, Setting setting, const ScanSpec& spec,
                                  std::uint64_t seed) {
  if (spec.windows < 1 || spec.points_per_window < 3) throw ConfigError("scan needs >= 1 window of >= 3 points");
  if (spec.max_order < 2) throw ConfigError("records need at least twofold outcomes");
  MeasurementRecord rec;
  rec.setting = setting;
  rec.modes = engine.modes();
  const bool scanned = setting != Setting::kBlocked;
  const int npoints = scanned ? spec.windows * spec.points_per_window : 1;
  rec.points.resize(static_cast<std::size_t>(npoints));
  const double per_point = spec.pulses / npoints;
  parallel_for(rec.points.size(), [&](std::size_t i) {
    RecordPoint& pt = rec.points[i];
    pt.phi = scanned ? 2.0 * kPi * static_cast<double>(i) / spec.points_per_window : 0.0;
    pt.pulses = per_point;
    const ProbabilityEngine shifted = scanned ? engine.with_coherent_phase(pt.phi) : engine;
    const SamplingTable table =
        SamplingTable::build(shifted, ModelSpec::full(), spec.max_order, 0, !spec.collisions);
    if (spec.noise) {
      const std::vector<double> counts = sample_counts(table, per_point, stream_seed(seed, i));
      for (std::size_t p = 0; p < table.size(); ++p)
        if (counts[p] > 0.0 || table.patterns[p].total() == 0) pt.counts.emplace(table.patterns[p], counts[p]);
    } else {
      for (std::size_t p = 0; p < table.size(); ++p) pt.counts.emplace(table.patterns[p], per_point * table.probabilities[p]);
    }
  });
  return rec;
}

std::vector<MeasurementRecord> simulate_experiment(const Scenario& scenario, Index second_port, const ScanSpec& spec,
                                                   std::uint64_t seed) {
  Scenario blocked = scenario;
  blocked.source.alpha_mag = 0.0;
  std::vector<MeasurementRecord> out;
  out.push_back(simulate_record(ProbabilityEngine(blocked.output_state()), Setting::kBlocked, spec, stream_seed(seed, 1)));
  out.push_back(simulate_record(ProbabilityEngine(scenario.output_state()), Setting::kInput1, spec, stream_seed(seed, 2)));
  if (second_port >= 0) {
    const Scenario second = with_coherent_port(scenario, second_port);
    out.push_back(simulate_record(ProbabilityEngine(second.output_state()), Setting::kInput2, spec, stream_seed(seed, 3)));
  }
  return out;
}

// --- transfer-matrix amplitudes ------------------------------------------------

MatrixXd transfer_from_singles(const MatrixXd& rates, double eta_tot) {
  if (!(eta_tot >= 0.0 && eta_tot <= 1.0)) throw ConfigError("eta_tot must lie in [0, 1]");
  if ((rates.array() < 0.0).any()) throw ConfigError("singles rates must be nonnegative");
  MatrixXd out(rates.rows(), rates.cols());
  for (Index i = 0; i < rates.rows(); ++i) {
    const double s = rates.row(i).sum();
    if (!(s > 0.0)) throw ConfigError("input " + std::to_string(i) + " has no singles counts");
    out.row(i) = eta_tot * rates.row(i) / s;
  }
  return out;
}

MatrixXd simulate_singles_probe(const TransferMatrix& t, double probe, double pulses, std::uint64_t seed) {
  std::mt19937_64 rng(stream_seed(seed, 0));
  MatrixXd counts(t.inputs(), t.outputs());
  for (Index i = 0; i < t.inputs(); ++i)
    for (Index j = 0; j < t.outputs(); ++j) {
      const double mean = pulses * probe * std::norm(t.matrix()(i, j));
      counts(i, j) = mean > 0.0 ? static_cast<double>(std::poisson_distribution<std::uint64_t>(mean)(rng)) : 0.0;
    }
  return counts;
}

// --- phase lock ----------------------------------------------------------------

void DriftModel::validate() const {
  if (!(walk_sigma >= 0.0)) throw ConfigError("drift walk_sigma must be >= 0");
  if (!(step > 0.0)) throw ConfigError("drift step must be > 0");
  if (!(period > 0.0)) throw ConfigError("drift period must be > 0");
}

std::vector<double> DriftModel::trace(double duration, std::uint64_t seed) const {
  validate();
  const auto steps = static_cast<std::size_t>(std::llround(duration / step));
  std::mt19937_64 rng(stream_seed(seed, 7));
  std::normal_distribution<double> g(0.0, walk_sigma * std::sqrt(step));
  std::vector<double> out(steps + 1);
  double walk = 0.0;
  for (std::size_t i = 0; i <= steps; ++i) {
    if (i > 0 && walk_sigma > 0.0) walk += g(rng);
    out[i] = walk + amplitude * std::sin(2.0 * kPi * static_cast<double>(i) * step / period);
  }
  return out;
}

void PidConfig::validate() const {
  if (!(update_interval > 0.0)) throw ConfigError("PID update interval must be > 0");
  if (!(limit > 0.0)) throw ConfigError("PID actuator limit must be > 0");
}

ErrorSignal::ErrorSignal(ProbabilityEngine engine, std::vector<LockPair> pairs)
    : engine_(std::move(engine)), pairs_(std::move(pairs)) {
  if (pairs_.empty()) throw ConfigError("error signal needs at least one pair");
}

double ErrorSignal::value(double phi) const {
  double s = 0.0;
  for (const auto& p : pairs_) s += p.sign * predict_twofold(engine_, p.j, p.k, phi).second;
  return s;
}

double ErrorSignal::slope(double phi) const {
  const double h = 1e-5;
  return (value(phi + h) - value(phi - h)) / (2.0 * h);
}

std::vector<LockPair> choose_lock_pairs(const ProbabilityEngine& engine, double setpoint, std::size_t count) {
  std::vector<std::pair<double, LockPair>> scored;
  for (Index j = 0; j < engine.modes(); ++j)
    for (Index k = j + 1; k < engine.modes(); ++k) {
      const double s = ErrorSignal(engine, {{j, k, 1.0}}).slope(setpoint);
      scored.push_back({std::abs(s), {j, k, s >= 0.0 ? 1.0 : -1.0}});
    }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<LockPair> out;
  for (std::size_t i = 0; i < scored.size() && i < count; ++i) out.push_back(scored[i].second);
  if (out.empty()) throw ConfigError("no twofold pairs available for the error signal");
  return out;
}

LockTrace pid_lock(const DriftModel& drift, const PidConfig& pid, const std::function<double(double)>& error,
                   double duration, std::uint64_t seed, double initial_phase, bool closed_loop) {
  pid.validate();
  const std::vector<double> d = drift.trace(duration, seed);
  const auto every = std::max<long long>(1, std::llround(pid.update_interval / drift.step));
  LockTrace out;
  out.time.reserve(d.size());
  double u = 0.0, integral = 0.0, last_e = 0.0;
  bool first = true;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double phi_now = initial_phase + d[i] + u;
    if (closed_loop && i % static_cast<std::size_t>(every) == 0) {
      const double e = error(phi_now);
      integral += e * pid.update_interval;
      const double de = first ? 0.0 : (e - last_e) / pid.update_interval;
      first = false;
      last_e = e;
      u = -(pid.kp * e + pid.ki * integral + pid.kd * de);
      if (std::abs(u) > pid.limit) {
        u = std::copysign(pid.limit, u);
        out.saturated = true;
      }
    }
    const double phi = initial_phase + d[i] + u;
    if (!std::isfinite(phi)) out.diverged = true;
    out.time.push_back(static_cast<double>(i) * drift.step);
    out.phi.push_back(phi);
    out.drift.push_back(d[i]);
    out.control.push_back(u);
  }
  CompensatedSum<double> s1, s2;
  double worst = 0.0;
  for (double phi : out.phi) {
    double r = phi - pid.setpoint;
    r -= kPi * std::round(r / kPi);
    s1.add(r);
    s2.add(r * r);
    worst = std::max(worst, std::abs(r));
  }
  const double n = static_cast<double>(out.phi.size());
  const double mean = s1.value() / n;
  out.residual_std = std::sqrt(std::max(0.0, s2.value() / n - mean * mean));
  out.residual_max = worst;
  const auto [lo, hi] = std::minmax_element(out.phi.begin(), out.phi.end());
  out.range = *hi - *lo;
  out.locked = !out.diverged && !out.saturated && worst < kPi / 4.0;
  out.diverged = out.diverged || out.saturated;
  return out;
}

PidConfig tune_pid(const DriftModel& drift, const PidConfig& base, const std::function<double(double)>& error,
                   double slope, double duration, std::uint64_t seed) {
  if (!(slope > 0.0)) throw ConfigError("error-signal slope at the setpoint must be positive");
  PidConfig best = base;
  double best_std = std::numeric_limits<double>::infinity();
  for (double kp : {0.2, 0.4, 0.6, 0.8, 1.0})
    for (double ki : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0})
      for (double kd : {0.0, 0.005, 0.01, 0.02}) {
        PidConfig trial = base;
        trial.kp = kp / slope;
        trial.ki = ki / slope;
        trial.kd = kd / slope;
        const LockTrace t = pid_lock(drift, trial, error, duration, seed, base.setpoint);
        if (t.locked && t.residual_std < best_std) {
          best_std = t.residual_std;
          best = trial;
        }
      }
  if (!std::isfinite(best_std)) throw NumericalError("no gain setting on the tuning grid holds the lock");
  return best;
}

SampleRun sample_locked(const ProbabilityEngine& engine, const ModelSpec& model, const LockTrace& trace,
                        double update_interval, std::uint64_t pulses_per_update, int n_max, std::uint64_t seed) {
  if (trace.time.empty()) throw ConfigError("empty lock trace");
  const double step = trace.time.size() > 1 ? trace.time[1] - trace.time[0] : update_interval;
  const auto every = std::max<long long>(1, std::llround(update_interval / step));
  SampleRun run;
  std::uint64_t block = 0;
  for (std::size_t i = 0; i < trace.phi.size(); i += static_cast<std::size_t>(every), ++block) {
    const double phi = trace.phi[i];
    const SamplingTable table = SamplingTable::build(engine.with_coherent_phase(phi), model, n_max);
    SampleRun part = sample_patterns(table, pulses_per_update, stream_seed(seed, block), phi, run.pulses);
    run.pulses += part.pulses;
    run.vacuum += part.vacuum;
    run.discarded += part.discarded;
    run.clicks.insert(run.clicks.end(), part.clicks.begin(), part.clicks.end());
  }
  return run;
}

}  // namespace dgbs
