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

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "dgbs/probability.hpp"
#include "dgbs/records.hpp"

namespace dgbs {

// --- circuits and scenarios --------------------------------------------------

/// Haar-random unitary (QR of a complex Ginibre matrix with the phase fix).
MatrixXc haar_unitary(Index d, std::uint64_t seed);

/// Desk-scale stand-in for the experiment: a Haar interferometer with uniform
/// end-to-end efficiency, squeezing set from the detected squeezer rate.
struct PaperScenarioParams {
  Index modes = 15;
  double eta = 0.1;
  double n_pdc = 0.01;    ///< detected squeezer photons per pulse
  PdcRate rate = PdcRate::kPerMode;
  double n_alpha = 0.15;  ///< |alpha|^2 at the input
  double phi = 0.0;
  std::array<Index, 2> squeezer_ports{0, 1};
  Index coherent_port = 2;
  std::uint64_t seed = 2023;
};

Scenario paper_scenario(const PaperScenarioParams& params);

/// The same circuit and squeezer with the coherent state moved to `port`.
Scenario with_coherent_port(const Scenario& scenario, Index port);

// --- sampling ------------------------------------------------------------------

/// Exact probabilities of every pattern with n_min <= N <= n_max; whatever
/// mass they miss is the overflow bucket.
struct SamplingTable {
  Index modes = 0;
  std::vector<DetectionPattern> patterns;
  std::vector<double> probabilities;
  std::vector<double> cumulative;
  double covered = 0.0;  ///< sum of probabilities
  std::size_t clamped = 0;

  static SamplingTable build(const ProbabilityEngine& engine, const ModelSpec& model, int n_max, int n_min = 0,
                             bool collision_free = true, std::size_t budget = kDefaultPatternBudget);
  /// Index of the pattern hit by u in [0, 1), or size() for the overflow.
  std::size_t draw(double u) const;
  std::size_t size() const { return patterns.size(); }
};

struct ClickRecord {
  std::uint64_t pulse = 0;
  DetectionPattern pattern = DetectionPattern::vacuum(0);
  double phi = 0.0;
};

/// Vacuum pulses are only counted; overflow draws (collisions or N > n_max)
/// are discarded.
struct SampleRun {
  std::uint64_t pulses = 0;
  std::uint64_t vacuum = 0;
  std::uint64_t discarded = 0;
  std::vector<ClickRecord> clicks;
};

/// Pulses are cut into fixed chunks with their own seeded streams, so the
/// result depends only on (seed, state, n_max), never on the worker count.
SampleRun sample_patterns(const ProbabilityEngine& engine, const ModelSpec& model, std::uint64_t pulses, int n_max,
                          std::uint64_t seed, double phi = 0.0);
SampleRun sample_patterns(const SamplingTable& table, std::uint64_t pulses, std::uint64_t seed, double phi = 0.0,
                          std::uint64_t first_pulse = 0);

/// Multinomial counts per table entry (last element: overflow).
std::vector<double> sample_counts(const SamplingTable& table, double pulses, std::uint64_t seed);

/// i.i.d. patterns conditioned on n_min <= N <= n_max.
std::vector<DetectionPattern> sample_conditional(const ProbabilityEngine& engine, const ModelSpec& model,
                                                 std::size_t count, int n_min, int n_max, std::uint64_t seed);

/// Unnormalised collision-free N-fold probabilities for N = 0..n_max.
std::vector<double> nfold_rates(const ProbabilityEngine& engine, const ModelSpec& model, int n_max);

// --- synthetic measurement records -------------------------------------------

struct ScanSpec {
  int windows = 8;             ///< 2 pi windows in the scan
  int points_per_window = 24;
  double pulses = 1e7;         ///< per setting
  int max_order = 3;           ///< highest recorded N
  bool collisions = true;      ///< record n_j = 2 outcomes (PNR)
  bool noise = true;           ///< multinomial counts instead of expectations
};

/// One setting's record. The engine must already describe that setting (no
/// displacement for kBlocked); scanned settings rotate its gamma by phi.
MeasurementRecord simulate_record(const ProbabilityEngine& engine, Setting setting, const ScanSpec& spec,
                                  std::uint64_t seed);

/// Blocked, input1 and (when second_port >= 0) input2 records of a scenario.
std::vector<MeasurementRecord> simulate_experiment(const Scenario& scenario, Index second_port, const ScanSpec& spec,
                                                   std::uint64_t seed);

// --- transfer-matrix amplitudes ------------------------------------------------

/// |T_ij|^2 = eta_tot R_ij / sum_j R_ij from per-input singles rates.
MatrixXd transfer_from_singles(const MatrixXd& rates, double eta_tot);

/// Singles counts per (input, output) for a coherent probe of intensity
/// `probe` injected into each input in turn.
MatrixXd simulate_singles_probe(const TransferMatrix& t, double probe, double pulses, std::uint64_t seed);

// --- phase lock ----------------------------------------------------------------

/// Phase drift: sinusoid plus random walk, integrated at `step` seconds.
struct DriftModel {
  double walk_sigma = 0.05;  ///< rad / sqrt(s)
  double amplitude = 1.8;    ///< rad
  double period = 20.0;      ///< s
  double step = 0.01;        ///< s

  static DriftModel none() { return {0.0, 0.0, 20.0, 0.01}; }
  /// Drift at t = 0, step, 2 step, ... (starts at 0).
  std::vector<double> trace(double duration, std::uint64_t seed) const;
  void validate() const;
};

struct PidConfig {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double setpoint = kPi / 4.0;
  double update_interval = 0.1;  ///< s
  double limit = 20.0 * kPi;     ///< actuator range, rad

  void validate() const;
};

/// A twofold pair entering the error signal with weight sign (+1 or -1).
struct LockPair {
  Index j = 0;
  Index k = 0;
  double sign = 1.0;
};

/// S(phi) = sum sign * p'_jk(phi).
class ErrorSignal {
 public:
  ErrorSignal(ProbabilityEngine engine, std::vector<LockPair> pairs);
  double value(double phi) const;
  double slope(double phi) const;
  const std::vector<LockPair>& pairs() const { return pairs_; }

 private:
  ProbabilityEngine engine_;
  std::vector<LockPair> pairs_;
};

/// Stand-in for the hand-picked pairs: the `count` fringes with the steepest
/// slope at the setpoint, signed so that every slope is positive there.
std::vector<LockPair> choose_lock_pairs(const ProbabilityEngine& engine, double setpoint, std::size_t count = 6);

struct LockTrace {
  std::vector<double> time;
  std::vector<double> phi;
  std::vector<double> drift;
  std::vector<double> control;
  double residual_std = 0.0;   ///< std of phi - setpoint, wrapped to (-pi/2, pi/2]
  double residual_max = 0.0;
  double range = 0.0;          ///< max(phi) - min(phi)
  bool locked = false;         ///< never slipped by a quarter period
  bool saturated = false;
  bool diverged = false;
};

/// Closed-loop simulation: phi = initial + drift + u, with
/// u = -(kp e + ki sum(e) dt + kd de/dt) refreshed every update interval and
/// e = error(phi). With closed_loop false u stays 0.
LockTrace pid_lock(const DriftModel& drift, const PidConfig& pid, const std::function<double(double)>& error,
                   double duration, std::uint64_t seed, double initial_phase, bool closed_loop = true);

/// Grid search over gains scaled by 1 / slope of the error at the setpoint.
PidConfig tune_pid(const DriftModel& drift, const PidConfig& base, const std::function<double(double)>& error,
                   double slope, double duration, std::uint64_t seed);

/// Click records sampled at the instantaneous phase of a lock trace,
/// `pulses_per_update` pulses per control interval.
SampleRun sample_locked(const ProbabilityEngine& engine, const ModelSpec& model, const LockTrace& trace,
                        double update_interval, std::uint64_t pulses_per_update, int n_max, std::uint64_t seed);

}  // namespace dgbs
