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

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dgbs/gaussian.hpp"
#include "dgbs/hafnian.hpp"

namespace dgbs {

/// Which approximation of the photon statistics to evaluate.
struct ModelSpec {
  enum class Kind { kFull, kKOrder, kSqueezerOnly, kClassical };

  Kind kind = Kind::kFull;
  int k = 0;  ///< only meaningful for kKOrder

  static ModelSpec full() { return {Kind::kFull, 0}; }
  static ModelSpec korder(int k);
  static ModelSpec squeezer_only() { return {Kind::kSqueezerOnly, 0}; }
  static ModelSpec classical() { return {Kind::kClassical, 0}; }

  /// "full", "korder:<k>", "squeezer_only", "classical".
  std::string to_string() const;
  static ModelSpec parse(const std::string& text);

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Source plus circuit: knows how to build the state each model refers to.
struct Scenario {
  SourceConfig source;
  TransferMatrix transfer;

  Index modes() const { return transfer.outputs(); }
  /// Output state for `model`; the classical model uses the classical surrogate input.
  GaussianState output_state(const ModelSpec& model = ModelSpec::full()) const;
};

/// Caches A, gamma and Sigma_Q of one state and evaluates pattern probabilities
/// under any model.
class ProbabilityEngine {
 public:
  explicit ProbabilityEngine(const GaussianState& state);
  /// From a kernel alone (e.g. a reconstruction). Sigma_Q is recovered from A;
  /// if that fails only vacuum-free weights are available.
  ProbabilityEngine(AMatrix a, GammaVector gamma);

  Index modes() const { return a_.modes(); }
  const AMatrix& a() const { return a_; }
  const GammaVector& gamma() const { return gamma_; }
  bool has_vacuum_probability() const { return sigma_q_.has_value(); }

  /// log p_vac of the displaced state, or of the undisplaced one when
  /// `displaced` is false.
  double log_vacuum_probability(bool displaced = true) const;

  /// lhaf / haf / truncated lhaf of the reduced kernel, without prefactors.
  Complex kernel_weight(const DetectionPattern& n, const ModelSpec& model) const;
  /// pr(n) / p_vac = Re kernel_weight / prod n_j!.
  double vacuum_ratio(const DetectionPattern& n, const ModelSpec& model) const;
  /// pr(n) = p_vac / prod n_j! * kernel_weight.
  double probability(const DetectionPattern& n, const ModelSpec& model) const;

  /// Engine for the coherent phase shifted by phi (gamma -> e^{i phi} gamma,
  /// A unchanged).
  ProbabilityEngine with_coherent_phase(double phi) const;

 private:
  ProbabilityEngine(AMatrix a, GammaVector gamma, std::optional<MatrixXc> sigma_q, double log_det);

  AMatrix a_;
  GammaVector gamma_;
  std::optional<MatrixXc> sigma_q_;
  double log_det_ = 0.0;
};

double pattern_probability(const GaussianState& state, const DetectionPattern& n, const ModelSpec& model);
double pattern_probability(const Scenario& scenario, const DetectionPattern& n, const ModelSpec& model);

/// Normalised table over a fixed-N pattern set.
struct PatternDistribution {
  Index modes = 0;
  int photons = 0;
  bool collision_free = true;
  std::vector<DetectionPattern> patterns;
  std::vector<double> probabilities;
  double unnormalized_sum = 0.0;          ///< sum of pr(n) before normalisation
  double log_vacuum_probability = 0.0;    ///< NaN when unavailable
  std::size_t clamped = 0;                ///< negative truncated-model values set to 0
  std::string model;
  std::string state_hash;

  std::size_t size() const { return patterns.size(); }
  std::optional<std::size_t> index_of(const DetectionPattern& n) const;
};

inline constexpr std::size_t kDefaultPatternBudget = 5'000'000;

/// Number of fixed-N patterns over d modes.
double pattern_count(Index modes, int photons, bool collision_free);

/// All fixed-N patterns in lexicographic order of their (sorted) clicked-mode
/// lists.
std::vector<DetectionPattern> enumerate_patterns(Index modes, int photons, bool collision_free,
                                                 std::size_t budget = kDefaultPatternBudget);

PatternDistribution enumerate_distribution(const ProbabilityEngine& engine, int photons, bool collision_free,
                                           const ModelSpec& model, std::size_t budget = kDefaultPatternBudget);
PatternDistribution enumerate_distribution(const GaussianState& state, int photons, bool collision_free,
                                           const ModelSpec& model, std::size_t budget = kDefaultPatternBudget);
PatternDistribution enumerate_distribution(const Scenario& scenario, int photons, bool collision_free,
                                           const ModelSpec& model, std::size_t budget = kDefaultPatternBudget);

/// (p_j, p'_j): single-click vacuum ratios with the coherent state blocked and
/// injected.
std::pair<double, double> predict_single(const ProbabilityEngine& engine, Index j);
std::pair<double, double> predict_single(const GaussianState& state, Index j);

/// (p_jk, p'_jk(phi)) from the closed forms. For j == k this is
/// 2 pr(2_j) / p_vac, which obeys the same expressions.
std::pair<double, double> predict_twofold(const ProbabilityEngine& engine, Index j, Index k, double phi);
std::pair<double, double> predict_twofold(const GaussianState& state, Index j, Index k, double phi);

}  // namespace dgbs
