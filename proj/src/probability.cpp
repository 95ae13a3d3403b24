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

#include "dgbs/probability.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "dgbs/parallel.hpp"

namespace dgbs {

// --- ModelSpec --------------------------------------------------------------

ModelSpec ModelSpec::korder(int k) {
  if (k < 0) throw ConfigError("k-order model needs k >= 0");
  return {Kind::kKOrder, k};
}

std::string ModelSpec::to_string() const {
  switch (kind) {
    case Kind::kFull:
      return "full";
    case Kind::kKOrder:
      return "korder:" + std::to_string(k);
    case Kind::kSqueezerOnly:
      return "squeezer_only";
    case Kind::kClassical:
      return "classical";
  }
  return "unknown";
}

ModelSpec ModelSpec::parse(const std::string& text) {
  if (text == "full") return full();
  if (text == "squeezer_only") return squeezer_only();
  if (text == "classical") return classical();
  const std::string prefix = "korder:";
  if (text.rfind(prefix, 0) == 0) {
    std::size_t used = 0;
    const std::string tail = text.substr(prefix.size());
    int k = -1;
    try {
      k = std::stoi(tail, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tail.size() || tail.empty()) throw ConfigError("bad k in model spec: " + text);
    return korder(k);
  }
  throw ConfigError("unknown model: " + text);
}

// --- Scenario ---------------------------------------------------------------

GaussianState Scenario::output_state(const ModelSpec& model) const {
  const Index d = modes();
  const GaussianState input = model.kind == ModelSpec::Kind::kClassical ? build_classical_input(source, d)
                                                                        : build_input_state(source, d);
  return propagate(input, transfer);
}

// --- ProbabilityEngine ------------------------------------------------------

ProbabilityEngine::ProbabilityEngine(AMatrix a, GammaVector gamma, std::optional<MatrixXc> sigma_q, double log_det)
    : a_(std::move(a)), gamma_(std::move(gamma)), sigma_q_(std::move(sigma_q)), log_det_(log_det) {}

ProbabilityEngine::ProbabilityEngine(const GaussianState& state) : a_(MatrixXc::Zero(2, 2)) {
  const QFactor f = factor_q(state);
  const Index d = state.modes();
  a_ = AMatrix(swap_matrix(d) * (MatrixXc::Identity(2 * d, 2 * d) - f.sigma_q_inv));
  gamma_ = {(f.sigma_q_inv * state.delta()).conjugate()};
  sigma_q_ = f.sigma_q;
  log_det_ = f.log_det;
}

ProbabilityEngine::ProbabilityEngine(AMatrix a, GammaVector gamma) : a_(std::move(a)), gamma_(std::move(gamma)) {
  if (gamma_.modes() != a_.modes()) throw DimensionError("gamma length does not match A");
  MatrixXc q_inv = a_.sigma_q_inv();
  q_inv = 0.5 * (q_inv + q_inv.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXc> eig(q_inv);
  const VectorXd& lambda = eig.eigenvalues();
  if (lambda.minCoeff() > 0.0 && lambda.maxCoeff() / lambda.minCoeff() <= kMaxCondition) {
    const MatrixXc& v = eig.eigenvectors();
    sigma_q_ = v * lambda.cwiseInverse().cast<Complex>().asDiagonal() * v.adjoint();
    log_det_ = -lambda.array().log().sum();
  }
}

double ProbabilityEngine::log_vacuum_probability(bool displaced) const {
  if (!sigma_q_) return std::numeric_limits<double>::quiet_NaN();
  if (!displaced) return -0.5 * log_det_;
  // delta = Sigma_Q conj(gamma), so delta^dag Sigma_Q^{-1} delta = gamma^T Sigma_Q conj(gamma).
  const VectorXc& g = gamma_.gamma;
  const double quad = (g.transpose() * (*sigma_q_) * g.conjugate())(0, 0).real();
  return -0.5 * quad - 0.5 * log_det_;
}

Complex ProbabilityEngine::kernel_weight(const DetectionPattern& n, const ModelSpec& model) const {
  const ReducedKernel k = reduce_by_pattern(a_, gamma_, n);
  switch (model.kind) {
    case ModelSpec::Kind::kFull:
    case ModelSpec::Kind::kClassical:
      return loop_hafnian(k);
    case ModelSpec::Kind::kKOrder:
      return loop_hafnian_korder(k, model.k);
    case ModelSpec::Kind::kSqueezerOnly:
      return hafnian(k);
  }
  return {};
}

double ProbabilityEngine::vacuum_ratio(const DetectionPattern& n, const ModelSpec& model) const {
  return kernel_weight(n, model).real() * std::exp(-n.log_factorial_product());
}

double ProbabilityEngine::probability(const DetectionPattern& n, const ModelSpec& model) const {
  if (!sigma_q_) throw PhysicalityError("vacuum probability unavailable for an unphysical kernel");
  const bool displaced = model.kind != ModelSpec::Kind::kSqueezerOnly;
  const double w = kernel_weight(n, model).real();
  if (w == 0.0) return 0.0;
  // Magnitudes combine in log space so p_vac never underflows on its own.
  const double log_mag = log_vacuum_probability(displaced) - n.log_factorial_product() + std::log(std::abs(w));
  return std::copysign(std::exp(log_mag), w);
}

ProbabilityEngine ProbabilityEngine::with_coherent_phase(double phi) const {
  return ProbabilityEngine(a_, shift_coherent_phase(gamma_, phi), sigma_q_, log_det_);
}

double pattern_probability(const GaussianState& state, const DetectionPattern& n, const ModelSpec& model) {
  return ProbabilityEngine(state).probability(n, model);
}

double pattern_probability(const Scenario& scenario, const DetectionPattern& n, const ModelSpec& model) {
  return pattern_probability(scenario.output_state(model), n, model);
}

// --- enumeration ------------------------------------------------------------

std::optional<std::size_t> PatternDistribution::index_of(const DetectionPattern& n) const {
  for (std::size_t i = 0; i < patterns.size(); ++i)
    if (patterns[i] == n) return i;
  return std::nullopt;
}

double pattern_count(Index modes, int photons, bool collision_free) {
  const double d = static_cast<double>(modes);
  if (collision_free) {
    if (photons > modes) return 0.0;
    return std::round(std::exp(std::lgamma(d + 1) - std::lgamma(photons + 1.0) - std::lgamma(d - photons + 1)));
  }
  return std::round(std::exp(std::lgamma(d + photons) - std::lgamma(photons + 1.0) - std::lgamma(d)));
}

std::vector<DetectionPattern> enumerate_patterns(Index modes, int photons, bool collision_free, std::size_t budget) {
  if (photons < 0) throw DimensionError("photon number must be >= 0");
  const double count = pattern_count(modes, photons, collision_free);
  if (count > static_cast<double>(budget)) {
    std::ostringstream msg;
    msg << "enumerating " << count << " patterns exceeds the budget of " << budget;
    throw ResourceError(msg.str());
  }
  std::vector<DetectionPattern> out;
  out.reserve(static_cast<std::size_t>(count));
  if (collision_free && photons > modes) return out;
  // Non-decreasing (collision) or strictly increasing (collision-free) mode lists.
  std::vector<Index> idx(static_cast<std::size_t>(photons));
  for (int i = 0; i < photons; ++i) idx[i] = collision_free ? i : 0;
  while (true) {
    out.push_back(DetectionPattern::from_modes(modes, idx));
    int pos = photons - 1;
    while (pos >= 0) {
      const Index limit = collision_free ? modes - (photons - pos) : modes - 1;
      if (idx[pos] < limit) break;
      --pos;
    }
    if (pos < 0) break;
    ++idx[pos];
    for (int i = pos + 1; i < photons; ++i) idx[i] = collision_free ? idx[i - 1] + 1 : idx[i - 1];
  }
  return out;
}

PatternDistribution enumerate_distribution(const ProbabilityEngine& engine, int photons, bool collision_free,
                                           const ModelSpec& model, std::size_t budget) {
  PatternDistribution dist;
  dist.modes = engine.modes();
  dist.photons = photons;
  dist.collision_free = collision_free;
  dist.model = model.to_string();
  dist.patterns = enumerate_patterns(engine.modes(), photons, collision_free, budget);
  std::vector<double> ratio(dist.patterns.size());
  parallel_for(dist.patterns.size(), [&](std::size_t i) { ratio[i] = engine.vacuum_ratio(dist.patterns[i], model); });
  CompensatedSum<double> sum;
  for (double& r : ratio) {
    if (r < 0.0) {
      r = 0.0;
      ++dist.clamped;
    }
    sum.add(r);
  }
  const double total = sum.value();
  if (!(total > 0.0)) throw NumericalError("distribution has no positive weight under model " + dist.model);
  dist.probabilities.resize(ratio.size());
  for (std::size_t i = 0; i < ratio.size(); ++i) dist.probabilities[i] = ratio[i] / total;
  const bool displaced = model.kind != ModelSpec::Kind::kSqueezerOnly;
  dist.log_vacuum_probability = engine.log_vacuum_probability(displaced);
  dist.unnormalized_sum = engine.has_vacuum_probability() ? total * std::exp(dist.log_vacuum_probability)
                                                          : std::numeric_limits<double>::quiet_NaN();
  return dist;
}

PatternDistribution enumerate_distribution(const GaussianState& state, int photons, bool collision_free,
                                           const ModelSpec& model, std::size_t budget) {
  PatternDistribution dist =
      enumerate_distribution(ProbabilityEngine(state), photons, collision_free, model, budget);
  dist.state_hash = hex64(state.hash());
  return dist;
}

PatternDistribution enumerate_distribution(const Scenario& scenario, int photons, bool collision_free,
                                           const ModelSpec& model, std::size_t budget) {
  return enumerate_distribution(scenario.output_state(model), photons, collision_free, model, budget);
}

// --- closed forms -----------------------------------------------------------

std::pair<double, double> predict_single(const ProbabilityEngine& engine, Index j) {
  const Index d = engine.modes();
  if (j < 0 || j >= d) throw DimensionError("mode index out of range");
  const double c = engine.a().full()(j, j + d).real();
  return {c, c + std::norm(engine.gamma().gamma(j))};
}

std::pair<double, double> predict_single(const GaussianState& state, Index j) {
  return predict_single(ProbabilityEngine(state), j);
}

std::pair<double, double> predict_twofold(const ProbabilityEngine& engine, Index j, Index k, double phi) {
  const Index d = engine.modes();
  if (j < 0 || k < 0 || j >= d || k >= d) throw DimensionError("mode index out of range");
  const MatrixXc& a = engine.a().full();
  const Complex b = a(j, k);
  const Complex c = a(j, k + d);
  const double cj = a(j, j + d).real();
  const double ck = a(k, k + d).real();
  const Complex e = std::polar(1.0, phi);
  const Complex gj = engine.gamma().gamma(j) * e;
  const Complex gk = engine.gamma().gamma(k) * e;
  const double common = std::norm(b) + std::norm(c);
  const double blocked = cj * ck + common;
  const double pj = cj + std::norm(gj);
  const double pk = ck + std::norm(gk);
  const double open = pj * pk + common + 2.0 * (c * std::conj(gj) * gk).real() +
                      2.0 * (b * std::conj(gj) * std::conj(gk)).real();
  return {blocked, open};
}

std::pair<double, double> predict_twofold(const GaussianState& state, Index j, Index k, double phi) {
  return predict_twofold(ProbabilityEngine(state), j, k, phi);
}

}  // namespace dgbs
