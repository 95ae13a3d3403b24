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

#include "dgbs/metrics.hpp"

#include <cmath>
#include <limits>

namespace dgbs {

double tvd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("distributions have different sizes");
  CompensatedSum<double> sum;
  for (std::size_t i = 0; i < p.size(); ++i) sum.add(std::abs(p[i] - q[i]));
  return 0.5 * sum.value();
}

double tvd(const PatternDistribution& p, const PatternDistribution& q) {
  if (p.modes != q.modes || p.patterns != q.patterns) throw DimensionError("distributions are indexed by different pattern sets");
  return tvd(std::span<const double>(p.probabilities), std::span<const double>(q.probabilities));
}

ModelEvaluator::ModelEvaluator(ProbabilityEngine engine, ModelSpec model, LikelihoodNormalization norm)
    : engine_(std::move(engine)), model_(model), norm_(norm) {}

double ModelEvaluator::probability(const DetectionPattern& n) {
  if (norm_ == LikelihoodNormalization::kRaw) return engine_.probability(n, model_);
  const auto key = std::make_pair(n.total(), n.collision_free());
  auto it = tables_.find(key);
  if (it == tables_.end()) {
    const PatternDistribution dist = enumerate_distribution(engine_, n.total(), n.collision_free(), model_);
    std::map<DetectionPattern, double> table;
    for (std::size_t i = 0; i < dist.size(); ++i) table.emplace(dist.patterns[i], dist.probabilities[i]);
    it = tables_.emplace(key, std::move(table)).first;
  }
  return it->second.at(n);
}

LikelihoodTrace likelihood_ratio(std::span<const DetectionPattern> samples, ModelEvaluator& a, ModelEvaluator& b) {
  LikelihoodTrace trace;
  trace.samples = samples.size();
  trace.increments.reserve(samples.size());
  trace.cumulative_log.reserve(samples.size());
  double running = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double pa = a.probability(samples[i]);
    const double pb = b.probability(samples[i]);
    double inc;
    if (pa > 0.0 && pb > 0.0) {
      inc = std::log(pa) - std::log(pb);
    } else {
      trace.flagged.push_back(i);
      if (pa <= 0.0 && pb <= 0.0) inc = std::numeric_limits<double>::quiet_NaN();
      else inc = pa <= 0.0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    }
    running += inc;
    trace.increments.push_back(inc);
    trace.cumulative_log.push_back(running);
  }
  trace.log_l = running;
  return trace;
}

LikelihoodTrace likelihood_ratio(std::span<const DetectionPattern> samples, const ModelSpec& model_a,
                                 const ModelSpec& model_b, const Scenario& scenario, LikelihoodNormalization norm) {
  ModelEvaluator a(ProbabilityEngine(scenario.output_state(model_a)), model_a, norm);
  ModelEvaluator b(ProbabilityEngine(scenario.output_state(model_b)), model_b, norm);
  return likelihood_ratio(samples, a, b);
}

}  // namespace dgbs
