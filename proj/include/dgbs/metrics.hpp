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

#include <map>
#include <span>
#include <vector>

#include "dgbs/probability.hpp"

namespace dgbs {

/// Half the L1 distance; both distributions must list the same patterns in
/// the same order.
double tvd(const PatternDistribution& p, const PatternDistribution& q);
double tvd(std::span<const double> p, std::span<const double> q);

/// How per-sample probabilities enter the likelihood ratio.
enum class LikelihoodNormalization {
  kFixedN,  ///< normalised over the sample's fixed-N pattern set (default)
  kRaw,     ///< absolute pattern probabilities
};

/// Running log-likelihood ratio log(pr_a / pr_b) over a sample stream.
struct LikelihoodTrace {
  std::vector<double> increments;
  std::vector<double> cumulative_log;
  double log_l = 0.0;
  std::size_t samples = 0;
  /// Samples to which either model assigns probability <= 0. Their
  /// increment is +-inf (or NaN when both vanish) and poisons log_l.
  std::vector<std::size_t> flagged;

  double l() const { return std::exp(log_l); }
};

/// Per-model pattern probabilities, cached per photon number.
class ModelEvaluator {
 public:
  ModelEvaluator(ProbabilityEngine engine, ModelSpec model, LikelihoodNormalization norm);
  double probability(const DetectionPattern& n);
  const ModelSpec& model() const { return model_; }

 private:
  ProbabilityEngine engine_;
  ModelSpec model_;
  LikelihoodNormalization norm_;
  std::map<std::pair<int, bool>, std::map<DetectionPattern, double>> tables_;
};

LikelihoodTrace likelihood_ratio(std::span<const DetectionPattern> samples, ModelEvaluator& a, ModelEvaluator& b);
LikelihoodTrace likelihood_ratio(std::span<const DetectionPattern> samples, const ModelSpec& model_a,
                                 const ModelSpec& model_b, const Scenario& scenario,
                                 LikelihoodNormalization norm = LikelihoodNormalization::kFixedN);

}  // namespace dgbs
