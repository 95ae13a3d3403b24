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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "dgbs/experiment.hpp"
#include "test_util.hpp"

namespace dgbs {
namespace {

std::vector<double> random_distribution(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (double& x : p) s += (x = u(rng));
  for (double& x : p) x /= s;
  return p;
}

Scenario test_scenario(double n_alpha) {
  PaperScenarioParams p;
  p.modes = 6;
  p.n_alpha = n_alpha;
  p.seed = 4;
  return paper_scenario(p);
}

TEST(Tvd, EdgeCases) {
  const std::vector<double> p{0.5, 0.5, 0.0, 0.0}, q{0.0, 0.0, 0.25, 0.75};
  EXPECT_DOUBLE_EQ(tvd(p, p), 0.0);
  EXPECT_DOUBLE_EQ(tvd(p, q), 1.0);
  EXPECT_THROW(tvd(p, std::vector<double>{1.0}), DimensionError);
}

TEST(Tvd, IsAMetric) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_distribution(20, rng), b = random_distribution(20, rng), c = random_distribution(20, rng);
    EXPECT_DOUBLE_EQ(tvd(a, b), tvd(b, a));
    EXPECT_LE(tvd(a, c), tvd(a, b) + tvd(b, c) + 1e-15);
    EXPECT_GE(tvd(a, b), 0.0);
    EXPECT_LE(tvd(a, b), 1.0);
  }
}

TEST(Tvd, RejectsMismatchedPatternSets) {
  const Scenario sc = test_scenario(0.5);
  const auto two = enumerate_distribution(sc, 2, true, ModelSpec::full());
  const auto three = enumerate_distribution(sc, 3, true, ModelSpec::full());
  EXPECT_THROW(tvd(two, three), Error);
}

TEST(Tvd, KZeroModelApproachesFullWithBrightLight) {
  double last = 1.0;
  for (double n_alpha : {0.15, 0.7, 2.2}) {
    const Scenario sc = test_scenario(n_alpha);
    const double d = tvd(enumerate_distribution(sc, 3, true, ModelSpec::full()),
                         enumerate_distribution(sc, 3, true, ModelSpec::korder(0)));
    EXPECT_GT(d, 0.0);
    EXPECT_LT(d, last);
    last = d;
  }
}

TEST(Likelihood, IdenticalModelsGiveOne) {
  const Scenario sc = test_scenario(0.7);
  const ProbabilityEngine engine(sc.output_state());
  const auto samples = sample_conditional(engine, ModelSpec::full(), 100, 3, 4, 9);
  const auto trace = likelihood_ratio(samples, ModelSpec::full(), ModelSpec::full(), sc);
  EXPECT_EQ(trace.log_l, 0.0);
  EXPECT_EQ(trace.l(), 1.0);
  EXPECT_EQ(trace.samples, samples.size());
  EXPECT_TRUE(trace.flagged.empty());
}

TEST(Likelihood, KOrderAtSampleSizeIsExact) {
  const Scenario sc = test_scenario(0.7);
  const ProbabilityEngine engine(sc.output_state());
  const auto samples = sample_conditional(engine, ModelSpec::full(), 100, 3, 3, 2);
  const auto trace = likelihood_ratio(samples, ModelSpec::korder(3), ModelSpec::full(), sc);
  EXPECT_NEAR(trace.log_l, 0.0, 1e-10);
}

TEST(Likelihood, OrderDoesNotChangeFinalRatio) {
  const Scenario sc = test_scenario(0.7);
  const ProbabilityEngine engine(sc.output_state());
  auto samples = sample_conditional(engine, ModelSpec::full(), 200, 3, 4, 5);
  const auto a = likelihood_ratio(samples, ModelSpec::korder(1), ModelSpec::full(), sc);
  std::reverse(samples.begin(), samples.end());
  const auto b = likelihood_ratio(samples, ModelSpec::korder(1), ModelSpec::full(), sc);
  EXPECT_NEAR(a.log_l, b.log_l, 1e-9 * std::abs(a.log_l));
  EXPECT_EQ(a.cumulative_log.size(), samples.size());
  EXPECT_NEAR(a.cumulative_log.back(), a.log_l, 1e-12 * std::abs(a.log_l));
}

TEST(Likelihood, ZeroProbabilitySamplesAreFlagged) {
  // Without coherent light the k = 0 model assigns zero to every click pattern.
  const Scenario sc = test_scenario(0.0);
  const ProbabilityEngine engine(sc.output_state());
  const auto samples = sample_conditional(engine, ModelSpec::full(), 50, 2, 2, 1);
  const auto trace =
      likelihood_ratio(samples, ModelSpec::korder(0), ModelSpec::full(), sc, LikelihoodNormalization::kRaw);
  EXPECT_EQ(trace.flagged.size(), samples.size());
  EXPECT_TRUE(std::isinf(trace.log_l) && trace.log_l < 0);
  EXPECT_EQ(trace.l(), 0.0);
}

TEST(Likelihood, RawAndFixedNDifferOnlyByConstant) {
  const Scenario sc = test_scenario(0.7);
  const ProbabilityEngine engine(sc.output_state());
  const auto samples = sample_conditional(engine, ModelSpec::full(), 40, 3, 3, 8);
  const auto fixed = likelihood_ratio(samples, ModelSpec::korder(1), ModelSpec::full(), sc);
  const auto raw =
      likelihood_ratio(samples, ModelSpec::korder(1), ModelSpec::full(), sc, LikelihoodNormalization::kRaw);
  // Per-sample increments differ by log(Z_b / Z_a), the same for every N = 3 sample.
  const double shift = raw.increments[0] - fixed.increments[0];
  for (std::size_t i = 0; i < samples.size(); ++i) EXPECT_NEAR(raw.increments[i] - fixed.increments[i], shift, 1e-9);
}

}  // namespace
}  // namespace dgbs
