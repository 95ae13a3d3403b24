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

#include "dgbs/reconstruction.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "dgbs/experiment.hpp"
#include "test_util.hpp"

namespace dgbs {
namespace {

std::vector<double> grid(int windows, int per_window) {
  std::vector<double> phi;
  for (int i = 0; i < windows * per_window; ++i) phi.push_back(2.0 * kPi * i / per_window);
  return phi;
}

Scenario small_scenario(Index d, double n_alpha = 0.7) {
  PaperScenarioParams p;
  p.modes = d;
  p.n_alpha = n_alpha;
  p.seed = 11;
  return paper_scenario(p);
}

struct Truth {
  AMatrix a{MatrixXc::Zero(2, 2)};
  GammaVector gamma;
};

Truth gauged_truth(const Scenario& sc) {
  const GaussianState out = sc.output_state();
  Truth t{a_matrix(out), gamma_vector(out)};
  gauge_fix(t.a, t.gamma);
  return t;
}

TEST(FringeFit, ExactOnNoiselessData) {
  const auto phi = grid(3, 12);
  std::vector<double> y;
  for (double p : phi) y.push_back(2.5 + 0.7 * std::cos(2.0 * p - 1.1));
  const FringeFit f = fit_fringe(phi, y);
  EXPECT_NEAR(f.a, 2.5, 1e-12);
  EXPECT_NEAR(f.b, 0.7, 1e-12);
  EXPECT_NEAR(f.c, -1.1, 1e-12);
  EXPECT_NEAR(f.residual, 0.0, 1e-20);

  const FringeFit w = fit_fringe_windows(phi, y, {}, 2);
  EXPECT_EQ(w.windows, 2);
  EXPECT_NEAR(w.b, 0.7, 1e-12);
  EXPECT_NEAR(w.c, -1.1, 1e-12);
}

TEST(FringeFit, PhaseWrapsIntoRange) {
  const auto phi = grid(1, 16);
  std::vector<double> y;
  for (double p : phi) y.push_back(1.0 + 0.5 * std::cos(2.0 * p + kPi));
  const FringeFit f = fit_fringe(phi, y);
  EXPECT_GE(f.c, -kPi);
  EXPECT_LT(f.c, kPi);
  EXPECT_NEAR(std::cos(f.c), -1.0, 1e-12);
}

TEST(FringeFit, RejectsDegenerateGrid) {
  const std::vector<double> phi{0.0, kPi, 2.0 * kPi, 3.0 * kPi};
  const std::vector<double> y{1.0, 1.0, 1.0, 1.0};
  EXPECT_THROW(fit_fringe(phi, y), NumericalError);
  EXPECT_THROW(fit_fringe(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 2.0}), NumericalError);
}

// The reported covariance should match the scatter of fits to Poisson data.
TEST(FringeFit, CovarianceMatchesMonteCarlo) {
  const auto phi = grid(1, 24);
  const double a = 750.0, b = 300.0, c = 0.4;
  std::mt19937_64 rng(5);
  std::vector<double> as, bs, cs;
  double pred_a = 0.0, pred_b = 0.0, pred_c = 0.0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> y, s;
    for (double p : phi) {
      const double mean = a + b * std::cos(2.0 * p + c);
      y.push_back(static_cast<double>(std::poisson_distribution<long>(mean)(rng)));
      s.push_back(std::sqrt(mean));
    }
    const FringeFit f = fit_fringe(phi, y, s);
    as.push_back(f.a);
    bs.push_back(f.b);
    cs.push_back(f.c);
    pred_a += f.sigma_a() / trials;
    pred_b += f.sigma_b() / trials;
    pred_c += f.sigma_c() / trials;
  }
  const auto sd = [](const std::vector<double>& v) {
    double m = 0.0, q = 0.0;
    for (double x : v) m += x / v.size();
    for (double x : v) q += (x - m) * (x - m) / (v.size() - 1);
    return std::sqrt(q);
  };
  EXPECT_NEAR(sd(as) / pred_a, 1.0, 0.2);
  EXPECT_NEAR(sd(bs) / pred_b, 1.0, 0.2);
  EXPECT_NEAR(sd(cs) / pred_c, 1.0, 0.2);
}

TEST(Reconstruction, NoiselessRoundTrip) {
  const Scenario sc = small_scenario(6);
  ScanSpec spec;
  spec.windows = 2;
  spec.points_per_window = 12;
  spec.noise = false;
  const auto records = simulate_experiment(sc, 3, spec, 1);
  ReconstructionOptions opt;
  const ReconstructionResult r = reconstruct(records, opt);
  const Truth t = gauged_truth(sc);

  EXPECT_TRUE(r.physical);
  EXPECT_LT((r.gamma.cast<Complex>() - t.gamma.head()).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((r.a.b() - t.a.b()).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((r.a.c() - t.a.c()).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(r.flags_c.maxCoeff() & (kInconsistent | kInvalidArgument), 0);
  // Signs that shot noise at this rate could not fix are left where the data put them.
  EXPECT_LT(r.optimization.objective_after, 1e-10);
}

TEST(Reconstruction, WithoutSecondInputSignsAreOptimized) {
  const Scenario sc = small_scenario(5);
  ScanSpec spec;
  spec.windows = 2;
  spec.points_per_window = 12;
  spec.noise = false;
  const auto records = simulate_experiment(sc, -1, spec, 1);
  ReconstructionOptions opt;
  opt.optimizer.restarts = 4;
  const ReconstructionResult r = reconstruct(records, opt);
  const Truth t = gauged_truth(sc);
  EXPECT_FALSE(r.optimization.parameters.empty());
  EXPECT_LE(r.optimization.objective_after, r.optimization.objective_before);
  for (const auto& p : r.optimization.parameters) EXPECT_NE(r.flags_c(p.j, p.k) & kOptimized, 0);
  // |C| and B are direct estimates and stay exact.
  EXPECT_LT((r.a.b() - t.a.b()).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((r.a.c().cwiseAbs() - t.a.c().cwiseAbs()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Reconstruction, OptimizerRecoversOneHiddenPhase) {
  const Scenario sc = small_scenario(6);
  ScanSpec spec;
  spec.windows = 2;
  spec.points_per_window = 12;
  spec.noise = false;
  const auto records = simulate_experiment(sc, 3, spec, 1);
  const Truth t = gauged_truth(sc);
  MatrixXc b = t.a.b(), c = t.a.c();
  const double truth = std::arg(c(1, 4));
  c(1, 4) = std::polar(std::abs(c(1, 4)), truth + 1.0);
  c(4, 1) = std::conj(c(1, 4));
  PhaseParameter p{1, 4, false, truth + 1.0, truth + 1.0, 0.0, true};
  OptimizerOptions o;
  o.restarts = 3;
  const auto report = optimize_undetermined_phases(b, c, t.gamma.head().real(), {p}, records[1], o);
  ASSERT_EQ(report.parameters.size(), 1u);
  EXPECT_LT(std::abs(wrap_phase(report.parameters[0].value - truth)), 0.05);
  EXPECT_LT(report.objective_after, report.objective_before);
}

TEST(Reconstruction, MissingCollisionsLeaveDiagonalFlagged) {
  const Scenario sc = small_scenario(4);
  ScanSpec spec;
  spec.windows = 2;
  spec.points_per_window = 12;
  spec.noise = false;
  spec.collisions = false;
  const auto records = simulate_experiment(sc, 3, spec, 1);
  const ReconstructionResult r = reconstruct(records);
  for (Index j = 0; j < 4; ++j) {
    EXPECT_NE(r.flags_b(j, j) & kDiagonalUnknown, 0);
    EXPECT_EQ(r.a.b()(j, j), Complex(0.0));
  }
}

TEST(Reconstruction, DarkCoherentModeIsUndetermined) {
  Scenario sc = small_scenario(4);
  // Output 2 receives no light at all.
  MatrixXc t = sc.transfer.matrix();
  t.col(2).setZero();
  sc.transfer = TransferMatrix(t);
  ScanSpec spec;
  spec.windows = 2;
  spec.points_per_window = 12;
  spec.noise = false;
  const auto records = simulate_experiment(sc, 3, spec, 1);
  ReconstructionOptions opt;
  opt.optimize = false;
  const ReconstructionResult r = reconstruct(records, opt);
  EXPECT_NE(r.flags_b(0, 2) & kUndetermined, 0);
  EXPECT_NE(r.flags_c(0, 2) & kUndetermined, 0);
}

TEST(Reconstruction, NeedsBlockedAndInput1) {
  const Scenario sc = small_scenario(4);
  ScanSpec spec;
  spec.windows = 1;
  spec.points_per_window = 8;
  spec.noise = false;
  auto records = simulate_experiment(sc, -1, spec, 1);
  records.erase(records.begin());
  EXPECT_THROW(reconstruct(records), ConfigError);
}

TEST(Reconstruction, SurvivesCsvRoundTrip) {
  const Scenario sc = small_scenario(5);
  ScanSpec spec;
  spec.windows = 2;
  spec.points_per_window = 12;
  spec.noise = false;
  const auto records = simulate_experiment(sc, 3, spec, 1);
  std::stringstream ss;
  write_records_csv(ss, records);
  const auto back = read_records_csv(ss, 5);
  const ReconstructionResult a = reconstruct(records), b = reconstruct(back);
  EXPECT_LT((a.a.full() - b.a.full()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Reconstruction, GaugeFixMakesGammaReal) {
  const Scenario sc = small_scenario(5);
  const Truth t = gauged_truth(sc);
  EXPECT_LT(t.gamma.head().imag().cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_GE(t.gamma.head().real().minCoeff(), 0.0);
}

}  // namespace
}  // namespace dgbs
