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

#include "dgbs/fock.hpp"

#include <gtest/gtest.h>

#include "dgbs/probability.hpp"
#include "test_util.hpp"

namespace dgbs {
namespace {

TEST(Dilation, IsUnitaryWithLossBlock) {
  std::mt19937_64 rng(11);
  const MatrixXc l = testing::random_subunitary(4, rng);
  const MatrixXc u = dilate_lossy(l);
  EXPECT_TRUE((u * u.adjoint()).isApprox(MatrixXc::Identity(8, 8), 1e-12));
  EXPECT_TRUE(u.topLeftCorner(4, 4).isApprox(l, 1e-14));
}

TEST(Dilation, UnitaryMapLeavesAncillasAlone) {
  std::mt19937_64 rng(12);
  const MatrixXc l = testing::random_unitary(3, rng);
  const MatrixXc u = dilate_lossy(l);
  EXPECT_LT(u.topRightCorner(3, 3).norm(), 1e-12);
  EXPECT_TRUE(u.bottomRightCorner(3, 3).isApprox(MatrixXc::Identity(3, 3), 1e-12));
}

TEST(Interferometer, HongOuMandel) {
  FockVector psi;
  psi.modes = 2;
  psi.cutoff = 2;
  psi.amplitudes[{1, 1}] = 1.0;
  MatrixXc bs(2, 2);
  const double s = 1.0 / std::sqrt(2.0);
  bs << s, s, s, -s;
  const FockVector out = apply_interferometer(psi, bs);
  EXPECT_NEAR(std::abs(out.amplitude({1, 1})), 0.0, 1e-15);
  EXPECT_NEAR(std::norm(out.amplitude({2, 0})), 0.5, 1e-15);
  EXPECT_NEAR(std::norm(out.amplitude({0, 2})), 0.5, 1e-15);
}

TEST(Interferometer, PreservesNorm) {
  SourceConfig cfg;
  cfg.r = 0.4;
  cfg.alpha_mag = 0.6;
  cfg.phi = 0.3;
  const FockVector psi = expand_inputs(cfg, 3, 6);
  std::mt19937_64 rng(5);
  const FockVector out = apply_interferometer(psi, testing::random_unitary(3, rng));
  EXPECT_NEAR(out.norm_squared(), psi.norm_squared(), 1e-12);
  EXPECT_NEAR(psi.truncation_loss, source_tail_mass(cfg, 6), 1e-12);
}

TEST(Oracle, GeneratingPathMatchesKetByKetExpansion) {
  SourceConfig cfg;
  cfg.r = 0.35;
  cfg.alpha_mag = 0.5;
  cfg.phi = 1.1;
  std::mt19937_64 rng(21);
  const MatrixXc l = testing::random_subunitary(3, rng);
  const TransferMatrix t(l.transpose());
  const int cutoff = 5;
  const FockVector out = apply_interferometer(expand_inputs(cfg, 6, cutoff), dilate_lossy(t));

  // Marginals of the dilated ket over the ancillas, restricted to the same cutoff.
  std::map<std::vector<int>, double> marginal;
  for (const auto& [occ, amp] : out.amplitudes) marginal[std::vector<int>(occ.begin(), occ.begin() + 3)] += std::norm(amp);
  FockOracle oracle(cfg, t, 2, 0, 1e-4);
  ASSERT_GE(oracle.cutoff(), cutoff);
  // Both sides converge to the same limit; compare at the explicit cutoff.
  const FockOracle same(cfg, t, 2, cutoff, 1.0);
  for (const auto& p : std::vector<DetectionPattern>{DetectionPattern({0, 0, 0}), DetectionPattern({1, 0, 0}),
                                                     DetectionPattern({0, 1, 1}), DetectionPattern({2, 0, 0})})
    EXPECT_NEAR(same.probability(p), marginal[p.counts()], 1e-12) << p.to_string();
}

TEST(Oracle, AutomaticCutoffKeepsLossBelowEpsilon) {
  SourceConfig cfg;
  cfg.r = 0.5;
  cfg.alpha_mag = 0.8;
  const FockOracle oracle(cfg, TransferMatrix::identity(3), 3);
  EXPECT_GE(oracle.cutoff(), 6);
  EXPECT_LT(oracle.truncation_loss(), 1e-9);
}

TEST(Oracle, ExplicitCutoffTooSmallIsRejected) {
  SourceConfig cfg;
  cfg.r = 0.9;
  cfg.alpha_mag = 1.5;
  EXPECT_THROW(FockOracle(cfg, TransferMatrix::identity(3), 2, 4, 1e-9), ResourceError);
}

TEST(Oracle, AgreesWithHafnianEngine) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 4; ++trial) {
    SourceConfig cfg;
    cfg.r = 0.2 + 0.1 * trial;
    cfg.alpha_mag = 0.3 + 0.15 * trial;
    cfg.phi = 0.7 * trial;
    const MatrixXc l = testing::random_subunitary(3, rng);
    const TransferMatrix t(l.transpose());
    const Scenario sc{cfg, t};
    const ProbabilityEngine engine(sc.output_state());
    const FockOracle oracle(cfg, t, 4);
    for (int n = 0; n <= 4; ++n)
      for (const auto& p : enumerate_patterns(3, n, false))
        EXPECT_NEAR(engine.probability(p, ModelSpec::full()), oracle.probability(p), 1e-9) << p.to_string();
  }
}

}  // namespace
}  // namespace dgbs
