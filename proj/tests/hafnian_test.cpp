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

#include "dgbs/hafnian.hpp"

#include <gtest/gtest.h>

#include "dgbs/gaussian.hpp"
#include "test_util.hpp"

namespace dgbs {
namespace {

// Pairs the first free index with every other (or leaves it as a loop) and
// recurses; pair_budget < 0 means unlimited.
Complex recursive_lhaf(const MatrixXc& m, const VectorXc& w, std::vector<Index> rest, int pair_budget) {
  if (rest.empty()) return 1.0;
  const Index i = rest.front();
  std::vector<Index> tail(rest.begin() + 1, rest.end());
  Complex total = w(i) * recursive_lhaf(m, w, tail, pair_budget);
  if (pair_budget == 0) return total;
  for (std::size_t k = 0; k < tail.size(); ++k) {
    std::vector<Index> next = tail;
    next.erase(next.begin() + static_cast<std::ptrdiff_t>(k));
    total += m(i, tail[k]) * recursive_lhaf(m, w, next, pair_budget < 0 ? -1 : pair_budget - 1);
  }
  return total;
}

Complex recursive_lhaf(const MatrixXc& m, const VectorXc& w, int pair_budget = -1) {
  std::vector<Index> all(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) all[i] = i;
  return recursive_lhaf(m, w, all, pair_budget);
}

TEST(Hafnian, SmallClosedForms) {
  MatrixXc m2(2, 2);
  m2 << 0.0, Complex(1.5, -0.5), Complex(1.5, -0.5), 0.0;
  EXPECT_NEAR(std::abs(hafnian(m2) - Complex(1.5, -0.5)), 0.0, 1e-15);

  std::mt19937_64 rng(1);
  const MatrixXc m4 = testing::random_symmetric(4, rng);
  const Complex expected = m4(0, 1) * m4(2, 3) + m4(0, 2) * m4(1, 3) + m4(0, 3) * m4(1, 2);
  EXPECT_NEAR(std::abs(hafnian(m4) - expected), 0.0, 1e-13);
  EXPECT_NEAR(std::abs(hafnian(MatrixXc(0, 0)) - Complex(1.0)), 0.0, 0.0);
}

TEST(Hafnian, AllOnesCountsPerfectMatchings) {
  // (2n - 1)!!
  const double expected[] = {1, 1, 3, 15, 105, 945, 10395};
  for (int n = 0; n <= 6; ++n) {
    const MatrixXd ones = MatrixXd::Ones(2 * n, 2 * n);
    EXPECT_DOUBLE_EQ(hafnian(ones), expected[n]);
    EXPECT_DOUBLE_EQ(hafnian_enumerate(ones), expected[n]);
  }
}

TEST(LoopHafnian, AllOnesCountsInvolutions) {
  // Number of involutions of 2n points.
  const double expected[] = {1, 2, 10, 76, 764, 9496};
  for (int n = 0; n <= 5; ++n) {
    const MatrixXd ones = MatrixXd::Ones(2 * n, 2 * n);
    EXPECT_DOUBLE_EQ(loop_hafnian(ones, VectorXd::Ones(2 * n)), expected[n]);
  }
}

TEST(LoopHafnian, ZeroLoopsGiveHafnian) {
  std::mt19937_64 rng(2);
  const MatrixXc m = testing::random_symmetric(8, rng);
  EXPECT_NEAR(std::abs(loop_hafnian(m, VectorXc::Zero(8)) - hafnian(m)), 0.0, 1e-10);
}

TEST(LoopHafnian, AgreesWithIndependentRecursion) {
  std::mt19937_64 rng(3);
  for (int n = 2; n <= 12; n += 2) {
    const MatrixXc m = testing::random_symmetric(n, rng);
    const VectorXc w = testing::random_symmetric(n, rng).col(0);
    const Complex ref = recursive_lhaf(m, w);
    const double scale = std::max(1.0, std::abs(ref));
    EXPECT_LT(std::abs(loop_hafnian(m, w) - ref) / scale, 1e-11) << n;
    EXPECT_LT(std::abs(loop_hafnian_enumerate(m, w) - ref) / scale, 1e-11) << n;
  }
}

TEST(LoopHafnian, LoopsOutsideDiagonalAreUsed) {
  // The loop weights are independent of m's diagonal.
  std::mt19937_64 rng(4);
  MatrixXc m = testing::random_symmetric(6, rng);
  const VectorXc w = VectorXc::Constant(6, Complex(0.3, 0.2));
  const Complex before = loop_hafnian(m, w);
  m.diagonal().setConstant(99.0);
  EXPECT_NEAR(std::abs(loop_hafnian(m, w) - before), 0.0, 1e-12);
}

TEST(LoopHafnian, KOrderTruncation) {
  std::mt19937_64 rng(5);
  const int n = 10;
  const MatrixXc m = testing::random_symmetric(n, rng);
  const VectorXc w = testing::random_symmetric(n, rng).col(1);
  for (int k = 0; k <= n / 2; ++k) {
    const Complex ref = recursive_lhaf(m, w, k);
    EXPECT_LT(std::abs(loop_hafnian_korder(m, w, k) - ref), 1e-10 * std::max(1.0, std::abs(ref))) << k;
    EXPECT_LT(std::abs(loop_hafnian_enumerate(m, w, k) - ref), 1e-10 * std::max(1.0, std::abs(ref))) << k;
  }
  EXPECT_NEAR(std::abs(loop_hafnian_korder(m, w, n) - loop_hafnian(m, w)), 0.0, 1e-10);
}

TEST(LoopHafnian, KOrderZeroIsProductOfLoops) {
  std::mt19937_64 rng(6);
  const MatrixXc m = testing::random_symmetric(6, rng);
  const VectorXc w = testing::random_symmetric(6, rng).col(0);
  EXPECT_NEAR(std::abs(loop_hafnian_korder(m, w, 0) - w.prod()), 0.0, 1e-13);
}

TEST(LoopHafnian, GradedTermsSumToTotal) {
  std::mt19937_64 rng(7);
  const MatrixXc m = testing::random_symmetric(8, rng);
  const VectorXc w = testing::random_symmetric(8, rng).col(2);
  const auto graded = loop_hafnian_by_pairs(m, w);
  ASSERT_EQ(graded.size(), 5u);
  Complex sum = 0.0;
  for (const Complex& g : graded) sum += g;
  EXPECT_NEAR(std::abs(sum - loop_hafnian(m, w)), 0.0, 1e-10);
  // With all-ones inputs each grade counts matchings with exactly p pairs.
  const auto counts = loop_hafnian_by_pairs(MatrixXd::Ones(8, 8), VectorXd::Ones(8));
  for (int p = 0; p <= 4; ++p) EXPECT_DOUBLE_EQ(counts[p], matchings_with_pairs(8, p));
}

TEST(LoopHafnian, MatchingCounts) {
  EXPECT_DOUBLE_EQ(matchings_with_pairs(6, 0), 1.0);
  EXPECT_DOUBLE_EQ(matchings_with_pairs(6, 1), 15.0);
  EXPECT_DOUBLE_EQ(matchings_with_pairs(6, 2), 45.0);
  EXPECT_DOUBLE_EQ(matchings_with_pairs(6, 3), 15.0);
  EXPECT_DOUBLE_EQ(matchings_with_pairs(6, 4), 0.0);
}

TEST(Hafnian, RejectsMalformedInput) {
  EXPECT_THROW(hafnian(MatrixXd::Ones(3, 3)), DimensionError);
  MatrixXd asym = MatrixXd::Zero(4, 4);
  asym(0, 1) = 1.0;
  EXPECT_THROW(hafnian(asym), DimensionError);
  EXPECT_THROW(loop_hafnian(MatrixXd::Ones(4, 4), VectorXd::Ones(3)), DimensionError);
  EXPECT_THROW(loop_hafnian_korder(MatrixXd::Ones(4, 4), VectorXd::Ones(4), -1), DimensionError);
}

TEST(DetectionPattern, TextRoundTrip) {
  const DetectionPattern cf({0, 1, 1, 0, 1});
  EXPECT_EQ(cf.to_string(), "01101");
  EXPECT_EQ(DetectionPattern::parse("01101"), cf);
  const DetectionPattern pnr({2, 0, 1});
  EXPECT_EQ(pnr.to_string(), "2.0.1");
  EXPECT_EQ(DetectionPattern::parse("2.0.1"), pnr);
  EXPECT_FALSE(pnr.collision_free());
  EXPECT_EQ(pnr.total(), 3);
}

TEST(DetectionPattern, KernelIndicesRepeatModes) {
  const DetectionPattern n({2, 0, 1});
  const std::vector<Index> expected{0, 0, 2, 3, 3, 5};
  EXPECT_EQ(n.kernel_indices(), expected);
}

TEST(DetectionPattern, ReducedKernelShape) {
  SourceConfig cfg;
  cfg.r = 0.3;
  cfg.alpha_mag = 0.5;
  const GaussianState s = build_input_state(cfg, 4);
  const AMatrix a = a_matrix(s);
  const GammaVector g = gamma_vector(s);
  const ReducedKernel k = reduce_by_pattern(a, g, DetectionPattern({1, 1, 0, 0}));
  EXPECT_EQ(k.size(), 4);
  EXPECT_NEAR(std::abs(k.a_n(0, 1) - a.full()(0, 1)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(k.gamma_tilde(2) - g.gamma(4)), 0.0, 1e-15);
}

}  // namespace
}  // namespace dgbs
