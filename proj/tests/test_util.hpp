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

#include <Eigen/QR>
#include <random>

#include "dgbs/types.hpp"

namespace dgbs::testing {

inline MatrixXc random_unitary(Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXc z(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) z(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<MatrixXc> qr(z);
  MatrixXc q = qr.householderQ();
  const MatrixXc r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j) q.col(j) *= r(j, j) / std::abs(r(j, j));
  return q;
}

inline MatrixXc random_subunitary(Index d, std::mt19937_64& rng, double eta_min = 0.3) {
  std::uniform_real_distribution<double> u(eta_min, 1.0);
  MatrixXc l = random_unitary(d, rng);
  for (Index j = 0; j < d; ++j) l.row(j) *= std::sqrt(u(rng));
  return l;
}

inline MatrixXc random_symmetric(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXc m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= i; ++j) m(i, j) = m(j, i) = Complex(g(rng), g(rng));
  return m;
}

}  // namespace dgbs::testing
