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
#include <vector>

#include "dgbs/gaussian.hpp"
#include "dgbs/hafnian.hpp"

namespace dgbs {

/// Truncated Fock-space state: occupation tuples (total photons <= cutoff)
/// mapped to amplitudes.
struct FockVector {
  Index modes = 0;
  int cutoff = 0;
  std::map<std::vector<int>, Complex> amplitudes;
  /// Probability mass of the exact state that the truncation dropped.
  double truncation_loss = 0.0;

  double norm_squared() const;
  Complex amplitude(const std::vector<int>& occupation) const;
};

/// Closed-form Fock expansion of the source: two-mode squeezed vacuum
/// sum_n tanh^n r / cosh r |n, n> and coherent state
/// e^{-|alpha|^2/2} sum_m alpha^m / sqrt(m!) |m>, vacuum elsewhere.
FockVector expand_inputs(const SourceConfig& config, Index total_modes, int cutoff);

/// Linear-optical map a_i^dag -> sum_j u(j, i) a_j^dag applied ket by ket.
FockVector apply_interferometer(const FockVector& psi, const MatrixXc& u);

/// Unitary on 2d modes whose top-left d x d block is the sub-unitary mode map
/// `l`; the extra d modes are vacuum ancillas that carry the loss.
MatrixXc dilate_lossy(const MatrixXc& l);
/// Dilation of T's propagator (a_out = L a_in).
MatrixXc dilate_lossy(const TransferMatrix& t);

/// Detection-pattern probabilities of the lossy circuit, obtained by expanding
/// the source in Fock space, passing it through the dilated unitary and
/// summing out the ancilla modes.
class FockOracle {
 public:
  /// cutoff == 0 picks the smallest total-photon cutoff >= max_photons + 3
  /// whose dropped source mass is below epsilon. An explicit cutoff that
  /// drops more than epsilon is doubled once before giving up with a
  /// ResourceError.
  FockOracle(const SourceConfig& config, const TransferMatrix& t, int max_photons, int cutoff = 0,
             double epsilon = 1e-9);

  double probability(const DetectionPattern& n) const;
  int cutoff() const { return cutoff_; }
  double truncation_loss() const { return loss_; }
  Index modes() const { return modes_; }

 private:
  Index modes_;
  int max_photons_;
  int cutoff_ = 0;
  double loss_ = 0.0;
  std::map<std::vector<int>, double> marginal_;
};

double oracle_probability(const SourceConfig& config, const TransferMatrix& t, const DetectionPattern& n,
                          int cutoff = 0, double epsilon = 1e-9);

/// Smallest total-photon cutoff >= floor whose dropped source mass is below epsilon.
int source_cutoff(const SourceConfig& config, int floor, double epsilon, int limit = 64);
/// Source mass with more than `cutoff` photons in total.
double source_tail_mass(const SourceConfig& config, int cutoff);

}  // namespace dgbs
