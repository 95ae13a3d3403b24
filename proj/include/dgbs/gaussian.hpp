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

#include <array>
#include <cstdint>
#include <optional>

#include "dgbs/types.hpp"

namespace dgbs {

/// Multimode Gaussian state in doubled (a_1..a_d, a_1^dag..a_d^dag) ordering.
///
/// sigma is the symmetrised covariance of that operator vector (vacuum has
/// sigma = I/2) and delta = (<a>, conj(<a>)). The constructor enforces the
/// block structure [[G, M], [conj(M), conj(G)]] with G Hermitian and M
/// symmetric, and the conjugate pairing of delta.
class GaussianState {
 public:
  GaussianState(MatrixXc sigma, VectorXc delta);

  static GaussianState vacuum(Index modes);

  Index modes() const { return modes_; }
  const MatrixXc& sigma() const { return sigma_; }
  const VectorXc& delta() const { return delta_; }

  /// Normally ordered block <a_k^dag a_j> + delta_jk/2 - delta_j conj(delta_k).
  auto normal_block() const { return sigma_.topLeftCorner(modes_, modes_); }
  /// Anomalous block <a_j a_k> - delta_j delta_k.
  auto anomalous_block() const { return sigma_.topRightCorner(modes_, modes_); }
  /// First d entries of delta, <a_j>.
  auto amplitudes() const { return delta_.head(modes_); }

  /// Mean photon number per mode.
  VectorXd mean_photons() const;
  double total_mean_photons() const { return mean_photons().sum(); }

  std::uint64_t hash() const;

 private:
  Index modes_;
  MatrixXc sigma_;
  VectorXc delta_;
};

/// Sub-unitary map from m used input ports to d output ports. Entry (i, j) is
/// the amplitude for a photon entering input i to leave through output j.
class TransferMatrix {
 public:
  explicit TransferMatrix(MatrixXc t);

  static TransferMatrix identity(Index d) { return TransferMatrix(MatrixXc::Identity(d, d)); }

  Index inputs() const { return t_.rows(); }
  Index outputs() const { return t_.cols(); }
  const MatrixXc& matrix() const { return t_; }

  /// d x d mode map L with a_out_j = sum_i L(j, i) a_in_i. Inputs beyond the
  /// m characterised ports are padded with zero columns (vacuum, lost).
  MatrixXc propagator() const;

  /// Largest singular value of T.
  double spectral_norm() const;

 private:
  MatrixXc t_;
};

/// Per-stage efficiencies of the optical path.
struct Efficiencies {
  double coupling = 1.0;
  double grating = 1.0;
  double propagation = 1.0;
  double detection = 1.0;

  /// eta_c * eta_g^2 * eta_p * eta_d (the grating coupler is crossed twice).
  double total() const { return coupling * grating * grating * propagation * detection; }
};

/// Two-mode squeezed vacuum plus one coherent state injected into distinct
/// input ports.
struct SourceConfig {
  double r = 0.0;          ///< two-mode squeezing parameter
  double alpha_mag = 0.0;  ///< |alpha|
  double phi = 0.0;        ///< coherent phase, radians
  std::optional<std::array<Index, 2>> squeezer_ports = std::array<Index, 2>{0, 1};
  std::optional<Index> coherent_port = Index{2};
  Efficiencies eta;

  double eta_total() const { return eta.total(); }
  double n_alpha() const { return alpha_mag * alpha_mag; }
  /// Mean squeezer photons per pulse and per mode reaching the detectors.
  double n_pdc() const;

  /// Throws ConfigError on out-of-range values or overlapping ports.
  void validate(Index total_modes) const;
};

/// How a measured squeezer photon rate is attributed.
enum class PdcRate { kPerMode, kTotal };

/// r = asinh(sqrt(<n_PDC> / eta_tot)); with PdcRate::kTotal the rate is first
/// split evenly between the two squeezer modes.
double squeezing_from_detected(double n_pdc, double eta_total, PdcRate rate = PdcRate::kPerMode);

/// Kernel matrix A = X (I - Sigma_Q^{-1}) = [[B, C], [C^T, conj(B)]].
class AMatrix {
 public:
  /// From the full 2d x 2d kernel.
  explicit AMatrix(MatrixXc a);
  /// From the blocks; B symmetric, C Hermitian.
  AMatrix(const MatrixXc& b, const MatrixXc& c);

  Index modes() const { return modes_; }
  const MatrixXc& full() const { return a_; }
  MatrixXc b() const { return a_.topLeftCorner(modes_, modes_); }
  MatrixXc c() const { return a_.topRightCorner(modes_, modes_); }
  /// Sigma_Q^{-1} = I - X A.
  MatrixXc sigma_q_inv() const;

 private:
  Index modes_;
  MatrixXc a_;
};

/// gamma = delta^dag Sigma_Q^{-1}, stored as a length-2d column.
struct GammaVector {
  VectorXc gamma;

  Index modes() const { return gamma.size() / 2; }
  auto head() const { return gamma.head(gamma.size() / 2); }

  static GammaVector zero(Index d) { return {VectorXc::Zero(2 * d)}; }
  /// Builds (g, conj(g)) from the first-half entries.
  static GammaVector from_amplitudes(const VectorXc& g);
};

/// Squeezed-thermal parameters of the closest classical approximant to a lossy
/// squeezed vacuum. Quadrature variances use vacuum = 1.
struct ClassicalStateParams {
  double a_plus = 1.0;
  double a_minus = 1.0;
  double s_c = 0.0;
  double n_th = 0.0;
  double s = 0.0;
};

/// Hermitian factorisation of Sigma_Q.
struct QFactor {
  MatrixXc sigma_q;
  MatrixXc sigma_q_inv;
  double log_det = 0.0;
  double condition = 1.0;
};

inline constexpr double kMaxCondition = 1e12;

// --- state construction -----------------------------------------------------

GaussianState coherent_state(const VectorXc& alpha);
/// Single-mode squeezed vacuum on `mode` of a d-mode register, <a a> = e^{i theta} sinh r cosh r.
GaussianState squeezed_vacuum(Index d, Index mode, double r, double theta = 0.0);
/// Two-mode squeezed vacuum on (p, q) with <a_p a_q> = sinh r cosh r.
GaussianState two_mode_squeezed_vacuum(Index d, Index p, Index q, double r);

/// Pre-interferometer state for a source configuration.
GaussianState build_input_state(const SourceConfig& config, Index total_modes);

/// Passes a state through a (lossy) linear-optical map.
GaussianState propagate(const GaussianState& state, const TransferMatrix& t);
/// Same as propagate, with an explicit d x d mode map (a_out = L a_in).
GaussianState propagate_modes(const GaussianState& state, const MatrixXc& l);

/// Sigma + I/2.
MatrixXc q_covariance(const GaussianState& state);
/// Eigen-decomposition based factorisation; throws NumericalError when Sigma_Q
/// is not positive definite or its condition number exceeds kMaxCondition.
QFactor factor_q(const GaussianState& state);

AMatrix a_matrix(const GaussianState& state);
GammaVector gamma_vector(const GaussianState& state);

/// exp(-delta^dag Sigma_Q^{-1} delta / 2) / sqrt(det Sigma_Q).
double vacuum_probability(const GaussianState& state);
double log_vacuum_probability(const GaussianState& state);

/// Inverse of (a_matrix, gamma_vector).
GaussianState state_from_a(const AMatrix& a, const GammaVector& gamma);

ClassicalStateParams closest_classical_state(double r, double eta);

/// Classical surrogate input: the two squeezer modes are replaced by squeezed
/// thermal states combined on a balanced beam splitter. Because the transfer
/// matrix already carries the end-to-end loss eta_tot, each squeezed thermal
/// state is the one whose image under loss eta_tot is the closest classical
/// state of the lossy squeezed vacuum.
GaussianState build_classical_input(const SourceConfig& config, Index total_modes);

// --- gauge and phase ------------------------------------------------------

/// Applies the local mode rotation a_j -> e^{i theta_j} a_j to (A, gamma).
/// Photon-number statistics are invariant under it.
void rotate_modes(AMatrix& a, GammaVector& gamma, const VectorXd& theta);

/// gamma for a coherent phase shifted by phi: first half times e^{i phi}.
GammaVector shift_coherent_phase(const GammaVector& gamma, double phi);

}  // namespace dgbs
