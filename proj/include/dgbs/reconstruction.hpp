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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dgbs/gaussian.hpp"
#include "dgbs/records.hpp"

namespace dgbs {

/// y = a + b cos(2 phi + c), fitted linearly on {1, cos 2phi, sin 2phi}.
struct FringeFit {
  double a = 0.0;
  double b = 0.0;  ///< >= 0, the sign lives in c
  double c = 0.0;  ///< in [-pi, pi)
  double residual = 0.0;  ///< chi^2 per degree of freedom (weighted) or mean square (unweighted)
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();  ///< covariance of (a, b, c)
  int windows = 1;

  double sigma_a() const { return std::sqrt(cov(0, 0)); }
  double sigma_b() const { return std::sqrt(cov(1, 1)); }
  double sigma_c() const { return std::sqrt(cov(2, 2)); }
  double value(double phi) const { return a + b * std::cos(2.0 * phi + c); }
};

/// Single least-squares fit. Empty `sigma` means unweighted, with the
/// covariance scaled by the residual variance.
FringeFit fit_fringe(std::span<const double> phi, std::span<const double> values, std::span<const double> sigma = {});

/// Splits the scan into 2 pi windows, fits each and averages the `keep`
/// windows with the smallest residual. For count data the residual of a
/// Poisson window grows with its level, so ranking on the raw residual
/// prefers windows that fluctuated low; `level_scaled` divides each
/// window's residual by its fitted offset to remove that preference.
FringeFit fit_fringe_windows(std::span<const double> phi, std::span<const double> values,
                             std::span<const double> sigma = {}, int keep = 5, bool level_scaled = false);

/// Per-entry status bits.
enum EntryFlag : unsigned {
  kEntryOk = 0,
  kClamped = 1u << 0,           ///< negative radicand set to 0
  kUndetermined = 1u << 1,      ///< no direct estimate (e.g. gamma_j gamma_k ~ 0)
  kImSignUnresolved = 1u << 2,  ///< sign of Im C not fixed by the second input
  kInconsistent = 1u << 3,      ///< Im C from the second input disagrees with |C|
  kInvalidArgument = 1u << 4,   ///< |Re C| > |C|
  kOptimized = 1u << 5,         ///< phase set by the threefold optimizer
  kDiagonalUnknown = 1u << 6,   ///< no collision outcomes recorded
};

struct OptimizerOptions {
  int restarts = 10;
  double initial_step = 0.5;  ///< rad
  double final_step = 1e-5;   ///< rad
  double restart_sigma = 0.5; ///< rad, spread around direct estimates
  int max_evaluations = 20000;
  std::uint64_t seed = 1;
};

struct ReconstructionOptions {
  bool weighted = true;
  int windows = 5;
  /// Rank windows on level-scaled residuals (see fit_fringe_windows).
  bool level_scaled_ranking = true;
  /// gamma_j gamma_k below this fraction of max(gamma)^2 leaves B_jk undetermined.
  double gamma_tolerance = 1e-6;
  /// |Im(mu_j^* mu_k)| / |mu_j mu_k| below this takes Im C's magnitude from |C|.
  double degeneracy_tolerance = 0.2;
  bool optimize = true;
  OptimizerOptions optimizer;
};

/// One optimised phase.
struct PhaseParameter {
  Index j = 0;
  Index k = 0;
  bool is_b = false;  ///< B_jk (true) or C_jk (false)
  double start = 0.0;
  double value = 0.0;
  double spread = 0.0;  ///< circular std over restarts
  bool has_estimate = false;
};

struct OptimizationReport {
  std::vector<PhaseParameter> parameters;
  double objective_before = 0.0;
  double objective_after = 0.0;
  std::vector<double> run_objectives;
  int evaluations = 0;
  bool converged = true;
};

struct ReconstructionResult {
  AMatrix a{MatrixXc::Zero(2, 2)};
  VectorXd gamma;          ///< real, >= 0
  VectorXc mu;             ///< second-input response, arg mu_ref = 0 (empty without input2)
  Index mu_reference = -1;
  Eigen::MatrixXi flags_b;
  Eigen::MatrixXi flags_c;
  Eigen::VectorXi flags_gamma;
  Eigen::VectorXi flags_mu;
  MatrixXd sigma_b_abs, sigma_b_arg, sigma_c_re, sigma_c_im;
  VectorXd sigma_c_diag, sigma_gamma;
  OptimizationReport optimization;
  bool physical = false;
  std::vector<std::string> notes;

  Index modes() const { return a.modes(); }
  GammaVector gamma_vector() const { return GammaVector::from_amplitudes(gamma.cast<Complex>()); }
};

// --- individual steps --------------------------------------------------------

/// C_jj = p_j with sigma = sqrt(counts) / vacuum counts.
std::pair<VectorXd, VectorXd> recover_c_diag(const MeasurementRecord& blocked);

/// gamma_j = sqrt(p'_j - C_jj); negative radicands are clamped and flagged.
VectorXd recover_gamma(const MeasurementRecord& input1, const VectorXd& c_diag, Eigen::VectorXi* flags = nullptr);

/// Fringe of the j-k twofold rate (j == k: twice the n_j = 2 rate) across a
/// scanned record.
FringeFit fit_pair_fringe(const MeasurementRecord& record, Index j, Index k, const ReconstructionOptions& options);

/// Im C from the second-input fringe offset term X = Re[C mu_j^* mu_k].
double resolve_im_c(double re_c, double x, Complex mu_j, Complex mu_k);

/// Minimises the TVD between the pooled input1 threefolds and the
/// phase-averaged predictions over the listed phases (entries of `a`).
OptimizationReport optimize_undetermined_phases(MatrixXc& b, MatrixXc& c, const VectorXd& gamma,
                                                std::vector<PhaseParameter> parameters,
                                                const MeasurementRecord& input1, const OptimizerOptions& options);

/// Full pipeline. Needs blocked and input1 records; input2 is optional.
ReconstructionResult reconstruct(const std::vector<MeasurementRecord>& records,
                                 const ReconstructionOptions& options = {});

/// Applies the reconstruction gauge to a known state: modes rotated so gamma
/// is real and nonnegative. Returns the rotation angles.
VectorXd gauge_fix(AMatrix& a, GammaVector& gamma);

}  // namespace dgbs
