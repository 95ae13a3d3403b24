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

#include "dgbs/gaussian.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace dgbs {
namespace {

double structure_tolerance(const MatrixXc& m) { return 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff()); }

MatrixXc doubled(const MatrixXc& l) {
  const Index d = l.rows();
  MatrixXc s = MatrixXc::Zero(2 * d, 2 * d);
  s.topLeftCorner(d, d) = l;
  s.bottomRightCorner(d, d) = l.conjugate();
  return s;
}

void check_ports(Index total_modes, Index port, const char* what) {
  if (port < 0 || port >= total_modes) {
    std::ostringstream msg;
    msg << what << " port " << port << " outside [0, " << total_modes << ")";
    throw ConfigError(msg.str());
  }
}

}  // namespace

// --- GaussianState ----------------------------------------------------------

GaussianState::GaussianState(MatrixXc sigma, VectorXc delta)
    : modes_(sigma.rows() / 2), sigma_(std::move(sigma)), delta_(std::move(delta)) {
  if (sigma_.rows() != sigma_.cols() || sigma_.rows() % 2 != 0 || sigma_.rows() == 0) {
    throw DimensionError("covariance must be a non-empty 2d x 2d matrix");
  }
  if (delta_.size() != sigma_.rows()) {
    throw DimensionError("displacement length must match the covariance size");
  }
  const Index d = modes_;
  const double tol = structure_tolerance(sigma_);
  const MatrixXc g = sigma_.topLeftCorner(d, d);
  const MatrixXc m = sigma_.topRightCorner(d, d);
  if ((g - g.adjoint()).cwiseAbs().maxCoeff() > tol) {
    throw PhysicalityError("covariance block G is not Hermitian");
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol) {
    throw PhysicalityError("covariance block M is not symmetric");
  }
  if ((sigma_.bottomLeftCorner(d, d) - m.conjugate()).cwiseAbs().maxCoeff() > tol ||
      (sigma_.bottomRightCorner(d, d) - g.conjugate()).cwiseAbs().maxCoeff() > tol) {
    throw PhysicalityError("covariance lacks the [[G, M], [M*, G*]] structure");
  }
  const double dtol = 1e-10 * std::max(1.0, delta_.cwiseAbs().maxCoeff());
  if ((delta_.tail(d) - delta_.head(d).conjugate()).cwiseAbs().maxCoeff() > dtol) {
    throw PhysicalityError("displacement lacks the (delta, conj(delta)) pairing");
  }
}

GaussianState GaussianState::vacuum(Index modes) {
  return GaussianState(MatrixXc::Identity(2 * modes, 2 * modes) * 0.5, VectorXc::Zero(2 * modes));
}

VectorXd GaussianState::mean_photons() const {
  VectorXd n(modes_);
  for (Index j = 0; j < modes_; ++j) {
    n(j) = sigma_(j, j).real() - 0.5 + std::norm(delta_(j));
  }
  return n;
}

std::uint64_t GaussianState::hash() const {
  std::uint64_t h = fnv1a(sigma_.data(), sizeof(Complex) * sigma_.size());
  return fnv1a(delta_.data(), sizeof(Complex) * delta_.size(), h);
}

// --- TransferMatrix ---------------------------------------------------------

TransferMatrix::TransferMatrix(MatrixXc t) : t_(std::move(t)) {
  if (t_.rows() == 0 || t_.cols() == 0) throw DimensionError("empty transfer matrix");
  if (t_.rows() > t_.cols()) throw DimensionError("transfer matrix has more inputs than outputs");
  if (spectral_norm() > 1.0 + 1e-12) {
    std::ostringstream msg;
    msg << "transfer matrix is not sub-unitary (largest singular value " << spectral_norm() << ")";
    throw PhysicalityError(msg.str());
  }
}

double TransferMatrix::spectral_norm() const {
  Eigen::JacobiSVD<MatrixXc> svd(t_);
  return svd.singularValues()(0);
}

MatrixXc TransferMatrix::propagator() const {
  const Index d = outputs();
  MatrixXc l = MatrixXc::Zero(d, d);
  l.leftCols(inputs()) = t_.transpose();
  return l;
}

// --- SourceConfig -----------------------------------------------------------

double SourceConfig::n_pdc() const {
  const double s = std::sinh(r);
  return eta_total() * s * s;
}

void SourceConfig::validate(Index total_modes) const {
  if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("squeezing r must be finite and >= 0");
  if (!(alpha_mag >= 0.0) || !std::isfinite(alpha_mag)) {
    throw ConfigError("coherent amplitude must be finite and >= 0");
  }
  for (double e : {eta.coupling, eta.grating, eta.propagation, eta.detection}) {
    if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("efficiencies must lie in [0, 1]");
  }
  if (squeezer_ports) {
    check_ports(total_modes, (*squeezer_ports)[0], "squeezer");
    check_ports(total_modes, (*squeezer_ports)[1], "squeezer");
    if ((*squeezer_ports)[0] == (*squeezer_ports)[1]) throw ConfigError("squeezer ports overlap");
  }
  if (coherent_port) {
    check_ports(total_modes, *coherent_port, "coherent");
    if (squeezer_ports && ((*squeezer_ports)[0] == *coherent_port || (*squeezer_ports)[1] == *coherent_port)) {
      throw ConfigError("coherent port overlaps a squeezer port");
    }
  }
}

double squeezing_from_detected(double n_pdc, double eta_total, PdcRate rate) {
  if (!(eta_total > 0.0)) throw ConfigError("eta_tot must be positive");
  if (n_pdc < 0.0) throw ConfigError("<n_PDC> must be >= 0");
  const double per_mode = rate == PdcRate::kTotal ? n_pdc / 2.0 : n_pdc;
  return std::asinh(std::sqrt(per_mode / eta_total));
}

// --- AMatrix / GammaVector --------------------------------------------------

AMatrix::AMatrix(MatrixXc a) : modes_(a.rows() / 2), a_(std::move(a)) {
  if (a_.rows() != a_.cols() || a_.rows() % 2 != 0) throw DimensionError("A must be 2d x 2d");
}

AMatrix::AMatrix(const MatrixXc& b, const MatrixXc& c) : modes_(b.rows()) {
  if (b.rows() != b.cols() || c.rows() != b.rows() || c.cols() != b.cols()) {
    throw DimensionError("B and C must be square blocks of equal size");
  }
  a_.resize(2 * modes_, 2 * modes_);
  a_ << b, c, c.transpose(), b.conjugate();
}

MatrixXc AMatrix::sigma_q_inv() const {
  return MatrixXc::Identity(2 * modes_, 2 * modes_) - swap_matrix(modes_) * a_;
}

GammaVector GammaVector::from_amplitudes(const VectorXc& g) {
  VectorXc full(2 * g.size());
  full << g, g.conjugate();
  return {full};
}

// --- construction -----------------------------------------------------------

GaussianState coherent_state(const VectorXc& alpha) {
  const Index d = alpha.size();
  VectorXc delta(2 * d);
  delta << alpha, alpha.conjugate();
  return GaussianState(MatrixXc::Identity(2 * d, 2 * d) * 0.5, delta);
}

GaussianState squeezed_vacuum(Index d, Index mode, double r, double theta) {
  MatrixXc sigma = MatrixXc::Identity(2 * d, 2 * d) * 0.5;
  const double sh = std::sinh(r);
  const Complex m = std::polar(sh * std::cosh(r), theta);
  sigma(mode, mode) += sh * sh;
  sigma(mode + d, mode + d) += sh * sh;
  sigma(mode, mode + d) = m;
  sigma(mode + d, mode) = std::conj(m);
  return GaussianState(sigma, VectorXc::Zero(2 * d));
}

GaussianState two_mode_squeezed_vacuum(Index d, Index p, Index q, double r) {
  MatrixXc sigma = MatrixXc::Identity(2 * d, 2 * d) * 0.5;
  const double sh = std::sinh(r);
  const double m = sh * std::cosh(r);
  for (Index j : {p, q}) {
    sigma(j, j) += sh * sh;
    sigma(j + d, j + d) += sh * sh;
  }
  sigma(p, q + d) = sigma(q, p + d) = m;
  sigma(p + d, q) = sigma(q + d, p) = m;
  return GaussianState(sigma, VectorXc::Zero(2 * d));
}

namespace {

GaussianState with_coherent(const GaussianState& base, const SourceConfig& config) {
  if (!config.coherent_port || config.alpha_mag == 0.0) return base;
  VectorXc delta = base.delta();
  const Index d = base.modes();
  const Complex alpha = std::polar(config.alpha_mag, config.phi);
  delta(*config.coherent_port) = alpha;
  delta(*config.coherent_port + d) = std::conj(alpha);
  return GaussianState(base.sigma(), delta);
}

}  // namespace

GaussianState build_input_state(const SourceConfig& config, Index total_modes) {
  config.validate(total_modes);
  GaussianState state = GaussianState::vacuum(total_modes);
  if (config.squeezer_ports && config.r > 0.0) {
    state = two_mode_squeezed_vacuum(total_modes, (*config.squeezer_ports)[0], (*config.squeezer_ports)[1], config.r);
  }
  return with_coherent(state, config);
}

GaussianState propagate_modes(const GaussianState& state, const MatrixXc& l) {
  const Index d = state.modes();
  if (l.rows() != d || l.cols() != d) throw DimensionError("mode map does not match the state's mode count");
  Eigen::JacobiSVD<MatrixXc> svd(l);
  if (svd.singularValues()(0) > 1.0 + 1e-12) throw PhysicalityError("mode map is not sub-unitary");
  const MatrixXc s = doubled(l);
  const MatrixXc id = MatrixXc::Identity(2 * d, 2 * d);
  MatrixXc sigma = s * state.sigma() * s.adjoint() + 0.5 * (id - s * s.adjoint());
  // Remove rounding asymmetry so the block-structure check sees exact pairs.
  sigma = 0.5 * (sigma + sigma.adjoint()).eval();
  VectorXc delta = s * state.delta();
  return GaussianState(sigma, delta);
}

GaussianState propagate(const GaussianState& state, const TransferMatrix& t) {
  if (t.outputs() != state.modes()) {
    throw DimensionError("transfer matrix output count does not match the state's mode count");
  }
  return propagate_modes(state, t.propagator());
}

// --- derived quantities -----------------------------------------------------

MatrixXc q_covariance(const GaussianState& state) {
  return state.sigma() + 0.5 * MatrixXc::Identity(state.sigma().rows(), state.sigma().cols());
}

QFactor factor_q(const GaussianState& state) {
  QFactor f;
  f.sigma_q = q_covariance(state);
  Eigen::SelfAdjointEigenSolver<MatrixXc> eig(f.sigma_q);
  const VectorXd& lambda = eig.eigenvalues();
  const double lo = lambda.minCoeff();
  const double hi = lambda.maxCoeff();
  f.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(lo > 0.0) || f.condition > kMaxCondition) {
    std::ostringstream msg;
    msg << "Sigma_Q is singular or not positive definite (condition number " << f.condition << ")";
    throw NumericalError(msg.str());
  }
  const MatrixXc& v = eig.eigenvectors();
  f.sigma_q_inv = v * lambda.cwiseInverse().cast<Complex>().asDiagonal() * v.adjoint();
  f.log_det = lambda.array().log().sum();
  return f;
}

AMatrix a_matrix(const GaussianState& state) {
  const QFactor f = factor_q(state);
  const Index n = 2 * state.modes();
  return AMatrix(swap_matrix(state.modes()) * (MatrixXc::Identity(n, n) - f.sigma_q_inv));
}

GammaVector gamma_vector(const GaussianState& state) {
  const QFactor f = factor_q(state);
  return {(f.sigma_q_inv * state.delta()).conjugate()};
}

double log_vacuum_probability(const GaussianState& state) {
  const QFactor f = factor_q(state);
  const double quad = state.delta().dot(f.sigma_q_inv * state.delta()).real();
  return -0.5 * quad - 0.5 * f.log_det;
}

double vacuum_probability(const GaussianState& state) { return std::exp(log_vacuum_probability(state)); }

GaussianState state_from_a(const AMatrix& a, const GammaVector& gamma) {
  const Index d = a.modes();
  if (gamma.gamma.size() != 2 * d) throw DimensionError("gamma length does not match A");
  MatrixXc q_inv = a.sigma_q_inv();
  q_inv = 0.5 * (q_inv + q_inv.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXc> eig(q_inv);
  const VectorXd& lambda = eig.eigenvalues();
  const double lo = lambda.minCoeff();
  if (!(lo > 0.0) || lambda.maxCoeff() / lo > kMaxCondition) {
    throw PhysicalityError("I - X A is singular or does not yield a positive definite Sigma_Q");
  }
  const MatrixXc& v = eig.eigenvectors();
  MatrixXc q = v * lambda.cwiseInverse().cast<Complex>().asDiagonal() * v.adjoint();
  q = 0.5 * (q + q.adjoint()).eval();
  MatrixXc sigma = q - 0.5 * MatrixXc::Identity(2 * d, 2 * d);
  VectorXc delta = q * gamma.gamma.conjugate();
  // Enforce exact conjugate pairing of delta against rounding.
  delta.tail(d) = delta.head(d).conjugate();
  return GaussianState(sigma, delta);
}

// --- classical approximant --------------------------------------------------

ClassicalStateParams closest_classical_state(double r, double eta) {
  if (!(r >= 0.0)) throw ConfigError("r must be >= 0");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]");
  ClassicalStateParams p;
  p.a_plus = eta * std::exp(2.0 * r) + (1.0 - eta);
  p.a_minus = eta * std::exp(-2.0 * r) + (1.0 - eta);
  p.s_c = std::log(std::sqrt(p.a_plus * p.a_minus));
  p.n_th = -0.5 + 0.5 * std::sqrt(1.0 + 2.0 * std::sinh(2.0 * p.s_c) * std::sqrt(p.a_plus / p.a_minus));
  p.s = 0.5 * std::log(2.0 * p.n_th + 1.0);
  return p;
}

GaussianState build_classical_input(const SourceConfig& config, Index total_modes) {
  config.validate(total_modes);
  GaussianState state = GaussianState::vacuum(total_modes);
  const double eta = config.eta_total();
  if (config.squeezer_ports && config.r > 0.0 && eta > 0.0) {
    const ClassicalStateParams p = closest_classical_state(config.r, eta);
    // Squeezed thermal state after loss: diag((2n+1) e^{2s}, (2n+1) e^{-2s}).
    const double post_x = (2.0 * p.n_th + 1.0) * std::exp(2.0 * p.s);
    const double post_p = (2.0 * p.n_th + 1.0) * std::exp(-2.0 * p.s);
    // Undo the loss that the transfer matrix will apply.
    const double vx = (post_x - (1.0 - eta)) / eta;
    const double vp = (post_p - (1.0 - eta)) / eta;
    const Index d = total_modes;
    const auto [sp, sq] = *config.squeezer_ports;
    MatrixXc sigma = MatrixXc::Identity(2 * d, 2 * d) * 0.5;
    const double g = (vx + vp) / 4.0;
    const double m = (vx - vp) / 4.0;
    sigma(sp, sp) = sigma(sp + d, sp + d) = g;
    sigma(sq, sq) = sigma(sq + d, sq + d) = g;
    sigma(sp, sp + d) = sigma(sp + d, sp) = m;
    sigma(sq, sq + d) = sigma(sq + d, sq) = -m;
    MatrixXc bs = MatrixXc::Identity(d, d);
    const double h = 1.0 / std::sqrt(2.0);
    bs(sp, sp) = h;
    bs(sp, sq) = h;
    bs(sq, sp) = h;
    bs(sq, sq) = -h;
    state = propagate_modes(GaussianState(sigma, VectorXc::Zero(2 * d)), bs);
  }
  return with_coherent(state, config);
}

// --- gauge ------------------------------------------------------------------

void rotate_modes(AMatrix& a, GammaVector& gamma, const VectorXd& theta) {
  const Index d = a.modes();
  if (theta.size() != d || gamma.modes() != d) throw DimensionError("phase vector length mismatch");
  const VectorXc r = (Complex(0, -1) * theta.cast<Complex>()).array().exp().matrix();
  const MatrixXc b = r.asDiagonal() * a.b() * r.asDiagonal();
  const MatrixXc c = r.asDiagonal() * a.c() * r.conjugate().asDiagonal();
  a = AMatrix(b, c);
  gamma.gamma.head(d) = gamma.gamma.head(d).cwiseProduct(r);
  gamma.gamma.tail(d) = gamma.gamma.head(d).conjugate();
}

GammaVector shift_coherent_phase(const GammaVector& gamma, double phi) {
  GammaVector out = gamma;
  const Index d = gamma.modes();
  const Complex e = std::polar(1.0, phi);
  out.gamma.head(d) *= e;
  out.gamma.tail(d) *= std::conj(e);
  return out;
}

}  // namespace dgbs
