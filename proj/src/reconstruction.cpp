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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "dgbs/hafnian.hpp"
#include "dgbs/parallel.hpp"
#include "dgbs/probability.hpp"

namespace dgbs {
namespace {

struct LinearFit {
  Eigen::Vector3d theta = Eigen::Vector3d::Zero();  // a, u = b cos c, v = -b sin c
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double residual = 0.0;
};

LinearFit fit_linear(std::span<const double> phi, std::span<const double> y, std::span<const double> sigma) {
  const auto n = static_cast<Index>(phi.size());
  if (static_cast<Index>(y.size()) != n || (!sigma.empty() && static_cast<Index>(sigma.size()) != n))
    throw DimensionError("fringe data lengths differ");
  if (n < 3) throw NumericalError("a fringe fit needs at least three phase samples");
  const bool weighted = !sigma.empty();
  Eigen::MatrixXd j(n, 3);
  VectorXd rhs(n);
  for (Index i = 0; i < n; ++i) {
    double w = 1.0;
    if (weighted) {
      if (!(sigma[i] > 0.0)) throw NumericalError("fringe uncertainties must be positive");
      w = 1.0 / sigma[i];
    }
    j(i, 0) = w;
    j(i, 1) = w * std::cos(2.0 * phi[i]);
    j(i, 2) = w * std::sin(2.0 * phi[i]);
    rhs(i) = w * y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(j);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw NumericalError("phase grid cannot separate the fringe terms");
  LinearFit fit;
  fit.theta = qr.solve(rhs);
  const double rss = (j * fit.theta - rhs).squaredNorm();
  const Eigen::Matrix3d normal_inv = (j.transpose() * j).inverse();
  const Index dof = n - 3;
  if (weighted) {
    fit.cov = normal_inv;
    fit.residual = dof > 0 ? rss / static_cast<double>(dof) : 0.0;
  } else {
    fit.cov = (dof > 0 ? rss / static_cast<double>(dof) : 0.0) * normal_inv;
    fit.residual = rss / static_cast<double>(n);
  }
  return fit;
}

FringeFit to_polar(const LinearFit& lin) {
  FringeFit f;
  const double u = lin.theta(1), v = lin.theta(2);
  f.a = lin.theta(0);
  f.b = std::hypot(u, v);
  f.c = f.b > 0.0 ? wrap_phase(std::atan2(-v, u)) : 0.0;
  f.residual = lin.residual;
  Eigen::Matrix3d jac = Eigen::Matrix3d::Zero();
  jac(0, 0) = 1.0;
  if (f.b > 0.0) {
    const double b2 = f.b * f.b;
    jac(1, 1) = u / f.b;
    jac(1, 2) = v / f.b;
    jac(2, 1) = v / b2;
    jac(2, 2) = -u / b2;
  }
  f.cov = jac * lin.cov * jac.transpose();
  if (!(f.b > 0.0)) f.cov(2, 2) = kPi * kPi;
  return f;
}

double circular_std(const std::vector<double>& angles) {
  if (angles.empty()) return 0.0;
  Complex s = 0.0;
  for (double a : angles) s += std::polar(1.0, a);
  const double r = std::min(1.0, std::abs(s) / static_cast<double>(angles.size()));
  return r > 0.0 ? std::sqrt(-2.0 * std::log(r)) : kPi;
}

const MeasurementRecord* find_record(const std::vector<MeasurementRecord>& records, Setting s) {
  const MeasurementRecord* found = nullptr;
  for (const auto& r : records)
    if (r.setting == s) {
      if (found) throw ConfigError("duplicate " + to_string(s) + " record");
      found = &r;
    }
  return found;
}

DetectionPattern pair_pattern(Index d, Index j, Index k) {
  std::vector<int> counts(static_cast<std::size_t>(d), 0);
  ++counts[static_cast<std::size_t>(j)];
  ++counts[static_cast<std::size_t>(k)];
  return DetectionPattern(counts);
}

DetectionPattern single_pattern(Index d, Index j) {
  std::vector<int> counts(static_cast<std::size_t>(d), 0);
  counts[static_cast<std::size_t>(j)] = 1;
  return DetectionPattern(counts);
}

// Collisions are doubled so the j == k rate follows the twofold closed form.
double pooled_rate(const MeasurementRecord& rec, const DetectionPattern& n, double factor = 1.0) {
  const double vac = rec.pooled_vacuum();
  if (!(vac > 0.0)) throw ConfigError(to_string(rec.setting) + " record has no vacuum counts");
  return factor * rec.pooled_count(n) / vac;
}

// TVD between measured and predicted pooled threefolds. Predictions are cached
// per pattern so moving one entry only re-evaluates patterns holding both modes.
class ThreefoldObjective {
 public:
  ThreefoldObjective(const MatrixXc& b, const MatrixXc& c, const VectorXd& gamma, const MeasurementRecord& input1)
      : b_(b), c_(c), d_(b.rows()) {
    patterns_ = enumerate_patterns(d_, 3, true);
    measured_.assign(patterns_.size(), 0.0);
    // The prediction has period pi in phi, so points are grouped modulo pi.
    std::map<long long, double> groups;
    for (const auto& pt : input1.points) {
      const double v = pt.vacuum();
      if (!(v > 0.0)) continue;
      for (std::size_t i = 0; i < patterns_.size(); ++i) measured_[i] += pt.count(patterns_[i]) / v;
      double psi = std::fmod(pt.phi, kPi);
      if (psi < 0) psi += kPi;
      groups[std::llround(psi * 1e9)] += 1.0;
    }
    double total = 0.0;
    for (double m : measured_) total += m;
    if (!(total > 0.0)) throw ConfigError("input1 record has no threefold counts");
    for (double& m : measured_) m /= total;
    for (const auto& [key, w] : groups) {
      const double psi = static_cast<double>(key) * 1e-9;
      VectorXc g(2 * d_);
      g.head(d_) = gamma.cast<Complex>() * std::polar(1.0, psi);
      g.tail(d_) = g.head(d_).conjugate();
      phases_.push_back(g);
      weights_.push_back(w);
    }
    by_pair_.assign(static_cast<std::size_t>(d_ * d_), {});
    for (std::size_t i = 0; i < patterns_.size(); ++i) {
      const auto m = patterns_[i].clicked();
      for (std::size_t x = 0; x < m.size(); ++x)
        for (std::size_t y = x + 1; y < m.size(); ++y) {
          by_pair_[static_cast<std::size_t>(m[x] * d_ + m[y])].push_back(i);
          by_pair_[static_cast<std::size_t>(m[y] * d_ + m[x])].push_back(i);
        }
    }
    predicted_.assign(patterns_.size(), 0.0);
    for (std::size_t i = 0; i < patterns_.size(); ++i) predicted_[i] = predict(i);
    resum();
  }

  double value() const {
    CompensatedSum<double> s;
    for (std::size_t i = 0; i < patterns_.size(); ++i) s.add(std::abs(measured_[i] - predicted_[i] / total_));
    return 0.5 * s.value();
  }

  /// Sets the phase of one entry, keeping its magnitude, and returns the objective.
  double set_phase(const PhaseParameter& p, double theta) {
    if (p.is_b) {
      const double mag = std::abs(b_(p.j, p.k));
      b_(p.j, p.k) = b_(p.k, p.j) = std::polar(mag, theta);
    } else {
      const double mag = std::abs(c_(p.j, p.k));
      c_(p.j, p.k) = std::polar(mag, theta);
      c_(p.k, p.j) = std::conj(c_(p.j, p.k));
    }
    for (std::size_t i : by_pair_[static_cast<std::size_t>(p.j * d_ + p.k)]) predicted_[i] = predict(i);
    resum();
    ++evaluations_;
    return value();
  }

  const MatrixXc& b() const { return b_; }
  const MatrixXc& c() const { return c_; }
  int evaluations() const { return evaluations_; }

 private:
  double predict(std::size_t i) const {
    const auto m = patterns_[i].clicked();
    MatrixXc an(6, 6);
    for (int x = 0; x < 3; ++x)
      for (int y = 0; y < 3; ++y) {
        an(x, y) = b_(m[x], m[y]);
        an(x, y + 3) = c_(m[x], m[y]);
        an(x + 3, y) = c_(m[y], m[x]);
        an(x + 3, y + 3) = std::conj(b_(m[x], m[y]));
      }
    double s = 0.0;
    VectorXc w(6);
    for (std::size_t g = 0; g < phases_.size(); ++g) {
      for (int x = 0; x < 3; ++x) {
        w(x) = phases_[g](m[x]);
        w(x + 3) = phases_[g](m[x] + d_);
      }
      s += weights_[g] * loop_hafnian(an, w).real();
    }
    return std::max(0.0, s);
  }

  void resum() {
    CompensatedSum<double> s;
    for (double p : predicted_) s.add(p);
    total_ = s.value() > 0.0 ? s.value() : 1.0;
  }

  MatrixXc b_, c_;
  Index d_;
  std::vector<DetectionPattern> patterns_;
  std::vector<double> measured_, predicted_;
  std::vector<VectorXc> phases_;
  std::vector<double> weights_;
  std::vector<std::vector<std::size_t>> by_pair_;
  double total_ = 1.0;
  int evaluations_ = 0;
};

}  // namespace

// --- fringe fitting ------------------------------------------------------------

FringeFit fit_fringe(std::span<const double> phi, std::span<const double> values, std::span<const double> sigma) {
  return to_polar(fit_linear(phi, values, sigma));
}

FringeFit fit_fringe_windows(std::span<const double> phi, std::span<const double> values, std::span<const double> sigma,
                             int keep, bool level_scaled) {
  if (phi.size() != values.size() || (!sigma.empty() && sigma.size() != phi.size()))
    throw DimensionError("fringe data lengths differ");
  if (phi.empty()) throw NumericalError("empty fringe data");
  if (keep < 1) throw ConfigError("at least one fringe window must be kept");
  const double start = *std::min_element(phi.begin(), phi.end());
  std::map<long long, std::vector<std::size_t>> windows;
  for (std::size_t i = 0; i < phi.size(); ++i)
    windows[static_cast<long long>(std::floor((phi[i] - start) / (2.0 * kPi) + 1e-9))].push_back(i);
  std::vector<LinearFit> fits;
  for (const auto& [w, idx] : windows) {
    if (idx.size() < 4) continue;
    std::vector<double> p, y, s;
    for (std::size_t i : idx) {
      p.push_back(phi[i]);
      y.push_back(values[i]);
      if (!sigma.empty()) s.push_back(sigma[i]);
    }
    try {
      fits.push_back(fit_linear(p, y, s));
    } catch (const NumericalError&) {
      // a window without phase diversity is skipped
    }
  }
  if (fits.size() <= 1) {
    FringeFit f = fits.size() == 1 ? to_polar(fits[0]) : fit_fringe(phi, values, sigma);
    f.windows = 1;
    return f;
  }
  std::vector<double> rank(fits.size());
  for (std::size_t i = 0; i < fits.size(); ++i) {
    rank[i] = fits[i].residual;
    if (level_scaled && fits[i].theta(0) > 0.0) rank[i] /= fits[i].theta(0);
  }
  std::vector<std::size_t> order(fits.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(keep), fits.size());
  LinearFit avg;
  for (std::size_t i = 0; i < k; ++i) {
    const LinearFit& f = fits[order[i]];
    avg.theta += f.theta;
    avg.cov += f.cov;
    avg.residual += f.residual;
  }
  avg.theta /= static_cast<double>(k);
  avg.cov /= static_cast<double>(k * k);
  avg.residual /= static_cast<double>(k);
  FringeFit f = to_polar(avg);
  f.windows = static_cast<int>(k);
  return f;
}

// --- individual steps --------------------------------------------------------

std::pair<VectorXd, VectorXd> recover_c_diag(const MeasurementRecord& blocked) {
  const Index d = blocked.modes;
  const double vac = blocked.pooled_vacuum();
  if (!(vac > 0.0)) throw ConfigError("blocked record has no vacuum counts");
  VectorXd c(d), s(d);
  for (Index j = 0; j < d; ++j) {
    const double n = blocked.pooled_count(single_pattern(d, j));
    c(j) = n / vac;
    s(j) = std::sqrt(n) / vac;
  }
  return {c, s};
}

VectorXd recover_gamma(const MeasurementRecord& input1, const VectorXd& c_diag, Eigen::VectorXi* flags) {
  const Index d = input1.modes;
  if (c_diag.size() != d) throw DimensionError("C diagonal length does not match the record");
  VectorXd g(d);
  if (flags) *flags = Eigen::VectorXi::Zero(d);
  for (Index j = 0; j < d; ++j) {
    const double radicand = pooled_rate(input1, single_pattern(d, j)) - c_diag(j);
    if (radicand < 0.0) {
      g(j) = 0.0;
      if (flags) (*flags)(j) |= kClamped;
    } else {
      g(j) = std::sqrt(radicand);
    }
  }
  return g;
}

FringeFit fit_pair_fringe(const MeasurementRecord& record, Index j, Index k, const ReconstructionOptions& options) {
  const DetectionPattern n = pair_pattern(record.modes, j, k);
  const double factor = j == k ? 2.0 : 1.0;
  std::vector<double> phi, y, vac;
  for (const auto& pt : record.points) {
    phi.push_back(pt.phi);
    vac.push_back(pt.vacuum());
    y.push_back(factor * pt.rate(n));
  }
  FringeFit fit = fit_fringe_windows(phi, y, {}, options.windows, options.level_scaled_ranking);
  if (!options.weighted) return fit;
  // Poisson weights from the fitted curve, refined twice.
  double mean_counts = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) mean_counts += y[i] * vac[i] / factor;
  mean_counts = std::max(mean_counts / static_cast<double>(y.size()), 1e-12);
  for (int iter = 0; iter < 2; ++iter) {
    std::vector<double> sigma(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double expected = std::max(fit.value(phi[i]) * vac[i] / factor, 1e-2 * mean_counts);
      sigma[i] = factor * std::sqrt(expected) / vac[i];
    }
    fit = fit_fringe_windows(phi, y, sigma, options.windows, options.level_scaled_ranking);
  }
  return fit;
}

double resolve_im_c(double re_c, double x, Complex mu_j, Complex mu_k) {
  const Complex w = std::conj(mu_j) * mu_k;
  if (w.imag() == 0.0) throw NumericalError("second-input phases are parallel; Im C is not determined");
  return (re_c * w.real() - x) / w.imag();
}

OptimizationReport optimize_undetermined_phases(MatrixXc& b, MatrixXc& c, const VectorXd& gamma,
                                                std::vector<PhaseParameter> parameters,
                                                const MeasurementRecord& input1, const OptimizerOptions& options) {
  OptimizationReport report;
  if (parameters.empty()) return report;
  const ThreefoldObjective base(b, c, gamma, input1);
  report.objective_before = base.value();
  const auto runs = static_cast<std::size_t>(std::max(1, options.restarts));
  std::vector<std::vector<double>> finals(runs);
  std::vector<double> objective(runs);
  std::vector<int> evals(runs);
  std::vector<char> converged(runs, 1);
  parallel_for(runs, [&](std::size_t run) {
    ThreefoldObjective obj = base;
    std::mt19937_64 rng(splitmix64(options.seed + 0x9E3779B97F4A7C15ULL * (run + 1)));
    std::normal_distribution<double> gauss(0.0, options.restart_sigma);
    std::uniform_real_distribution<double> uniform(-kPi, kPi);
    std::vector<double> x(parameters.size());
    double f = obj.value();
    for (std::size_t p = 0; p < parameters.size(); ++p) {
      if (run == 0) x[p] = parameters[p].start;
      else x[p] = parameters[p].has_estimate ? wrap_phase(parameters[p].start + gauss(rng)) : uniform(rng);
      f = obj.set_phase(parameters[p], x[p]);
    }
    // Coordinate pattern search.
    double step = options.initial_step;
    while (step > options.final_step) {
      if (obj.evaluations() > options.max_evaluations) {
        converged[run] = 0;
        break;
      }
      bool improved = false;
      for (std::size_t p = 0; p < parameters.size(); ++p)
        for (double dir : {1.0, -1.0}) {
          const double trial = wrap_phase(x[p] + dir * step);
          const double ft = obj.set_phase(parameters[p], trial);
          if (ft < f) {
            f = ft;
            x[p] = trial;
            improved = true;
            break;
          }
          obj.set_phase(parameters[p], x[p]);
        }
      if (!improved) step *= 0.5;
    }
    finals[run] = x;
    objective[run] = f;
    evals[run] = obj.evaluations();
  });
  // Run 0 starts at the direct estimates and is replaced only by a clearly better run.
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs; ++r)
    if (objective[r] < objective[best] - 1e-12) best = r;
  ThreefoldObjective final_obj = base;
  for (std::size_t p = 0; p < parameters.size(); ++p) {
    parameters[p].value = finals[best][p];
    std::vector<double> offsets;
    for (const auto& f : finals) offsets.push_back(f[p] - finals[best][p]);
    parameters[p].spread = circular_std(offsets);
    final_obj.set_phase(parameters[p], parameters[p].value);
  }
  b = final_obj.b();
  c = final_obj.c();
  report.parameters = std::move(parameters);
  report.objective_after = final_obj.value();
  report.run_objectives = objective;
  for (int e : evals) report.evaluations += e;
  report.converged = converged[best] != 0;
  return report;
}

VectorXd gauge_fix(AMatrix& a, GammaVector& gamma) {
  const Index d = a.modes();
  VectorXd theta = VectorXd::Zero(d);
  for (Index j = 0; j < d; ++j)
    if (std::abs(gamma.gamma(j)) > 0.0) theta(j) = std::arg(gamma.gamma(j));
  rotate_modes(a, gamma, theta);
  for (Index j = 0; j < d; ++j) gamma.gamma(j) = std::abs(gamma.gamma(j));
  gamma.gamma.tail(d) = gamma.gamma.head(d).conjugate();
  return theta;
}

// --- pipeline -------------------------------------------------------------------

namespace {

// Relative phases nu with s_jk = nu_j + nu_k, from weighted links
// link(j, k) = w_jk e^{i s_jk}. Returns false for modes with no link.
std::vector<char> solve_pair_phases(const MatrixXc& link, Index ref, VectorXd& nu, std::vector<std::string>& notes) {
  const Index d = link.rows();
  nu = VectorXd::Zero(d);
  // 2 nu_ref from triangles (ref, k, l).
  Complex tri = 0.0;
  for (Index k = 0; k < d; ++k)
    for (Index l = k + 1; l < d; ++l) {
      if (k == ref || l == ref) continue;
      const Complex x = link(ref, k), y = link(ref, l), z = link(k, l);
      if (x == 0.0 || y == 0.0 || z == 0.0) continue;
      const double w = 1.0 / (1.0 / std::abs(x) + 1.0 / std::abs(y) + 1.0 / std::abs(z));
      tri += std::polar(w, std::arg(x) + std::arg(y) - std::arg(z));
    }
  if (tri == 0.0) notes.push_back("no closed triangle through the reference mode; second-input phases are approximate");
  nu(ref) = 0.5 * std::arg(tri);
  std::vector<char> known(static_cast<std::size_t>(d), 0);
  known[static_cast<std::size_t>(ref)] = 1;
  for (Index k = 0; k < d; ++k)
    if (k != ref && link(ref, k) != 0.0) {
      nu(k) = std::arg(link(ref, k)) - nu(ref);
      known[static_cast<std::size_t>(k)] = 1;
    }
  // Circular-mean refinement over every available pair.
  for (int sweep = 0; sweep < 50; ++sweep)
    for (Index m = 0; m < d; ++m) {
      Complex acc = 0.0;
      for (Index j = 0; j < d; ++j)
        if (j != m && known[static_cast<std::size_t>(j)] && link(m, j) != 0.0)
          acc += std::abs(link(m, j)) * std::polar(1.0, std::arg(link(m, j)) - nu(j));
      if (acc != 0.0) {
        nu(m) = std::arg(acc);
        known[static_cast<std::size_t>(m)] = 1;
      }
    }
  return known;
}

}  // namespace

ReconstructionResult reconstruct(const std::vector<MeasurementRecord>& records, const ReconstructionOptions& options) {
  const MeasurementRecord* blocked = find_record(records, Setting::kBlocked);
  const MeasurementRecord* input1 = find_record(records, Setting::kInput1);
  const MeasurementRecord* input2 = find_record(records, Setting::kInput2);
  if (!blocked) throw ConfigError("reconstruction needs a blocked record");
  if (!input1) throw ConfigError("reconstruction needs an input1 record");
  const Index d = blocked->modes;
  for (const auto& r : records) {
    if (r.modes != d) throw ConfigError("records disagree on the mode count");
    r.validate();
  }

  ReconstructionResult res;
  res.flags_b = Eigen::MatrixXi::Zero(d, d);
  res.flags_c = Eigen::MatrixXi::Zero(d, d);
  res.sigma_b_abs = MatrixXd::Zero(d, d);
  res.sigma_b_arg = MatrixXd::Zero(d, d);
  res.sigma_c_re = MatrixXd::Zero(d, d);
  res.sigma_c_im = MatrixXd::Zero(d, d);

  const auto [c_diag, sigma_c_diag] = recover_c_diag(*blocked);
  res.sigma_c_diag = sigma_c_diag;
  res.gamma = recover_gamma(*input1, c_diag, &res.flags_gamma);
  res.sigma_gamma = VectorXd::Zero(d);
  VectorXd p1(d);
  for (Index j = 0; j < d; ++j) {
    const DetectionPattern n = single_pattern(d, j);
    p1(j) = pooled_rate(*input1, n);
    const double sp = std::sqrt(input1->pooled_count(n)) / input1->pooled_vacuum();
    res.sigma_gamma(j) = res.gamma(j) > 0.0 ? 0.5 * std::hypot(sp, sigma_c_diag(j)) / res.gamma(j) : 0.0;
  }
  const double gmax = d > 0 ? res.gamma.maxCoeff() : 0.0;
  const double gg_floor = options.gamma_tolerance * gmax * gmax;
  const bool collisions = blocked->has_collisions() && input1->has_collisions();
  if (!collisions) res.notes.push_back("no collision outcomes: diagonal of B left at zero");

  MatrixXc b = MatrixXc::Zero(d, d);
  MatrixXc c = MatrixXc::Zero(d, d);
  for (Index j = 0; j < d; ++j) c(j, j) = c_diag(j);
  MatrixXd re_c = MatrixXd::Zero(d, d), mag2 = MatrixXd::Zero(d, d);
  MatrixXd excess = MatrixXd::Zero(d, d), sigma_excess = MatrixXd::Zero(d, d);
  std::vector<PhaseParameter> params;

  std::vector<std::pair<Index, Index>> pairs;
  for (Index j = 0; j < d; ++j)
    for (Index k = j; k < d; ++k) pairs.emplace_back(j, k);

  // Input1 fringes: B from amplitude and phase, Re C from the offset.
  std::vector<FringeFit> fits(pairs.size());
  std::vector<char> fitted(pairs.size(), 0);
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto [j, k] = pairs[i];
    if (j == k && !collisions) return;
    if (res.gamma(j) * res.gamma(k) <= gg_floor) return;
    fits[i] = fit_pair_fringe(*input1, j, k, options);
    fitted[i] = 1;
  });
  const double vac_blocked = blocked->pooled_vacuum();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [j, k] = pairs[i];
    const DetectionPattern n = pair_pattern(d, j, k);
    const double factor = j == k ? 2.0 : 1.0;
    const double s = pooled_rate(*blocked, n, factor) - c_diag(j) * c_diag(k);  // |B|^2 + |C|^2 for j != k
    excess(j, k) = s;
    sigma_excess(j, k) = factor * std::sqrt(blocked->pooled_count(n)) / vac_blocked;
    if (j == k && !collisions) {
      res.flags_b(j, j) |= kDiagonalUnknown;
      continue;
    }
    if (!fitted[i]) {
      res.flags_b(j, k) |= kUndetermined;
      if (j == k) continue;
      // Only |B|^2 + |C|^2 is known. It goes to B, whose phase is left to the optimizer.
      b(j, k) = b(k, j) = std::sqrt(std::max(0.0, s));
      res.flags_c(j, k) |= kUndetermined;
      if (std::abs(b(j, k)) > 0.0) params.push_back({j, k, true, 0.0, 0.0, 0.0, false});
      continue;
    }
    const FringeFit& f = fits[i];
    const double gg = res.gamma(j) * res.gamma(k);
    b(j, k) = b(k, j) = std::polar(f.b / (2.0 * gg), -f.c);
    res.sigma_b_abs(j, k) = f.sigma_b() / (2.0 * gg);
    res.sigma_b_arg(j, k) = f.sigma_c();
    if (j == k) continue;
    re_c(j, k) = (f.a - p1(j) * p1(k) - s) / (2.0 * gg);
    res.sigma_c_re(j, k) = std::hypot(f.sigma_a(), sigma_excess(j, k)) / (2.0 * gg);
    double m = s - std::norm(b(j, k));
    if (m < 0.0) {
      m = 0.0;
      res.flags_c(j, k) |= kClamped;
    }
    mag2(j, k) = m;
  }

  // Input2: complex mu, whose relative phases fix Im C.
  std::vector<FringeFit> fits2(pairs.size());
  std::vector<char> fitted2(pairs.size(), 0);
  VectorXd p2 = VectorXd::Zero(d);
  if (input2) {
    res.mu = VectorXc::Zero(d);
    res.flags_mu = Eigen::VectorXi::Zero(d);
    VectorXd mu_abs(d);
    for (Index j = 0; j < d; ++j) {
      p2(j) = pooled_rate(*input2, single_pattern(d, j));
      const double radicand = p2(j) - c_diag(j);
      if (radicand < 0.0) res.flags_mu(j) |= kClamped;
      mu_abs(j) = std::sqrt(std::max(0.0, radicand));
    }
    const double mmax = mu_abs.maxCoeff();
    const double mm_floor = options.gamma_tolerance * mmax * mmax;
    parallel_for(pairs.size(), [&](std::size_t i) {
      const auto [j, k] = pairs[i];
      if (j == k || !fitted[i] || mu_abs(j) * mu_abs(k) <= mm_floor) return;
      fits2[i] = fit_pair_fringe(*input2, j, k, options);
      fitted2[i] = 1;
    });
    // c''_jk + arg B_jk = nu_j + nu_k, including the unknown phase origin of the second input.
    MatrixXc link = MatrixXc::Zero(d, d);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!fitted2[i]) continue;
      const auto [j, k] = pairs[i];
      const double var = fits2[i].cov(2, 2) + std::pow(res.sigma_b_arg(j, k), 2);
      link(j, k) = link(k, j) = std::polar(1.0 / std::max(var, 1e-12), fits2[i].c + std::arg(b(j, k)));
    }
    Index ref = -1;
    for (Index j = 0; j < d && ref < 0; ++j)
      if (link.row(j).cwiseAbs().sum() > 0.0) ref = j;
    if (ref < 0) {
      res.notes.push_back("second input carries no usable fringes");
      res.flags_mu.setConstant(kUndetermined);
    } else {
      res.mu_reference = ref;
      VectorXd nu;
      const auto known = solve_pair_phases(link, ref, nu, res.notes);
      for (Index j = 0; j < d; ++j) {
        const bool ok = known[static_cast<std::size_t>(j)];
        if (!ok) res.flags_mu(j) |= kUndetermined;
        res.mu(j) = std::polar(mu_abs(j), ok ? nu(j) - nu(ref) : 0.0);
      }
    }
  }

  // Im C: from the second-input offset where the mu phases separate it,
  // otherwise from |C| with the sign taken from the offset when it is significant.
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [j, k] = pairs[i];
    if (j == k || !fitted[i]) continue;
    const double re = re_c(j, k);
    const double im2 = mag2(j, k) - re * re;
    const bool invalid = im2 < 0.0;
    if (invalid) res.flags_c(j, k) |= kInvalidArgument;
    const double sm = sigma_excess(j, k) + 2.0 * std::abs(b(j, k)) * res.sigma_b_abs(j, k);
    const auto magnitude_sigma = [&](double im) {
      return std::abs(im) > 0.0 ? (0.5 * sm + std::abs(re) * res.sigma_c_re(j, k)) / std::abs(im) : 0.0;
    };
    const bool usable = fitted2[i] && res.mu_reference >= 0 && res.flags_mu(j) == 0 && res.flags_mu(k) == 0;
    const Complex w = usable ? std::conj(res.mu(j)) * res.mu(k) : Complex(0.0);
    double im = invalid ? 0.0 : std::sqrt(im2);
    double sigma_im = magnitude_sigma(im);
    bool decided = false;     // value fixed without the optimizer
    bool from_offset = false; // value taken from the second-input offset
    if (usable && w.imag() != 0.0) {
      const double ratio = std::abs(w.imag()) / std::abs(w);
      const double x = 0.5 * (fits2[i].a - p2(j) * p2(k) - excess(j, k));
      const double v = resolve_im_c(re, x, res.mu(j), res.mu(k));
      const double sigma_v =
          std::hypot(0.5 * fits2[i].sigma_a(), std::abs(w.real()) * res.sigma_c_re(j, k)) / std::abs(w.imag());
      if (ratio >= options.degeneracy_tolerance) {
        im = v;
        sigma_im = sigma_v;
        decided = from_offset = true;
        if (!invalid && std::abs(std::abs(v) - std::sqrt(im2)) > 3.0 * (sigma_v + magnitude_sigma(std::sqrt(im2))) +
                                                                     1e-9 * std::abs(v) + 1e-15)
          res.flags_c(j, k) |= kInconsistent;
      } else if (!invalid) {
        im = std::copysign(im, v);
        decided = std::abs(v) > 2.0 * sigma_v;
      }
    }
    if (!decided) res.flags_c(j, k) |= kImSignUnresolved;
    if (invalid && !from_offset) {
      // |Re C| > |C|: keep |C| and leave the phase to the optimizer.
      c(j, k) = std::polar(std::sqrt(mag2(j, k)), re >= 0.0 ? 0.0 : kPi);
    } else {
      c(j, k) = Complex(re, im);
    }
    c(k, j) = std::conj(c(j, k));
    res.sigma_c_im(j, k) = sigma_im;
    if (!decided && std::abs(c(j, k)) > 0.0)
      params.push_back({j, k, false, std::arg(c(j, k)), std::arg(c(j, k)), 0.0, !invalid});
  }

  if (options.optimize && !params.empty()) {
    for (auto& p : params) p.value = p.start;
    res.optimization = optimize_undetermined_phases(b, c, res.gamma, params, *input1, options.optimizer);
    for (const auto& p : res.optimization.parameters) (p.is_b ? res.flags_b : res.flags_c)(p.j, p.k) |= kOptimized;
    if (!res.optimization.converged) res.notes.push_back("phase optimizer hit its evaluation limit");
  } else if (!params.empty()) {
    res.optimization.parameters = params;
    res.notes.push_back(std::to_string(params.size()) + " phases left at their direct estimates");
  }

  // Mirror the upper-triangle bookkeeping.
  for (Index j = 0; j < d; ++j)
    for (Index k = j + 1; k < d; ++k) {
      res.flags_b(k, j) = res.flags_b(j, k);
      res.flags_c(k, j) = res.flags_c(j, k);
      res.sigma_b_abs(k, j) = res.sigma_b_abs(j, k);
      res.sigma_b_arg(k, j) = res.sigma_b_arg(j, k);
      res.sigma_c_re(k, j) = res.sigma_c_re(j, k);
      res.sigma_c_im(k, j) = res.sigma_c_im(j, k);
    }

  res.a = AMatrix(b, c);
  try {
    (void)state_from_a(res.a, res.gamma_vector());
    res.physical = true;
  } catch (const Error& e) {
    res.physical = false;
    res.notes.push_back(std::string("reconstructed kernel is not a physical state: ") + e.what());
  }
  return res;
}

}  // namespace dgbs
