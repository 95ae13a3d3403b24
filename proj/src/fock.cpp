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

#include <cmath>
#include <sstream>

namespace dgbs {
namespace {

using Occupation = std::vector<int>;

double log_factorial(int n) { return std::lgamma(n + 1.0); }

double factorial_product(const Occupation& occ) {
  double s = 0.0;
  for (int c : occ) s += log_factorial(c);
  return std::exp(s);
}

// Ranks homogeneous monomials of a fixed degree in `vars` variables through
// the combinatorial number system on the "bar" positions.
class MonomialIndex {
 public:
  MonomialIndex(int vars, int max_degree) : vars_(vars), max_degree_(max_degree) {
    const int top = max_degree + vars + 1;
    binom_.assign(static_cast<std::size_t>(top + 1), std::vector<double>(static_cast<std::size_t>(vars + 1), 0.0));
    for (int n = 0; n <= top; ++n) {
      binom_[n][0] = 1.0;
      for (int k = 1; k <= vars && k <= n; ++k) binom_[n][k] = binom_[n - 1][k - 1] + (k <= n - 1 ? binom_[n - 1][k] : 0.0);
    }
    monomials_.resize(static_cast<std::size_t>(max_degree + 1));
    for (int deg = 0; deg <= max_degree; ++deg) {
      auto& list = monomials_[deg];
      list.resize(static_cast<std::size_t>(count(deg)));
      Occupation e(static_cast<std::size_t>(vars), 0);
      fill(list, e, 0, deg);
    }
  }

  std::size_t count(int degree) const {
    return static_cast<std::size_t>(binom_[degree + vars_ - 1][vars_ - 1]);
  }

  std::size_t rank(const Occupation& e) const {
    std::size_t r = 0;
    int bar = -1;
    for (int i = 0; i + 1 < vars_; ++i) {
      bar += e[i] + 1;
      r += static_cast<std::size_t>(binom_[bar][i + 1]);
    }
    return r;
  }

  const std::vector<Occupation>& monomials(int degree) const { return monomials_[degree]; }

 private:
  void fill(std::vector<Occupation>& list, Occupation& e, int var, int left) {
    if (var == vars_ - 1) {
      e[var] = left;
      list[rank(e)] = e;
      return;
    }
    for (int c = 0; c <= left; ++c) {
      e[var] = c;
      fill(list, e, var + 1, left - c);
    }
    e[var] = 0;
  }

  int vars_;
  int max_degree_;
  std::vector<std::vector<double>> binom_;
  std::vector<std::vector<Occupation>> monomials_;
};

// poly (in creation operators) times a linear form sum_j coeffs(j) x_j.
void multiply_linear(const std::map<Occupation, Complex>& in, const VectorXc& coeffs, std::map<Occupation, Complex>& out) {
  for (const auto& [occ, c] : in) {
    for (Index j = 0; j < coeffs.size(); ++j) {
      if (coeffs(j) == Complex(0.0)) continue;
      Occupation next = occ;
      next[static_cast<std::size_t>(j)] += 1;
      out[next] += c * coeffs(j);
    }
  }
}

}  // namespace

double FockVector::norm_squared() const {
  double s = 0.0;
  for (const auto& [occ, c] : amplitudes) s += std::norm(c);
  return s;
}

Complex FockVector::amplitude(const std::vector<int>& occupation) const {
  const auto it = amplitudes.find(occupation);
  return it == amplitudes.end() ? Complex(0.0) : it->second;
}

double source_tail_mass(const SourceConfig& config, int cutoff) {
  const bool squeezed = config.squeezer_ports && config.r > 0.0;
  const bool coherent = config.coherent_port && config.alpha_mag > 0.0;
  const double t2 = squeezed ? std::pow(std::tanh(config.r), 2) : 0.0;
  const double a2 = coherent ? config.n_alpha() : 0.0;
  // P(total <= cutoff) with 2n photons from the squeezer (geometric) and m
  // from the coherent state (Poisson).
  double kept = 0.0;
  for (int n = 0; 2 * n <= cutoff; ++n) {
    const double pn = (1.0 - t2) * std::pow(t2, n);
    if (!squeezed && n > 0) break;
    double pm_sum = 0.0;
    for (int m = 0; 2 * n + m <= cutoff; ++m) {
      if (!coherent && m > 0) break;
      pm_sum += coherent ? std::exp(-a2 + m * std::log(a2) - log_factorial(m)) : 1.0;
    }
    kept += (squeezed ? pn : 1.0) * pm_sum;
  }
  return std::max(0.0, 1.0 - kept);
}

int source_cutoff(const SourceConfig& config, int floor, double epsilon, int limit) {
  for (int k = std::max(floor, 0); k <= limit; ++k)
    if (source_tail_mass(config, k) < epsilon) return k;
  std::ostringstream msg;
  msg << "no total-photon cutoff up to " << limit << " keeps the truncation loss below " << epsilon;
  throw ResourceError(msg.str());
}

FockVector expand_inputs(const SourceConfig& config, Index total_modes, int cutoff) {
  config.validate(total_modes);
  FockVector psi;
  psi.modes = total_modes;
  psi.cutoff = cutoff;
  const bool squeezed = config.squeezer_ports.has_value() && config.r > 0.0;
  const bool coherent = config.coherent_port.has_value() && config.alpha_mag > 0.0;
  const double t = std::tanh(config.r);
  const double ch = std::cosh(config.r);
  const Complex alpha = std::polar(config.alpha_mag, config.phi);
  for (int n = 0; 2 * n <= cutoff; ++n) {
    if (!squeezed && n > 0) break;
    const double amp_sq = std::pow(t, n) / ch;
    for (int m = 0; 2 * n + m <= cutoff; ++m) {
      if (!coherent && m > 0) break;
      Complex amp_coh = coherent ? std::exp(-0.5 * config.n_alpha()) * std::pow(alpha, m) / std::sqrt(std::exp(log_factorial(m)))
                                 : Complex(1.0);
      Occupation occ(static_cast<std::size_t>(total_modes), 0);
      if (squeezed) {
        occ[(*config.squeezer_ports)[0]] = n;
        occ[(*config.squeezer_ports)[1]] = n;
      }
      if (coherent) occ[*config.coherent_port] = m;
      psi.amplitudes[occ] = (squeezed ? amp_sq : 1.0) * amp_coh;
    }
  }
  psi.truncation_loss = std::max(0.0, 1.0 - psi.norm_squared());
  return psi;
}

FockVector apply_interferometer(const FockVector& psi, const MatrixXc& u) {
  if (u.rows() != u.cols() || u.rows() < psi.modes) throw DimensionError("interferometer does not cover the state's modes");
  const Index n = u.rows();
  FockVector out;
  out.modes = n;
  out.cutoff = psi.cutoff;
  out.truncation_loss = psi.truncation_loss;
  for (const auto& [occ, amp] : psi.amplitudes) {
    // prod_i (sum_j u(j, i) x_j)^{n_i} / sqrt(n_i!)
    std::map<Occupation, Complex> poly;
    poly[Occupation(static_cast<std::size_t>(n), 0)] = amp / std::sqrt(factorial_product(occ));
    for (Index i = 0; i < static_cast<Index>(occ.size()); ++i) {
      for (int rep = 0; rep < occ[i]; ++rep) {
        std::map<Occupation, Complex> next;
        multiply_linear(poly, u.col(i), next);
        poly.swap(next);
      }
    }
    for (const auto& [mono, c] : poly) out.amplitudes[mono] += c * std::sqrt(factorial_product(mono));
  }
  return out;
}

MatrixXc dilate_lossy(const MatrixXc& l) {
  if (l.rows() != l.cols()) throw DimensionError("dilation needs a square mode map");
  const Index d = l.rows();
  Eigen::JacobiSVD<MatrixXc> svd(l, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd s = svd.singularValues();
  if (s.size() && s(0) > 1.0 + 1e-12) throw PhysicalityError("mode map is not sub-unitary");
  // Singular values within rounding of 1 are lossless; their defect is
  // otherwise sqrt(eps) noise.
  VectorXd defect = 1.0 - s.array().square();
  for (Index i = 0; i < defect.size(); ++i) defect(i) = defect(i) < 1e-13 ? 0.0 : std::sqrt(defect(i));
  const MatrixXc& w = svd.matrixU();
  const MatrixXc& v = svd.matrixV();
  MatrixXc u(2 * d, 2 * d);
  u.topLeftCorner(d, d) = l;
  u.topRightCorner(d, d) = w * defect.cast<Complex>().asDiagonal() * w.adjoint();
  u.bottomLeftCorner(d, d) = -w * defect.cast<Complex>().asDiagonal() * v.adjoint();
  u.bottomRightCorner(d, d) = w * s.cast<Complex>().asDiagonal() * w.adjoint();
  return u;
}

MatrixXc dilate_lossy(const TransferMatrix& t) { return dilate_lossy(t.propagator()); }

FockOracle::FockOracle(const SourceConfig& config, const TransferMatrix& t, int max_photons, int cutoff,
                       double epsilon)
    : modes_(t.outputs()), max_photons_(max_photons) {
  config.validate(modes_);
  if (cutoff <= 0) {
    cutoff_ = source_cutoff(config, max_photons + 3, epsilon);
  } else {
    cutoff_ = cutoff;
    if (source_tail_mass(config, cutoff_) >= epsilon) cutoff_ *= 2;
    if (source_tail_mass(config, cutoff_) >= epsilon) {
      std::ostringstream msg;
      msg << "cutoff " << cutoff << " (doubled to " << cutoff_ << ") leaves truncation loss "
          << source_tail_mass(config, cutoff_) << " above " << epsilon;
      throw ResourceError(msg.str());
    }
  }

  const Index d = modes_;
  const MatrixXc u = dilate_lossy(t);
  const int vars = static_cast<int>(2 * d);

  // The dilated output is N exp(P1 + P2)|0> with P1 = alpha l_c and
  // P2 = tanh(r) l_p l_q, l_i = sum_j u(j, i) b_j^dag. Its degree-k part obeys
  // k F_k = P1 F_{k-1} + 2 P2 F_{k-2}.
  const bool squeezed = config.squeezer_ports.has_value() && config.r > 0.0;
  const bool coherent = config.coherent_port.has_value() && config.alpha_mag > 0.0;
  VectorXc p1 = VectorXc::Zero(vars);
  if (coherent) p1 = std::polar(config.alpha_mag, config.phi) * u.col(*config.coherent_port);
  MatrixXc p2 = MatrixXc::Zero(vars, vars);  // upper-triangular coefficients of x_a x_b
  if (squeezed) {
    const VectorXc lp = u.col((*config.squeezer_ports)[0]);
    const VectorXc lq = u.col((*config.squeezer_ports)[1]);
    const double tr = std::tanh(config.r);
    for (int a = 0; a < vars; ++a)
      for (int b = 0; b < vars; ++b) {
        const Complex c = tr * lp(a) * lq(b);
        if (a <= b) p2(a, b) += c;
        else p2(b, a) += c;
      }
  }
  const double norm = (squeezed ? 1.0 / std::cosh(config.r) : 1.0) * (coherent ? std::exp(-0.5 * config.n_alpha()) : 1.0);

  MonomialIndex index(vars, cutoff_);
  std::vector<std::vector<Complex>> f(static_cast<std::size_t>(cutoff_ + 1));
  f[0] = {Complex(1.0)};
  double kept = 0.0;
  for (int k = 0; k <= cutoff_; ++k) {
    if (k > 0) {
      f[k].assign(index.count(k), Complex(0.0));
      const auto& prev = index.monomials(k - 1);
      for (std::size_t r = 0; r < prev.size(); ++r) {
        const Complex c = f[k - 1][r];
        if (c == Complex(0.0)) continue;
        Occupation e = prev[r];
        for (int a = 0; a < vars; ++a) {
          if (p1(a) == Complex(0.0)) continue;
          e[a] += 1;
          f[k][index.rank(e)] += c * p1(a);
          e[a] -= 1;
        }
      }
      if (k >= 2) {
        const auto& prev2 = index.monomials(k - 2);
        for (std::size_t r = 0; r < prev2.size(); ++r) {
          const Complex c = f[k - 2][r];
          if (c == Complex(0.0)) continue;
          Occupation e = prev2[r];
          for (int a = 0; a < vars; ++a) {
            for (int b = a; b < vars; ++b) {
              if (p2(a, b) == Complex(0.0)) continue;
              e[a] += 1;
              e[b] += 1;
              f[k][index.rank(e)] += 2.0 * c * p2(a, b);
              e[a] -= 1;
              e[b] -= 1;
            }
          }
        }
      }
      for (auto& c : f[k]) c /= static_cast<double>(k);
    }
    const auto& monos = index.monomials(k);
    for (std::size_t r = 0; r < monos.size(); ++r) {
      const double p = std::norm(norm * f[k][r]) * factorial_product(monos[r]);
      if (p == 0.0) continue;
      kept += p;
      Occupation visible(monos[r].begin(), monos[r].begin() + d);
      int detected = 0;
      for (int c : visible) detected += c;
      if (detected <= max_photons_) marginal_[visible] += p;
    }
  }
  loss_ = std::max(0.0, 1.0 - kept);
  if (loss_ >= epsilon && cutoff > 0) {
    std::ostringstream msg;
    msg << "truncation loss " << loss_ << " at cutoff " << cutoff_ << " exceeds " << epsilon;
    throw ResourceError(msg.str());
  }
}

double FockOracle::probability(const DetectionPattern& n) const {
  if (n.modes() != modes_) throw DimensionError("pattern dimension does not match the oracle");
  if (n.total() > max_photons_) throw DimensionError("pattern has more photons than the oracle tabulated");
  const auto it = marginal_.find(n.counts());
  return it == marginal_.end() ? 0.0 : it->second;
}

double oracle_probability(const SourceConfig& config, const TransferMatrix& t, const DetectionPattern& n, int cutoff,
                          double epsilon) {
  return FockOracle(config, t, n.total(), cutoff, epsilon).probability(n);
}

}  // namespace dgbs
