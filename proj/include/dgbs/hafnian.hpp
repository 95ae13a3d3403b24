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

#include <bit>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dgbs/gaussian.hpp"
#include "dgbs/types.hpp"

namespace dgbs {

/// Photon counts per output mode.
class DetectionPattern {
 public:
  explicit DetectionPattern(std::vector<int> counts);

  /// Collision-free pattern with one photon in each listed mode.
  static DetectionPattern from_modes(Index modes, std::span<const Index> clicked);
  static DetectionPattern vacuum(Index modes) { return DetectionPattern(std::vector<int>(modes, 0)); }

  Index modes() const { return static_cast<Index>(counts_.size()); }
  int total() const { return total_; }
  bool collision_free() const { return collision_free_; }
  const std::vector<int>& counts() const { return counts_; }
  int operator[](Index j) const { return counts_[static_cast<std::size_t>(j)]; }

  /// Modes with at least one photon, ascending.
  std::vector<Index> clicked() const;
  /// Rows of A kept in A_n: each mode j repeated n_j times, then each j + d.
  std::vector<Index> kernel_indices() const;
  /// log(prod_j n_j!).
  double log_factorial_product() const;
  /// "0110..." for collision-free patterns, otherwise counts joined by '.'.
  std::string to_string() const;
  static DetectionPattern parse(const std::string& text);

  friend bool operator==(const DetectionPattern&, const DetectionPattern&) = default;
  friend auto operator<=>(const DetectionPattern& a, const DetectionPattern& b) { return a.counts_ <=> b.counts_; }

 private:
  std::vector<int> counts_;
  int total_ = 0;
  bool collision_free_ = true;
};

/// A_n with the loop weights gamma~ kept separately.
struct ReducedKernel {
  MatrixXc a_n;
  VectorXc gamma_tilde;

  Index size() const { return a_n.rows(); }
};

ReducedKernel reduce_by_pattern(const AMatrix& a, const GammaVector& gamma, const DetectionPattern& n);

namespace detail {

inline constexpr int kMaxDenseKernel = 26;

template <typename Derived>
void check_even_symmetric(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols()) throw DimensionError("hafnian of a non-square matrix");
  if (m.rows() % 2 != 0) throw DimensionError("hafnian of an odd-dimensional matrix");
  using std::abs;
  double scale = 1.0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) scale = std::max<double>(scale, abs(m(i, j)));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = i + 1; j < m.cols(); ++j)
      if (abs(m(i, j) - m(j, i)) > 1e-10 * scale) throw DimensionError("hafnian of a non-symmetric matrix");
}

inline void check_dense_size(Index n) {
  if (n > kMaxDenseKernel) throw ResourceError("kernel too large for the subset recursion");
}

// Subset recursion: f(S) = w_i f(S \ i) + sum_{j in S, j > i} m_ij f(S \ {i, j}),
// i = min(S). Column p of `table` holds the part of f with exactly p pairs.
template <typename Scalar, typename DM, typename DV>
std::vector<Scalar> graded_loop_hafnian(const Eigen::MatrixBase<DM>& m, const Eigen::MatrixBase<DV>& w, int max_pairs,
                                        bool loops) {
  const int n = static_cast<int>(m.rows());
  check_dense_size(n);
  const int cols = max_pairs + 1;
  const std::size_t masks = std::size_t{1} << n;
  std::vector<Scalar> table(masks * static_cast<std::size_t>(cols), Scalar(0));
  table[0] = Scalar(1);
  for (std::size_t mask = 1; mask < masks; ++mask) {
    const int i = std::countr_zero(mask);
    const std::size_t rest = mask & (mask - 1);
    Scalar* out = &table[mask * cols];
    if (loops) {
      const Scalar* src = &table[rest * cols];
      const Scalar wi = w(i);
      for (int p = 0; p < cols; ++p) out[p] += wi * src[p];
    }
    for (std::size_t r = rest; r != 0; r &= r - 1) {
      const int j = std::countr_zero(r);
      const Scalar mij = m(i, j);
      const Scalar* src = &table[(rest & ~(std::size_t{1} << j)) * cols];
      for (int p = 1; p < cols; ++p) out[p] += mij * src[p - 1];
    }
  }
  const std::size_t full = masks - 1;
  return std::vector<Scalar>(table.begin() + static_cast<std::ptrdiff_t>(full * cols),
                             table.begin() + static_cast<std::ptrdiff_t>((full + 1) * cols));
}

template <typename Scalar, typename DM, typename DV>
Scalar subset_loop_hafnian(const Eigen::MatrixBase<DM>& m, const Eigen::MatrixBase<DV>& w, bool loops) {
  const int n = static_cast<int>(m.rows());
  check_dense_size(n);
  const std::size_t masks = std::size_t{1} << n;
  std::vector<Scalar> f(masks, Scalar(0));
  f[0] = Scalar(1);
  for (std::size_t mask = 1; mask < masks; ++mask) {
    if (!loops && (std::popcount(mask) & 1)) continue;
    const int i = std::countr_zero(mask);
    const std::size_t rest = mask & (mask - 1);
    Scalar acc = loops ? Scalar(w(i)) * f[rest] : Scalar(0);
    for (std::size_t r = rest; r != 0; r &= r - 1) {
      const int j = std::countr_zero(r);
      acc += Scalar(m(i, j)) * f[rest & ~(std::size_t{1} << j)];
    }
    f[mask] = acc;
  }
  return f[masks - 1];
}

// Explicit enumeration in lexicographic order: the lowest unused index is
// either a loop (tried first, when allowed) or paired with each later index in
// ascending order. Terms are accumulated with compensated summation.
template <typename Scalar, typename DM, typename DV>
void enumerate_matchings(const Eigen::MatrixBase<DM>& m, const Eigen::MatrixBase<DV>& w, bool loops, int max_pairs,
                         std::vector<bool>& used, Scalar product, int pairs, CompensatedSum<Scalar>& sum) {
  const int n = static_cast<int>(m.rows());
  int i = 0;
  while (i < n && used[i]) ++i;
  if (i == n) {
    sum.add(product);
    return;
  }
  used[i] = true;
  if (loops) enumerate_matchings<Scalar>(m, w, loops, max_pairs, used, product * Scalar(w(i)), pairs, sum);
  if (pairs < max_pairs) {
    for (int j = i + 1; j < n; ++j) {
      if (used[j]) continue;
      used[j] = true;
      enumerate_matchings<Scalar>(m, w, loops, max_pairs, used, product * Scalar(m(i, j)), pairs + 1, sum);
      used[j] = false;
    }
  }
  used[i] = false;
}

}  // namespace detail

// --- accelerated kernels (subset recursion) --------------------------------

/// Sum over all perfect matchings of products of matched entries.
template <typename Derived>
typename Derived::Scalar hafnian(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  detail::check_even_symmetric(m);
  if (m.rows() == 0) return Scalar(1);
  return detail::subset_loop_hafnian<Scalar>(m, m.diagonal(), false);
}

/// Sum over all matchings with fixed points; fixed point j weighs diag(j).
template <typename DM, typename DV>
typename DM::Scalar loop_hafnian(const Eigen::MatrixBase<DM>& m, const Eigen::MatrixBase<DV>& diag) {
  using Scalar = typename DM::Scalar;
  detail::check_even_symmetric(m);
  if (diag.size() != m.rows()) throw DimensionError("loop weights do not match the matrix size");
  if (m.rows() == 0) return Scalar(1);
  return detail::subset_loop_hafnian<Scalar>(m, diag, true);
}

/// Loop-hafnian contributions split by the number of matched pairs:
/// element p collects every matching with exactly p pairs.
template <typename DM, typename DV>
std::vector<typename DM::Scalar> loop_hafnian_by_pairs(const Eigen::MatrixBase<DM>& m,
                                                       const Eigen::MatrixBase<DV>& diag) {
  using Scalar = typename DM::Scalar;
  detail::check_even_symmetric(m);
  if (diag.size() != m.rows()) throw DimensionError("loop weights do not match the matrix size");
  if (m.rows() == 0) return {Scalar(1)};
  return detail::graded_loop_hafnian<Scalar>(m, diag, static_cast<int>(m.rows() / 2), true);
}

/// Loop hafnian restricted to matchings with at most k_max pairs, i.e. the
/// terms in which the loop weights appear at least n - 2 k_max times.
template <typename DM, typename DV>
typename DM::Scalar loop_hafnian_korder(const Eigen::MatrixBase<DM>& m, const Eigen::MatrixBase<DV>& diag,
                                        int k_max) {
  using Scalar = typename DM::Scalar;
  if (k_max < 0) throw DimensionError("k must be >= 0");
  detail::check_even_symmetric(m);
  if (diag.size() != m.rows()) throw DimensionError("loop weights do not match the matrix size");
  if (m.rows() == 0) return Scalar(1);
  const int half = static_cast<int>(m.rows() / 2);
  if (k_max >= half) return detail::subset_loop_hafnian<Scalar>(m, diag, true);
  if (k_max == 0) {
    Scalar p(1);
    for (Index j = 0; j < diag.size(); ++j) p *= Scalar(diag(j));
    return p;
  }
  const auto graded = detail::graded_loop_hafnian<Scalar>(m, diag, k_max, true);
  CompensatedSum<Scalar> sum;
  for (const Scalar& g : graded) sum.add(g);
  return sum.value();
}

// --- reference kernels (explicit enumeration) ------------------------------

template <typename Derived>
typename Derived::Scalar hafnian_enumerate(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  detail::check_even_symmetric(m);
  std::vector<bool> used(static_cast<std::size_t>(m.rows()), false);
  CompensatedSum<Scalar> sum;
  detail::enumerate_matchings<Scalar>(m, m.diagonal(), false, static_cast<int>(m.rows()), used, Scalar(1), 0, sum);
  return sum.value();
}

template <typename DM, typename DV>
typename DM::Scalar loop_hafnian_enumerate(const Eigen::MatrixBase<DM>& m, const Eigen::MatrixBase<DV>& diag,
                                           int max_pairs = -1) {
  using Scalar = typename DM::Scalar;
  detail::check_even_symmetric(m);
  if (diag.size() != m.rows()) throw DimensionError("loop weights do not match the matrix size");
  std::vector<bool> used(static_cast<std::size_t>(m.rows()), false);
  CompensatedSum<Scalar> sum;
  const int cap = max_pairs < 0 ? static_cast<int>(m.rows()) : max_pairs;
  detail::enumerate_matchings<Scalar>(m, diag, true, cap, used, Scalar(1), 0, sum);
  return sum.value();
}

// --- ReducedKernel overloads -----------------------------------------------

inline Complex loop_hafnian(const ReducedKernel& k) { return loop_hafnian(k.a_n, k.gamma_tilde); }
inline Complex loop_hafnian_korder(const ReducedKernel& k, int k_max) {
  return loop_hafnian_korder(k.a_n, k.gamma_tilde, k_max);
}
inline Complex hafnian(const ReducedKernel& k) { return hafnian(k.a_n); }

/// Number of matchings of n points with exactly p pairs: n! / (p! 2^p (n-2p)!).
double matchings_with_pairs(int n, int p);

}  // namespace dgbs
