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

#include <cmath>
#include <sstream>

namespace dgbs {

DetectionPattern::DetectionPattern(std::vector<int> counts) : counts_(std::move(counts)) {
  for (int c : counts_) {
    if (c < 0) throw DimensionError("photon counts must be non-negative");
    total_ += c;
    if (c > 1) collision_free_ = false;
  }
}

DetectionPattern DetectionPattern::from_modes(Index modes, std::span<const Index> clicked) {
  std::vector<int> counts(static_cast<std::size_t>(modes), 0);
  for (Index j : clicked) {
    if (j < 0 || j >= modes) throw DimensionError("clicked mode outside the pattern");
    counts[static_cast<std::size_t>(j)] += 1;
  }
  return DetectionPattern(std::move(counts));
}

std::vector<Index> DetectionPattern::clicked() const {
  std::vector<Index> out;
  for (Index j = 0; j < modes(); ++j)
    if (counts_[j] > 0) out.push_back(j);
  return out;
}

std::vector<Index> DetectionPattern::kernel_indices() const {
  const Index d = modes();
  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(2 * total_));
  for (Index j = 0; j < d; ++j)
    for (int r = 0; r < counts_[j]; ++r) rows.push_back(j);
  for (Index j = 0; j < d; ++j)
    for (int r = 0; r < counts_[j]; ++r) rows.push_back(j + d);
  return rows;
}

double DetectionPattern::log_factorial_product() const {
  double s = 0.0;
  for (int c : counts_) s += std::lgamma(c + 1.0);
  return s;
}

std::string DetectionPattern::to_string() const {
  std::string s;
  if (collision_free_) {
    for (int c : counts_) s.push_back(c ? '1' : '0');
    return s;
  }
  for (std::size_t j = 0; j < counts_.size(); ++j) {
    if (j) s.push_back('.');
    s += std::to_string(counts_[j]);
  }
  return s;
}

DetectionPattern DetectionPattern::parse(const std::string& text) {
  std::vector<int> counts;
  if (text.find('.') == std::string::npos) {
    for (char ch : text) {
      if (ch != '0' && ch != '1') throw DimensionError("bad pattern string: " + text);
      counts.push_back(ch - '0');
    }
  } else {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, '.')) counts.push_back(std::stoi(item));
  }
  return DetectionPattern(std::move(counts));
}

ReducedKernel reduce_by_pattern(const AMatrix& a, const GammaVector& gamma, const DetectionPattern& n) {
  if (n.modes() != a.modes() || gamma.modes() != a.modes()) {
    throw DimensionError("pattern dimension does not match the kernel");
  }
  const auto rows = n.kernel_indices();
  const Index size = static_cast<Index>(rows.size());
  ReducedKernel k;
  k.a_n.resize(size, size);
  k.gamma_tilde.resize(size);
  const MatrixXc& full = a.full();
  for (Index i = 0; i < size; ++i) {
    k.gamma_tilde(i) = gamma.gamma(rows[i]);
    for (Index j = 0; j < size; ++j) k.a_n(i, j) = full(rows[i], rows[j]);
  }
  return k;
}

double matchings_with_pairs(int n, int p) {
  if (p < 0 || 2 * p > n) return 0.0;
  // C(n, 2p) (2p - 1)!!, built up exactly while it fits in a double.
  double count = 1.0;
  for (int i = 0; i < 2 * p; ++i) count = count * (n - i) / (i + 1);
  for (int i = 2 * p - 1; i > 1; i -= 2) count *= i;
  return std::round(count);
}

}  // namespace dgbs
