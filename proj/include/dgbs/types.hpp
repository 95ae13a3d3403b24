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

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dgbs {

using Complex = std::complex<double>;
using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Base class of every error raised by the library. The CLI maps these to
/// exit code 1 ("domain error").
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid source/circuit/run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A state, transfer matrix or reconstructed kernel that is not physical.
class PhysicalityError : public Error {
 public:
  using Error::Error;
};

/// Ill-conditioned or singular linear algebra.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Enumeration or truncation budget exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Shapes that do not line up (pattern vs. mode count, index sets, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kPi = 3.14159265358979323846;

/// Swap matrix [[0, I], [I, 0]] of size 2d.
inline MatrixXc swap_matrix(Index d) {
  MatrixXc x = MatrixXc::Zero(2 * d, 2 * d);
  x.topRightCorner(d, d).setIdentity();
  x.bottomLeftCorner(d, d).setIdentity();
  return x;
}

/// Wraps an angle to [-pi, pi).
inline double wrap_phase(double a) {
  double w = std::fmod(a + kPi, 2.0 * kPi);
  if (w < 0) w += 2.0 * kPi;
  return w - kPi;
}

/// Neumaier-compensated accumulator; used wherever a reduction order has to
/// stay fixed and accurate (matching sums, distribution normalisation).
template <typename T>
class CompensatedSum {
 public:
  void add(T x) {
    T t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  T value() const { return sum_ + comp_; }

 private:
  T sum_{};
  T comp_{};
};

template <>
class CompensatedSum<Complex> {
 public:
  void add(Complex x) {
    re_.add(x.real());
    im_.add(x.imag());
  }
  Complex value() const { return {re_.value(), im_.value()}; }

 private:
  CompensatedSum<double> re_;
  CompensatedSum<double> im_;
};

/// 64-bit FNV-1a over raw bytes; used for provenance hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h);

}  // namespace dgbs
