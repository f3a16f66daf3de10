/**
 * Copyright 2026, The polsar-srsr Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Complex Hermitian kernel: validation, eigendecomposition, spectral matrix
// functions and the affine-invariant Riemannian metric (AIRM) on the cone of
// Hermitian positive-definite matrices.

#pragma once

#include <complex>

#include <Eigen/Dense>

#include "srsr/error.hpp"

namespace srsr {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

/// Absolute tolerance on |A(p,q) - conj(A(q,p))| accepted by validate_hpd.
inline constexpr double kHermitianTol = 1e-12;

/// Relative eigenvalue floor: eigenvalues in (0, kEigenFloor * max] are lifted.
inline constexpr double kEigenFloor = 1e-12;

/// A square complex matrix equal to its conjugate transpose. Construction
/// always stores the Hermitian part (A + A^H) / 2.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(const CMatrix& m);

  static HermitianMatrix zero(Eigen::Index d);
  static HermitianMatrix identity(Eigen::Index d);

  const CMatrix& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

  HermitianMatrix& operator+=(const HermitianMatrix& o);
  HermitianMatrix& operator-=(const HermitianMatrix& o);
  HermitianMatrix& operator*=(double s);

  friend HermitianMatrix operator+(HermitianMatrix a, const HermitianMatrix& b) { return a += b; }
  friend HermitianMatrix operator-(HermitianMatrix a, const HermitianMatrix& b) { return a -= b; }
  friend HermitianMatrix operator*(double s, HermitianMatrix a) { return a *= s; }
  friend HermitianMatrix operator*(HermitianMatrix a, double s) { return a *= s; }

 private:
  CMatrix m_;
};

namespace detail {
struct HpdAccess;
}

/// A Hermitian positive-definite matrix. Only obtainable via validate_hpd or
/// from operations whose output is HPD by construction.
class HpdMatrix {
 public:
  HpdMatrix() = default;

  const CMatrix& matrix() const { return m_.matrix(); }
  const HermitianMatrix& hermitian() const { return m_; }
  Eigen::Index dim() const { return m_.dim(); }

  static HpdMatrix identity(Eigen::Index d);

 private:
  friend struct detail::HpdAccess;
  explicit HpdMatrix(HermitianMatrix m) : m_(std::move(m)) {}

  HermitianMatrix m_;
};

namespace detail {
// Wraps a matrix already known to be HPD (e.g. V diag(f(l)) V^H with f > 0).
struct HpdAccess {
  static HpdMatrix wrap(HermitianMatrix m) { return HpdMatrix(std::move(m)); }
};
}  // namespace detail

struct HermEigen {
  RVector values;   // ascending
  CMatrix vectors;  // unitary, columns are eigenvectors
};

/// Largest |A - A^H| entry.
double hermitian_deviation(const CMatrix& a);

/// Checks a raw matrix for Hermitian symmetry (within `tol`, absolute) and
/// positive definiteness. Eigenvalues in (0, 1e-12 max] are regularized by a
/// diagonal shift; anything at or below zero is rejected.
HpdMatrix validate_hpd(const CMatrix& raw, double tol = kHermitianTol);

/// Throws ConvergenceFailure if the solver does not converge.
HermEigen herm_eig(const HermitianMatrix& x);

enum class SpectralFn { Log, Exp, Sqrt, InvSqrt };

/// V diag(f(lambda)) V^H. Log/Sqrt/InvSqrt require positive eigenvalues.
HermitianMatrix spectral_fn(const HermitianMatrix& x, SpectralFn f);
HermitianMatrix spectral_fn(const HpdMatrix& x, SpectralFn f);

HermitianMatrix logm(const HpdMatrix& x);
HpdMatrix expm(const HermitianMatrix& x);
HpdMatrix sqrtm(const HpdMatrix& x);
HpdMatrix invsqrtm(const HpdMatrix& x);
HpdMatrix inverse(const HpdMatrix& x);

/// A X A^H for invertible A.
HpdMatrix congruence(const CMatrix& a, const HpdMatrix& x);

/// ||log(X^{-1/2} Y X^{-1/2})||_F
double airm_distance(const HpdMatrix& x, const HpdMatrix& y);

/// Re Tr(p^{-1} u p^{-1} v), the AIRM inner product on the tangent space at p.
double airm_inner(const HpdMatrix& p, const HermitianMatrix& u, const HermitianMatrix& v);

/// Re Tr(a b) for Hermitian a, b (the Frobenius inner product).
double frobenius_inner(const HermitianMatrix& a, const HermitianMatrix& b);

}  // namespace srsr
