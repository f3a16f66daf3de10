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

#include "srsr/hpd.hpp"

#include <cmath>
#include <string>

namespace srsr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnsupportedDim: return "UnsupportedDim";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::EmptySegment: return "EmptySegment";
    case ErrorCode::ReconstructionNotPD: return "ReconstructionNotPD";
    case ErrorCode::InsufficientLabels: return "InsufficientLabels";
    case ErrorCode::MissingSegment: return "MissingSegment";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::StageFailure: return "StageFailure";
  }
  return "Unknown";
}

namespace {

void require_square(const CMatrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void require_same_dim(Eigen::Index a, Eigen::Index b) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch,
                "dimensions " + std::to_string(a) + " and " + std::to_string(b));
  }
}

CMatrix reassemble(const HermEigen& e, const RVector& f) {
  return e.vectors * f.asDiagonal() * e.vectors.adjoint();
}

}  // namespace

HermitianMatrix::HermitianMatrix(const CMatrix& m) {
  require_square(m);
  m_ = (m + m.adjoint()) * 0.5;
}

HermitianMatrix HermitianMatrix::zero(Eigen::Index d) { return HermitianMatrix(CMatrix::Zero(d, d)); }

HermitianMatrix HermitianMatrix::identity(Eigen::Index d) {
  return HermitianMatrix(CMatrix::Identity(d, d));
}

HermitianMatrix& HermitianMatrix::operator+=(const HermitianMatrix& o) {
  require_same_dim(dim(), o.dim());
  m_ += o.m_;
  return *this;
}

HermitianMatrix& HermitianMatrix::operator-=(const HermitianMatrix& o) {
  require_same_dim(dim(), o.dim());
  m_ -= o.m_;
  return *this;
}

HermitianMatrix& HermitianMatrix::operator*=(double s) {
  m_ *= s;
  return *this;
}

HpdMatrix HpdMatrix::identity(Eigen::Index d) {
  return detail::HpdAccess::wrap(HermitianMatrix::identity(d));
}

double hermitian_deviation(const CMatrix& a) {
  require_square(a);
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

HermEigen herm_eig(const HermitianMatrix& x) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(x.matrix());
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::ConvergenceFailure, "Hermitian eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

HpdMatrix validate_hpd(const CMatrix& raw, double tol) {
  require_square(raw);
  if (raw.size() == 0) throw Error(ErrorCode::DimensionMismatch, "empty matrix");
  if (!raw.allFinite()) throw Error(ErrorCode::NotPositiveDefinite, "non-finite entries");
  const double dev = hermitian_deviation(raw);
  if (dev > tol) {
    throw Error(ErrorCode::NotHermitian, "Hermitian deviation " + std::to_string(dev));
  }
  HermitianMatrix h(raw);
  const HermEigen e = herm_eig(h);
  const double lo = e.values(0);
  const double hi = e.values(e.values.size() - 1);
  if (lo <= 0.0 || hi <= 0.0) {
    throw Error(ErrorCode::NotPositiveDefinite, "min eigenvalue " + std::to_string(lo));
  }
  if (lo <= kEigenFloor * hi) {
    h += HermitianMatrix(CMatrix::Identity(h.dim(), h.dim()) * Complex(kEigenFloor * hi));
  }
  return detail::HpdAccess::wrap(std::move(h));
}

HermitianMatrix spectral_fn(const HermitianMatrix& x, SpectralFn f) {
  const HermEigen e = herm_eig(x);
  if (f != SpectralFn::Exp && e.values(0) <= 0.0) {
    throw Error(ErrorCode::NotPositiveDefinite,
                "spectral function needs positive eigenvalues, got " + std::to_string(e.values(0)));
  }
  RVector g(e.values.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double l = e.values(i);
    switch (f) {
      case SpectralFn::Log: g(i) = std::log(l); break;
      case SpectralFn::Exp: g(i) = std::exp(l); break;
      case SpectralFn::Sqrt: g(i) = std::sqrt(l); break;
      case SpectralFn::InvSqrt: g(i) = 1.0 / std::sqrt(l); break;
    }
  }
  return HermitianMatrix(reassemble(e, g));
}

HermitianMatrix spectral_fn(const HpdMatrix& x, SpectralFn f) { return spectral_fn(x.hermitian(), f); }

HermitianMatrix logm(const HpdMatrix& x) { return spectral_fn(x, SpectralFn::Log); }

HpdMatrix expm(const HermitianMatrix& x) {
  return detail::HpdAccess::wrap(spectral_fn(x, SpectralFn::Exp));
}

HpdMatrix sqrtm(const HpdMatrix& x) { return detail::HpdAccess::wrap(spectral_fn(x, SpectralFn::Sqrt)); }

HpdMatrix invsqrtm(const HpdMatrix& x) {
  return detail::HpdAccess::wrap(spectral_fn(x, SpectralFn::InvSqrt));
}

HpdMatrix inverse(const HpdMatrix& x) {
  const HermEigen e = herm_eig(x.hermitian());
  return detail::HpdAccess::wrap(HermitianMatrix(reassemble(e, e.values.cwiseInverse())));
}

HpdMatrix congruence(const CMatrix& a, const HpdMatrix& x) {
  require_square(a);
  require_same_dim(a.rows(), x.dim());
  const CMatrix y = a * x.matrix() * a.adjoint();
  return validate_hpd((y + y.adjoint()) * 0.5);
}

double airm_distance(const HpdMatrix& x, const HpdMatrix& y) {
  require_same_dim(x.dim(), y.dim());
  // Eigenvalues of X^{-1/2} Y X^{-1/2} equal those of L^{-1} Y L^{-H} with
  // X = L L^H; the triangular solve is cheaper and better conditioned.
  Eigen::LLT<CMatrix> llt(x.matrix());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization failed");
  }
  CMatrix w = llt.matrixL().solve(y.matrix());
  w = llt.matrixL().solve(w.adjoint().eval()).adjoint();
  const HermEigen e = herm_eig(HermitianMatrix(w));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < e.values.size(); ++i) {
    const double l = std::log(e.values(i));
    acc += l * l;
  }
  return std::sqrt(acc);
}

double airm_inner(const HpdMatrix& p, const HermitianMatrix& u, const HermitianMatrix& v) {
  require_same_dim(p.dim(), u.dim());
  require_same_dim(p.dim(), v.dim());
  Eigen::LLT<CMatrix> llt(p.matrix());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization failed");
  }
  const CMatrix a = llt.solve(u.matrix());
  const CMatrix b = llt.solve(v.matrix());
  // Re Tr(A B) without forming the product.
  return (a.transpose().cwiseProduct(b)).sum().real();
}

double frobenius_inner(const HermitianMatrix& a, const HermitianMatrix& b) {
  require_same_dim(a.dim(), b.dim());
  return (a.matrix().transpose().cwiseProduct(b.matrix())).sum().real();
}

}  // namespace srsr
