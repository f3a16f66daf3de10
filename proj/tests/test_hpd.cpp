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

#include <gtest/gtest.h>

#include <random>

#include "srsr/hpd.hpp"
#include "test_util.hpp"

using namespace srsr;
using namespace srsr::testing;

namespace {

// Fixture matrices; reference values below were computed once with an
// independent dense linear-algebra package (scipy.linalg logm / sqrtm).
CMatrix herm_from_upper(std::initializer_list<std::initializer_list<Complex>> rows) {
  const int d = static_cast<int>(rows.size());
  CMatrix m = CMatrix::Zero(d, d);
  int i = 0;
  for (const auto& r : rows) {
    int j = 0;
    for (const auto& v : r) {
      if (j >= i) {
        m(i, j) = v;
        m(j, i) = std::conj(v);
      }
      ++j;
    }
    ++i;
  }
  for (int k = 0; k < d; ++k) m(k, k) = m(k, k).real();
  return m;
}

const Complex I(0.0, 1.0);

CMatrix fixture_x() { return herm_from_upper({{2.0, 0.5 + 0.3 * I, 0.1 - 0.2 * I}, {0, 1.5, 0.4 * I}, {0, 0, 1.2}}); }
CMatrix fixture_y() { return herm_from_upper({{1.0, 0.2 * I, 0.3}, {0, 2.5, -0.1 + 0.1 * I}, {0, 0, 0.8}}); }

}  // namespace

TEST(ValidateHpd, AcceptsIdentity) {
  const HpdMatrix m = validate_hpd(CMatrix::Identity(3, 3));
  EXPECT_EQ(m.matrix(), CMatrix::Identity(3, 3));
}

TEST(ValidateHpd, RejectsSingularDiagonal) {
  CMatrix m = CMatrix::Identity(3, 3);
  m(1, 1) = 0.0;
  try {
    validate_hpd(m);
    FAIL() << "expected NotPositiveDefinite";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
}

TEST(ValidateHpd, RejectsNonHermitian) {
  CMatrix m = CMatrix::Identity(2, 2);
  m(0, 1) = 0.5;
  try {
    validate_hpd(m);
    FAIL() << "expected NotHermitian";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotHermitian);
  }
}

TEST(ValidateHpd, RejectsNegativeDefinite) {
  EXPECT_THROW(validate_hpd(-CMatrix::Identity(2, 2)), Error);
}

TEST(ValidateHpd, GramPlusShiftAcceptedAndSymmetrized) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const CMatrix a = random_complex(rng, 3);
    CMatrix m = a * a.adjoint() + 1e-3 * CMatrix::Identity(3, 3);
    m(0, 1) += Complex(1e-14, 0.0);  // tiny asymmetry within tolerance
    const HpdMatrix h = validate_hpd(m);
    EXPECT_EQ(hermitian_deviation(h.matrix()), 0.0);
    for (double l : similar_hermitian_eigenvalues(h.matrix())) EXPECT_GT(l, 0.0);
  }
}

TEST(ValidateHpd, TinyEigenvalueIsLifted) {
  CMatrix m = CMatrix::Identity(2, 2);
  m(1, 1) = 1e-14;  // in (0, 1e-12 * max]
  const HpdMatrix h = validate_hpd(m);
  EXPECT_GT(herm_eig(h.hermitian()).values(0), 0.0);
}

TEST(HermEig, IdentityAndPermutedDiagonal) {
  const HermEigen e = herm_eig(HermitianMatrix::identity(3));
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(e.values(i), 1.0);
  CMatrix d = CMatrix::Zero(3, 3);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  d(2, 2) = 2.0;
  const HermEigen f = herm_eig(HermitianMatrix(d));
  EXPECT_NEAR(f.values(0), 1.0, 1e-15);
  EXPECT_NEAR(f.values(1), 2.0, 1e-15);
  EXPECT_NEAR(f.values(2), 3.0, 1e-15);
}

TEST(HermEig, ReconstructionUnitarityAndTrace) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 3;
    const HermitianMatrix x = random_hermitian(rng, d);
    const HermEigen e = herm_eig(x);
    for (int i = 1; i < d; ++i) EXPECT_LE(e.values(i - 1), e.values(i));
    const CMatrix rec = e.vectors * e.values.cast<Complex>().asDiagonal() * e.vectors.adjoint();
    EXPECT_LT(rel_fro(rec, x.matrix()), 1e-10);
    EXPECT_LT((e.vectors.adjoint() * e.vectors - CMatrix::Identity(d, d)).norm(), 1e-10);
    EXPECT_LT(rel_err(e.values.sum(), x.matrix().trace().real(), 1.0), 1e-10);
  }
}

TEST(HermEig, AgreesWithCharacteristicPolynomial) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const HpdMatrix x = random_hpd(rng, 3);
    const auto roots = similar_hermitian_eigenvalues(x.matrix());
    const RVector ev = herm_eig(x.hermitian()).values;
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(ev(i), roots[i], 1e-7 * std::max(1.0, roots[2]));
  }
}

TEST(Spectral, LogOfIdentityIsZero) {
  EXPECT_LT(logm(HpdMatrix::identity(3)).matrix().norm(), 1e-15);
}

TEST(Spectral, InvSqrtOfDiagonal) {
  CMatrix d = CMatrix::Zero(3, 3);
  d(0, 0) = 4.0;
  d(1, 1) = 9.0;
  d(2, 2) = 16.0;
  const CMatrix r = invsqrtm(validate_hpd(d)).matrix();
  EXPECT_NEAR(r(0, 0).real(), 0.5, 1e-15);
  EXPECT_NEAR(r(1, 1).real(), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r(2, 2).real(), 0.25, 1e-15);
  EXPECT_LT(std::abs(r(0, 1)) + std::abs(r(1, 2)) + std::abs(r(0, 2)), 1e-15);
}

TEST(Spectral, LogMatchesReferenceFixture) {
  const CMatrix l = logm(validate_hpd(fixture_x())).matrix();
  CMatrix ref(3, 3);
  ref << 0.6158031159575299, Complex(0.33305586220533523, 0.19789842096725554),
      Complex(0.09902403640315731, -0.18837259102658618), Complex(0.3330558622053349, -0.1978984209672553),
      0.2754906424173987, Complex(0.00241887044493194, 0.359813088938647),
      Complex(0.09902403640315721, 0.18837259102658602), Complex(0.00241887044493216, -0.35981308893864727),
      0.09936205545453237;
  EXPECT_LT(rel_fro(l, ref), 1e-13);
}

TEST(Spectral, RoundTripsOnRandomMatrices) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const HpdMatrix x = random_hpd(rng, 2 + trial % 2);
    EXPECT_LT(rel_fro(expm(logm(x)).matrix(), x.matrix()), 1e-10);
    const CMatrix s = sqrtm(x).matrix();
    EXPECT_LT(rel_fro(s * s, x.matrix()), 1e-10);
    const CMatrix h = invsqrtm(x).matrix();
    EXPECT_LT(rel_fro(h * x.matrix() * h, CMatrix::Identity(x.dim(), x.dim())), 1e-10);
    EXPECT_LT(rel_fro(inverse(x).matrix() * x.matrix(), CMatrix::Identity(x.dim(), x.dim())), 1e-10);
  }
}

TEST(Spectral, LogRejectsIndefiniteInput) {
  CMatrix m = CMatrix::Identity(2, 2);
  m(1, 1) = -1.0;
  try {
    spectral_fn(HermitianMatrix(m), SpectralFn::Log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
  EXPECT_NO_THROW(spectral_fn(HermitianMatrix(m), SpectralFn::Exp));
}

TEST(Airm, TrivialValues) {
  const HpdMatrix i3 = HpdMatrix::identity(3);
  EXPECT_NEAR(airm_distance(i3, i3), 0.0, 1e-15);
  const HpdMatrix e2 = validate_hpd(std::exp(2.0) * CMatrix::Identity(3, 3));
  EXPECT_NEAR(airm_distance(i3, e2), 2.0 * std::sqrt(3.0), 1e-12);
}

TEST(Airm, MatchesReferenceFixture) {
  const HpdMatrix x = validate_hpd(fixture_x());
  const HpdMatrix y = validate_hpd(fixture_y());
  EXPECT_NEAR(airm_distance(x, y), 1.3035334891382016, 1e-13);
  EXPECT_NEAR(airm_distance(y, x), 1.3035334891382016, 1e-13);
}

TEST(Airm, DimensionMismatch) {
  try {
    airm_distance(HpdMatrix::identity(2), HpdMatrix::identity(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Airm, MatchesPolynomialOracleOnRandomPairs) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const int d = 2 + trial % 2;
    const HpdMatrix x = random_hpd(rng, d);
    const HpdMatrix y = random_hpd(rng, d);
    EXPECT_LT(rel_err(airm_distance(x, y), oracle_airm(x, y)), 1e-7);
  }
}

TEST(Airm, InvarianceProperties) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 2;
    const HpdMatrix x = random_hpd(rng, d);
    const HpdMatrix y = random_hpd(rng, d);
    const double dxy = airm_distance(x, y);
    EXPECT_LT(rel_err(dxy, airm_distance(y, x)), 1e-9);
    EXPECT_LT(airm_distance(x, x), 1e-9);
    EXPECT_GT(dxy, 0.0);
    const CMatrix a = random_complex(rng, d);
    EXPECT_LT(rel_err(dxy, airm_distance(congruence(a, x), congruence(a, y))), 1e-9);
    EXPECT_LT(rel_err(dxy, airm_distance(inverse(x), inverse(y))), 1e-9);
  }
}

TEST(Airm, TriangleInequality) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const HpdMatrix x = random_hpd(rng, 3);
    const HpdMatrix y = random_hpd(rng, 3);
    const HpdMatrix z = random_hpd(rng, 3);
    EXPECT_LE(airm_distance(x, z), airm_distance(x, y) + airm_distance(y, z) + 1e-12);
  }
}

TEST(AirmInner, TrivialValues) {
  const HpdMatrix i3 = HpdMatrix::identity(3);
  EXPECT_NEAR(airm_inner(i3, HermitianMatrix::identity(3), HermitianMatrix::identity(3)), 3.0, 1e-15);
  std::mt19937_64 rng(37);
  const HermitianMatrix u = random_hermitian(rng, 3);
  const HermitianMatrix v = random_hermitian(rng, 3);
  EXPECT_NEAR(airm_inner(i3, u, v), frobenius_inner(u, v), 1e-13);
  EXPECT_NEAR(frobenius_inner(u, v), (u.matrix() * v.matrix()).trace().real(), 1e-13);
}

TEST(AirmInner, MatchesReferenceFixture) {
  const HpdMatrix x = validate_hpd(fixture_x());
  const HermitianMatrix u(herm_from_upper({{0.3, 0.1 - 0.2 * I, 0.05 * I}, {0, -0.4, 0.2}, {0, 0, 0.1}}));
  const HermitianMatrix v(herm_from_upper({{1.0, 0.3 * I, -0.2}, {0, 0.5, 0.1 + 0.1 * I}, {0, 0, -0.7}}));
  EXPECT_NEAR(airm_inner(x, u, v), -0.053964363330602644, 1e-14);
}

TEST(AirmInner, SymmetricAndPositive) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const HpdMatrix p = random_hpd(rng, 3);
    const HermitianMatrix u = random_hermitian(rng, 3);
    const HermitianMatrix v = random_hermitian(rng, 3);
    EXPECT_NEAR(airm_inner(p, u, v), airm_inner(p, v, u), 1e-9 * std::abs(airm_inner(p, u, v)) + 1e-12);
    // p^{-1/2} u p^{-1/2} has real eigenvalues; the inner product is their
    // squared sum.
    const CMatrix h = invsqrtm(p).matrix();
    double sq = 0.0;
    for (double l : similar_hermitian_eigenvalues(h * u.matrix() * h)) sq += l * l;
    EXPECT_GT(airm_inner(p, u, u), 0.0);
    EXPECT_LT(rel_err(airm_inner(p, u, u), sq), 1e-6);
  }
}

TEST(HermitianMatrix, ArithmeticKeepsSymmetry) {
  std::mt19937_64 rng(43);
  HermitianMatrix a = random_hermitian(rng, 3);
  const HermitianMatrix b = random_hermitian(rng, 3);
  const HermitianMatrix c = 2.0 * a - b;
  EXPECT_EQ(hermitian_deviation(c.matrix()), 0.0);
  EXPECT_LT((c.matrix() - (2.0 * a.matrix() - b.matrix())).norm(), 1e-14);
}
