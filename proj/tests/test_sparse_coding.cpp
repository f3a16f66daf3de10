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

#include <cmath>
#include <random>

#include "srsr/sparse_coding.hpp"
#include "test_util.hpp"

using namespace srsr;
using namespace srsr::coding;
using namespace srsr::testing;

namespace {

Dictionary dict_of(std::vector<HpdMatrix> atoms) {
  Dictionary d;
  d.atoms = std::move(atoms);
  d.labels.assign(d.atoms.size(), 1);
  d.atoms_per_class = static_cast<int>(d.atoms.size());
  d.classes = 1;
  return d;
}

HpdMatrix scaled(const HpdMatrix& x, double s) { return validate_hpd(x.matrix() * s); }

// 1/2 sum log^2 of the eigenvalues of X^{-1} M, found as polynomial roots.
double oracle_residual(const HpdMatrix& x, const CMatrix& m) {
  double acc = 0.0;
  for (double l : similar_hermitian_eigenvalues(x.matrix().inverse() * m)) acc += std::log(l) * std::log(l);
  return 0.5 * acc;
}

// The same quantity composed from the kernel's own building blocks.
double composed_residual(const HpdMatrix& x, const CMatrix& m) {
  const CMatrix h = invsqrtm(x).matrix();
  const HermitianMatrix l = logm(validate_hpd(h * m * h, 1e-9));
  return 0.5 * l.matrix().squaredNorm();
}

}  // namespace

TEST(Reconstruction, OneHotAndZero) {
  std::mt19937_64 rng(1);
  const Dictionary d = random_dictionary(rng, 3, 4, 1);
  RVector e = RVector::Zero(4);
  e(2) = 1.0;
  EXPECT_EQ(reconstruction(SparseCode(e), d).matrix(), d.atoms[2].matrix());
  EXPECT_EQ(reconstruction(SparseCode::zeros(4), d).matrix().norm(), 0.0);
}

TEST(Reconstruction, MatchesReorderedAccumulation) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Dictionary d = random_dictionary(rng, 3, 5, 2);
    const SparseCode a = random_code(rng, 10);
    CMatrix acc = CMatrix::Zero(3, 3);
    for (int i = 9; i >= 0; --i) acc += a[i] * d.atoms[i].matrix();
    const CMatrix m = reconstruction(a, d).matrix();
    EXPECT_LT(rel_fro(m, acc), 1e-12);
    EXPECT_TRUE(reconstruction_is_pd(HermitianMatrix(m), 1e-10));
  }
}

TEST(Reconstruction, LengthMismatchThrows) {
  std::mt19937_64 rng(3);
  const Dictionary d = random_dictionary(rng, 3, 2, 1);
  EXPECT_THROW(reconstruction(SparseCode::zeros(3), d), Error);
}

TEST(SparseCodeType, RejectsNegativeAndNonFinite) {
  RVector v(2);
  v << 0.5, -1e-3;
  EXPECT_THROW(SparseCode{v}, Error);
  v << 0.5, std::nan("");
  EXPECT_THROW(SparseCode{v}, Error);
  EXPECT_NEAR(SparseCode::uniform(4).l1(), 1.0, 1e-15);
}

TEST(DictionaryType, CheckInvariants) {
  std::mt19937_64 rng(4);
  Dictionary d = random_dictionary(rng, 3, 3, 2);
  EXPECT_NO_THROW(d.check());
  d.labels[0] = 2;
  EXPECT_THROW(d.check(), Error);
  d = random_dictionary(rng, 3, 3, 2);
  d.atoms_per_class = 2;
  EXPECT_THROW(d.check(), Error);
}

TEST(Objective, TargetAtomGivesLambda) {
  std::mt19937_64 rng(5);
  const HpdMatrix x = random_hpd(rng, 3);
  Dictionary d = random_dictionary(rng, 3, 4, 1);
  d.atoms[1] = x;
  RVector e = RVector::Zero(4);
  e(1) = 1.0;
  const EncodingProblem p = EncodingProblem::from_target(x);
  EXPECT_NEAR(objective(p, SparseCode(e), d, 0.5), 0.5, 1e-12);
  EXPECT_NEAR(objective(p, SparseCode(e), d, 0.1), 0.1, 1e-12);
}

TEST(Objective, TwoHalvesGiveTwiceLambda) {
  std::mt19937_64 rng(6);
  const HpdMatrix x = random_hpd(rng, 3);
  const Dictionary d = dict_of({scaled(x, 0.5), scaled(x, 0.5)});
  RVector a(2);
  a << 1.0, 1.0;
  EXPECT_NEAR(objective(EncodingProblem::from_target(x), SparseCode(a), d, 0.5), 1.0, 1e-12);
}

TEST(Objective, WhitenerInvariant) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const EncodingProblem p = EncodingProblem::from_target(random_hpd(rng, 3));
    const CMatrix w = p.whitener.matrix() * p.target.matrix() * p.whitener.matrix();
    EXPECT_LT((w - CMatrix::Identity(3, 3)).norm(), 1e-10);
  }
}

TEST(Objective, MatchesIndependentEvaluations) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const HpdMatrix x = random_hpd(rng, 3);
    const Dictionary d = random_dictionary(rng, 3, 4, 3);
    const SparseCode a = random_code(rng, 12);
    const EncodingProblem p = EncodingProblem::from_target(x);
    const CMatrix m = reconstruction(a, d).matrix();
    const double lambda = 0.3;
    const double obj = objective(p, a, d, lambda);
    EXPECT_LT(rel_err(obj, composed_residual(x, m) + lambda * a.values().sum()), 1e-12);
    EXPECT_LT(rel_err(obj, oracle_residual(x, m) + lambda * a.values().sum()), 1e-7);
  }
}

TEST(Objective, ZeroCodeIsNotPd) {
  std::mt19937_64 rng(9);
  const Dictionary d = random_dictionary(rng, 3, 3, 1);
  const EncodingProblem p = EncodingProblem::from_target(random_hpd(rng, 3));
  try {
    objective(p, SparseCode::zeros(3), d, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ReconstructionNotPD);
  }
}

TEST(ResidualGradient, VanishesAtPerfectReconstruction) {
  std::mt19937_64 rng(10);
  const HpdMatrix x = random_hpd(rng, 3);
  Dictionary d = random_dictionary(rng, 3, 5, 1);
  d.atoms[3] = x;
  RVector e = RVector::Zero(5);
  e(3) = 1.0;
  const RVector g = residual_gradient(EncodingProblem::from_target(x), SparseCode(e), d);
  EXPECT_LT(g.lpNorm<Eigen::Infinity>(), 1e-12);
  const RVector fg = full_gradient(EncodingProblem::from_target(x), SparseCode(e), d, 0.5);
  EXPECT_NEAR(fg(3), 0.5, 1e-12);
  for (int i : {0, 1, 2, 4}) EXPECT_NEAR(fg(i), 0.0, 1e-12);  // sgn(0) = 0
}

TEST(ResidualGradient, DuplicatedAtomsAgreeExactly) {
  std::mt19937_64 rng(11);
  Dictionary d = random_dictionary(rng, 3, 6, 1);
  d.atoms[4] = d.atoms[1];
  const SparseCode a = random_code(rng, 6);
  const RVector g = residual_gradient(EncodingProblem::from_target(random_hpd(rng, 3)), a, d);
  EXPECT_EQ(g(1), g(4));
}

TEST(ResidualGradient, ClosedFormForScaledTarget) {
  // M = s X gives W = s I and every entry equals log(s)/s * Tr(H D_p H).
  std::mt19937_64 rng(12);
  const HpdMatrix x = random_hpd(rng, 3);
  const Dictionary d = dict_of({scaled(x, 0.8), random_hpd(rng, 3)});
  RVector a(2);
  a << 2.0, 0.0;
  const EncodingProblem p = EncodingProblem::from_target(x);
  const RVector g = residual_gradient(p, SparseCode(a), d);
  const double s = 1.6;
  const CMatrix h = p.whitener.matrix();
  EXPECT_NEAR(g(0), std::log(s) / s * 3.0 * 0.8, 1e-12);
  EXPECT_NEAR(g(1), std::log(s) / s * (h * d.atoms[1].matrix() * h).trace().real(), 1e-11);
}

TEST(ResidualGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(13);
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Dictionary d = random_dictionary(rng, 3, 4, 3);
    const EncodingProblem p = EncodingProblem::from_target(random_hpd(rng, 3));
    const SparseCode a = random_code(rng, 12, 0.1, 1.0);
    const RVector g = residual_gradient(p, a, d);
    for (int i = 0; i < 12; ++i) {
      RVector up = a.values(), dn = a.values();
      up(i) += h;
      dn(i) -= h;
      const double fd = (residual(p, SparseCode(up), d) - residual(p, SparseCode(dn), d)) / (2.0 * h);
      worst = std::max(worst, rel_err(g(i), fd));
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(FullGradient, LambdaZeroEqualsResidualGradient) {
  std::mt19937_64 rng(14);
  const Dictionary d = random_dictionary(rng, 3, 3, 2);
  const EncodingProblem p = EncodingProblem::from_target(random_hpd(rng, 3));
  const SparseCode a = random_code(rng, 6);
  EXPECT_EQ(full_gradient(p, a, d, 0.0), residual_gradient(p, a, d));
}

TEST(FullGradient, MatchesCentralDifferencesOfFullObjective) {
  std::mt19937_64 rng(15);
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Dictionary d = random_dictionary(rng, 3, 3, 2);
    const EncodingProblem p = EncodingProblem::from_target(random_hpd(rng, 3));
    const SparseCode a = random_code(rng, 6, 0.1, 1.0);
    const RVector g = full_gradient(p, a, d, 0.5);
    for (int i = 0; i < 6; ++i) {
      RVector up = a.values(), dn = a.values();
      up(i) += h;
      dn(i) -= h;
      const double fd =
          (objective(p, SparseCode(up), d, 0.5) - objective(p, SparseCode(dn), d, 0.5)) / (2.0 * h);
      worst = std::max(worst, rel_err(g(i), fd));
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(SoftThreshold, Examples) {
  RVector x(4);
  x << 1.2, 0.3, -0.4, 0.5;
  const RVector y = soft_threshold(x, 0.5);
  EXPECT_NEAR(y(0), 0.7, 1e-15);
  EXPECT_EQ(y(1), 0.0);
  EXPECT_EQ(y(2), 0.0);
  EXPECT_EQ(y(3), 0.0);
  const RVector z = soft_threshold(x, 0.0);
  EXPECT_EQ(z(0), 1.2);
  EXPECT_EQ(z(2), 0.0);
  EXPECT_EQ(z(3), 0.5);
}

TEST(IstaStep, ZeroGradientShrinksByLambdaT) {
  std::mt19937_64 rng(16);
  const HpdMatrix x = random_hpd(rng, 3);
  const Dictionary d = dict_of({x});
  SrsrConfig cfg;
  cfg.lambda = 3.0;
  cfg.step = 0.1;
  const StepResult r = ista_step(EncodingProblem::from_target(x), SparseCode(RVector::Ones(1)), d, cfg);
  EXPECT_FALSE(r.failed);
  EXPECT_NEAR(r.code[0], 0.7, 1e-12);
  EXPECT_EQ(r.step, 0.1);
}

TEST(IstaStep, ZeroCodeReportsFailure) {
  std::mt19937_64 rng(17);
  const Dictionary d = random_dictionary(rng, 3, 3, 1);
  const StepResult r =
      ista_step(EncodingProblem::from_target(random_hpd(rng, 3)), SparseCode::zeros(3), d, SrsrConfig{});
  EXPECT_TRUE(r.failed);
  EXPECT_EQ(r.code.values(), RVector::Zero(3));
  EXPECT_EQ(r.step, 0.0);
}

TEST(IstaStep, NeverIncreasesObjective) {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 100; ++trial) {
    const Dictionary d = random_dictionary(rng, 3, 4, 2);
    const EncodingProblem p = EncodingProblem::from_target(random_hpd(rng, 3));
    const SparseCode a = random_code(rng, 8, 0.0, 1.0);
    SrsrConfig cfg;
    cfg.step = trial % 2 ? 1e-4 : 0.5;
    const double before = objective(p, a, d, cfg.lambda);
    const StepResult r = ista_step(p, a, d, cfg);
    ASSERT_FALSE(r.failed);
    EXPECT_LE(r.objective, before + 1e-12);
    EXPECT_NEAR(r.objective, objective(p, r.code, d, cfg.lambda), 1e-12);
    EXPECT_GE(r.code.values().minCoeff(), 0.0);
  }
}

TEST(IstaStep, FixedPointIsReturnedUnchanged) {
  // With D_1 = exp(-lambda/d) X the residual gradient at alpha_1 = 1 equals
  // -lambda, which cancels the shrinkage; the idle atom's gradient stays
  // above -lambda so it remains at zero.
  std::mt19937_64 rng(19);
  const HpdMatrix x = random_hpd(rng, 3);
  SrsrConfig cfg;
  cfg.lambda = 0.5;
  cfg.step = 0.01;
  const Dictionary d = dict_of({scaled(x, std::exp(-cfg.lambda / 3.0)), scaled(x, 0.1)});
  RVector a(2);
  a << 1.0, 0.0;
  const EncodingProblem p = EncodingProblem::from_target(x);
  EXPECT_NEAR(residual_gradient(p, SparseCode(a), d)(0), -cfg.lambda, 1e-12);
  const StepResult r = ista_step(p, SparseCode(a), d, cfg);
  EXPECT_FALSE(r.failed);
  EXPECT_NEAR(r.code[0], 1.0, 1e-12);
  EXPECT_EQ(r.code[1], 0.0);
}

TEST(IstaStep, UnsafeguardedModeTakesTheFullStep) {
  std::mt19937_64 rng(20);
  const Dictionary d = random_dictionary(rng, 3, 3, 1);
  const EncodingProblem p = EncodingProblem::from_target(random_hpd(rng, 3));
  const SparseCode a = random_code(rng, 3);
  SrsrConfig cfg;
  cfg.safeguard = false;
  cfg.step = 1e-3;
  const StepResult r = ista_step(p, a, d, cfg);
  const RVector expect =
      soft_threshold(a.values() - cfg.step * residual_gradient(p, a, d), cfg.lambda * cfg.step);
  EXPECT_LT((r.code.values() - expect).norm(), 1e-15);
}

TEST(SolveIsta, TraceIsNonIncreasing) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Dictionary d = random_dictionary(rng, 3, 3, 3);
    const EncodingProblem p = EncodingProblem::from_target(random_hpd(rng, 3));
    SrsrConfig cfg;
    cfg.step = 0.05;
    const SolveResult r = solve_ista(p, SparseCode::uniform(9), d, cfg);
    ASSERT_GE(r.trace.size(), 2u);
    for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_LE(r.trace[k], r.trace[k - 1] + 1e-12);
    EXPECT_GE(r.code.values().minCoeff(), 0.0);
  }
}

TEST(SolveIsta, BeatsCoarseGridOnSmallInstance) {
  // d = 2, N = 3: every grid point has a closed-form 2x2 eigen-solve.
  std::mt19937_64 rng(22);
  const HpdMatrix x = random_hpd(rng, 2, 0.3);
  const Dictionary d = dict_of({random_hpd(rng, 2, 0.3), random_hpd(rng, 2, 0.3), random_hpd(rng, 2, 0.3)});
  const double lambda = 0.5;
  double best = 1e300;
  const double h = 0.05;
  for (int i = 0; i <= 40; ++i) {
    for (int j = 0; j <= 40; ++j) {
      for (int k = 0; k <= 40; ++k) {
        const CMatrix m = i * h * d.atoms[0].matrix() + j * h * d.atoms[1].matrix() + k * h * d.atoms[2].matrix();
        if (m.determinant().real() <= 0.0 || m.trace().real() <= 0.0) continue;
        best = std::min(best, oracle_residual(x, m) + lambda * h * (i + j + k));
      }
    }
  }
  SrsrConfig cfg;
  cfg.lambda = lambda;
  cfg.step = 0.05;
  cfg.ref_max_iterations = 20000;
  const EncodingProblem p = EncodingProblem::from_target(x);
  const SolveResult r = solve_ista(p, spg_init(p, d, cfg), d, cfg);
  EXPECT_LE(objective(p, r.code, d, lambda), best + 1e-3);
}

TEST(SpgInit, FeasibleAndNoWorseThanUniform) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const Dictionary d = random_dictionary(rng, 3, 4, 3);
    const EncodingProblem p = EncodingProblem::from_target(random_hpd(rng, 3));
    const SrsrConfig cfg;
    const SparseCode a = spg_init(p, d, cfg);
    EXPECT_GE(a.values().minCoeff(), 0.0);
    EXPECT_LE(objective(p, a, d, cfg.lambda), objective(p, SparseCode::uniform(12), d, cfg.lambda) + 1e-12);
  }
}

TEST(SpgInit, PicksTheTargetAtom) {
  std::mt19937_64 rng(24);
  std::uniform_int_distribution<int> pick(0, 11);
  int hits = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Dictionary d = random_dictionary(rng, 3, 4, 3);
    const HpdMatrix x = random_hpd(rng, 3);
    const int j = pick(rng);
    d.atoms[j] = x;
    const SparseCode a = spg_init(EncodingProblem::from_target(x), d, SrsrConfig{});
    Eigen::Index arg = 0;
    a.values().maxCoeff(&arg);
    hits += arg == j;
  }
  EXPECT_EQ(hits, 100);
}

TEST(SpgInit, EmptyDictionaryThrows) {
  std::mt19937_64 rng(25);
  EXPECT_THROW(spg_init(EncodingProblem::from_target(random_hpd(rng, 3)), Dictionary{}, SrsrConfig{}), Error);
}
