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

// Riemannian sparse coding of an HPD target against a dictionary of HPD atoms:
//
//   min_{alpha >= 0}  1/2 || log(H M(alpha) H) ||_F^2 + lambda ||alpha||_1,
//   M(alpha) = sum_i alpha_i D_i,   H = X^{-1/2}.
//
// The smooth part is minimised by ISTA with one-sided shrinkage, which is the
// exact proximal map of lambda ||.||_1 plus the non-negativity constraint.

#pragma once

#include <vector>

#include "srsr/hpd.hpp"

namespace srsr::coding {

/// A target X together with its whitener H = X^{-1/2}.
struct EncodingProblem {
  HpdMatrix target;
  HpdMatrix whitener;

  static EncodingProblem from_target(const HpdMatrix& target);
  Eigen::Index dim() const { return target.dim(); }
};

/// Non-negative coefficient vector. Construction rejects negative or
/// non-finite entries.
class SparseCode {
 public:
  SparseCode() = default;
  explicit SparseCode(RVector values);

  static SparseCode zeros(Eigen::Index n) { return SparseCode(RVector::Zero(n)); }
  static SparseCode uniform(Eigen::Index n) { return SparseCode(RVector::Constant(n, 1.0 / static_cast<double>(n))); }

  const RVector& values() const { return v_; }
  Eigen::Index size() const { return v_.size(); }
  double operator[](Eigen::Index i) const { return v_(i); }
  double l1() const { return v_.sum(); }

 private:
  RVector v_;
};

/// N = atoms_per_class * classes HPD atoms; labels[i] is the class id (1..C)
/// of atom i.
struct Dictionary {
  std::vector<HpdMatrix> atoms;
  std::vector<int> labels;
  int atoms_per_class = 0;
  int classes = 0;

  std::size_t size() const { return atoms.size(); }
  Eigen::Index dim() const { return atoms.empty() ? 0 : atoms.front().dim(); }
  /// Throws InvalidArgument when the invariants do not hold.
  void check() const;
};

struct SrsrConfig {
  double lambda = 0.5;
  double step = 1e-4;
  int layers = 4;
  double pd_floor = 1e-10;  // relative to Tr(M)/d
  int init_iterations = 100;
  bool safeguard = true;  // monotone backtracking on the ISTA step
  int max_halvings = 20;
  double ref_tol = 1e-8;
  int ref_max_iterations = 500;
};

/// sum_i alpha_i D_i (zero matrix for alpha = 0).
HermitianMatrix reconstruction(const SparseCode& alpha, const Dictionary& dict);

/// min eig(M) > pd_floor * Tr(M) / d.
bool reconstruction_is_pd(const HermitianMatrix& m, double pd_floor);

/// 1/2 ||log(H M H)||_F^2, the smooth residual term alone.
double residual(const EncodingProblem& p, const SparseCode& alpha, const Dictionary& dict,
                double pd_floor = SrsrConfig{}.pd_floor);

double objective(const EncodingProblem& p, const SparseCode& alpha, const Dictionary& dict, double lambda,
                 double pd_floor = SrsrConfig{}.pd_floor);

/// Gradient of the residual term: entry p is Re Tr(log(W) W^{-1} H D_p H)
/// with W = H M(alpha) H.
RVector residual_gradient(const EncodingProblem& p, const SparseCode& alpha, const Dictionary& dict,
                          double pd_floor = SrsrConfig{}.pd_floor);

/// residual_gradient + lambda * sgn(alpha), with sgn(0) = 0.
RVector full_gradient(const EncodingProblem& p, const SparseCode& alpha, const Dictionary& dict, double lambda,
                      double pd_floor = SrsrConfig{}.pd_floor);

/// max(x - theta, 0) entrywise.
RVector soft_threshold(const RVector& x, double theta);

struct StepResult {
  SparseCode code;
  double objective = 0.0;  // at `code`
  double step = 0.0;       // step length actually used (0 on failure)
  bool failed = false;     // safeguard exhausted or undefined gradient; code is the input
};

/// One ISTA update alpha <- max(alpha - t grad - lambda t, 0). With the
/// safeguard on, t is halved (up to cfg.max_halvings times) until the trial
/// reconstruction is PD and the objective does not increase.
StepResult ista_step(const EncodingProblem& p, const SparseCode& alpha, const Dictionary& dict,
                     const SrsrConfig& cfg);

/// Projected gradient with Barzilai-Borwein step lengths and a monotone
/// Armijo backtrack, started from the uniform code 1/N.
SparseCode spg_init(const EncodingProblem& p, const Dictionary& dict, const SrsrConfig& cfg);

struct SolveResult {
  SparseCode code;
  std::vector<double> trace;  // objective after each accepted iterate, starting with the input
  int iterations = 0;
  bool failed = false;
};

/// Reference solver: repeated ista_step until both |d objective| and
/// ||d alpha||_inf fall below cfg.ref_tol, or cfg.ref_max_iterations.
SolveResult solve_ista(const EncodingProblem& p, const SparseCode& start, const Dictionary& dict,
                       const SrsrConfig& cfg);

}  // namespace srsr::coding
