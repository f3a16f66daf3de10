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

// Dictionary update with the codes held fixed:
//
//   psi(D) = 1/2 sum_j ||log(G_j S_j(D) G_j)||_F^2 + lambda_B sum_i Tr(D_i),
//   S_j(D) = sum_i alpha_j^i D_i,   G_j = X_j^{-1/2},
//
// minimised over the product of HPD manifolds with Riemannian conjugate
// gradient: exponential-map retraction, affine-invariant parallel transport,
// Polak-Ribiere beta and an Armijo backtracking line search shared by all
// atoms.

#pragma once

#include <vector>

#include "srsr/hpd.hpp"
#include "srsr/sparse_coding.hpp"

namespace srsr::dict {

using coding::Dictionary;
using coding::EncodingProblem;
using coding::SparseCode;

/// A tangent vector at atom `atom` of the dictionary.
struct TangentVector {
  std::size_t atom = 0;
  HermitianMatrix value;
};

struct DictLearnConfig {
  double lambda_b = 1e-2;
  int max_iterations = 5;  // CG iterations per dict_update call
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  double initial_step = 1.0;
  int max_backtracks = 30;
  int restart_period = 0;  // 0 -> N * d^2
  double grad_tol = 1e-8;
  double pd_floor = 1e-10;
  bool freeze = false;
};

/// Training pairs (problem j with whitener G_j, frozen code alpha_j).
struct DictBatch {
  std::vector<EncodingProblem> problems;
  std::vector<SparseCode> codes;

  std::size_t size() const { return problems.size(); }
};

struct CgState {
  std::vector<HpdMatrix> atoms;             // where grads/directions live
  std::vector<HermitianMatrix> grads;       // Riemannian gradients
  std::vector<HermitianMatrix> directions;  // search directions
  double beta = 0.0;
  double step = 0.0;  // last accepted line-search step
  int iteration = 0;  // directions computed so far
};

double dict_objective(const DictBatch& batch, const std::vector<HpdMatrix>& atoms, double lambda_b,
                      double pd_floor = DictLearnConfig{}.pd_floor);

/// Euclidean gradients for every atom:
/// sum_j alpha_j^i G_j log(W_j) W_j^{-1} G_j + lambda_B I with W_j = G_j S_j G_j.
std::vector<HermitianMatrix> dict_euclidean_grads(const DictBatch& batch, const std::vector<HpdMatrix>& atoms,
                                                  double lambda_b, double pd_floor = DictLearnConfig{}.pd_floor);

HermitianMatrix dict_euclidean_grad(const DictBatch& batch, const std::vector<HpdMatrix>& atoms, double lambda_b,
                                    std::size_t i, double pd_floor = DictLearnConfig{}.pd_floor);

/// D_i G D_i.
TangentVector dict_riemannian_grad(std::size_t i, const HpdMatrix& atom, const HermitianMatrix& euclid_grad);

/// Exponential map p^{1/2} exp(p^{-1/2} v p^{-1/2}) p^{1/2}.
HpdMatrix retraction(const HpdMatrix& p, const HermitianMatrix& v);

/// Parallel transport E v E^H with E = (q p^{-1})^{1/2}.
HermitianMatrix vector_transport(const HpdMatrix& p, const HpdMatrix& q, const HermitianMatrix& v);

/// Sum of per-atom AIRM inner products.
double product_inner(const std::vector<HpdMatrix>& atoms, const std::vector<HermitianMatrix>& u,
                     const std::vector<HermitianMatrix>& v);

/// New search directions at `atoms` from the Riemannian gradients `grads`.
/// Restarts with the steepest-descent direction on the first call, every
/// `restart_period` directions, and whenever the result is not a descent
/// direction.
CgState cg_direction(const CgState& prev, std::vector<HpdMatrix> atoms, std::vector<HermitianMatrix> grads,
                     int restart_period);

struct LineSearchResult {
  double step = 0.0;
  bool flagged = false;  // no acceptable step; atoms are unchanged
  double value = 0.0;    // objective at the returned atoms
  std::vector<HpdMatrix> atoms;
};

/// Armijo backtracking along the retraction: the largest step
/// initial_step * backtrack^m with psi(R(step d)) <= psi + c1 step <grad, d>.
LineSearchResult line_search(const DictBatch& batch, const std::vector<HpdMatrix>& atoms,
                             const std::vector<HermitianMatrix>& grads,
                             const std::vector<HermitianMatrix>& directions, const DictLearnConfig& cfg);

struct DictUpdateResult {
  Dictionary dictionary;
  std::vector<double> trace;  // psi before the first and after every accepted step
  int iterations = 0;
  double grad_norm = 0.0;  // Riemannian gradient norm at the last evaluated point
};

DictUpdateResult dict_update(const DictBatch& batch, const Dictionary& in, const DictLearnConfig& cfg);

}  // namespace srsr::dict
