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

#include "srsr/riemannian_dict.hpp"

#include <cmath>

#include "srsr/parallel.hpp"

namespace srsr::dict {

namespace {

void check_batch(const DictBatch& batch, const std::vector<HpdMatrix>& atoms) {
  if (batch.problems.size() != batch.codes.size()) {
    throw Error(ErrorCode::DimensionMismatch, "batch needs one code per problem");
  }
  for (const auto& code : batch.codes) {
    if (static_cast<std::size_t>(code.size()) != atoms.size()) {
      throw Error(ErrorCode::DimensionMismatch, "code length differs from dictionary size");
    }
  }
}

CMatrix combine(const SparseCode& code, const std::vector<HpdMatrix>& atoms) {
  const Eigen::Index d = atoms.front().dim();
  CMatrix s = CMatrix::Zero(d, d);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const double a = code[static_cast<Eigen::Index>(i)];
    if (a != 0.0) s += a * atoms[i].matrix();
  }
  return s;
}

// Per-problem eigendecomposition of W_j = G_j S_j G_j.
std::vector<HermEigen> whitened(const DictBatch& batch, const std::vector<HpdMatrix>& atoms, double pd_floor) {
  std::vector<HermEigen> out(batch.size());
  parallel_for(static_cast<std::ptrdiff_t>(batch.size()), [&](std::ptrdiff_t j) {
    const HermitianMatrix s(combine(batch.codes[j], atoms));
    if (!coding::reconstruction_is_pd(s, pd_floor)) {
      throw Error(ErrorCode::ReconstructionNotPD, "batch item " + std::to_string(j) + " has a non-PD reconstruction");
    }
    const CMatrix& g = batch.problems[j].whitener.matrix();
    out[j] = herm_eig(HermitianMatrix(g * s.matrix() * g));
    if (out[j].values(0) <= 0.0) {
      throw Error(ErrorCode::ReconstructionNotPD, "batch item " + std::to_string(j) + " has a non-PD reconstruction");
    }
  });
  return out;
}

double trace_sum(const std::vector<HpdMatrix>& atoms) {
  double t = 0.0;
  for (const auto& a : atoms) t += a.matrix().trace().real();
  return t;
}

// Cached square roots of an atom for repeated retractions from it.
struct AtomRoots {
  CMatrix sqrt;
  CMatrix invsqrt;
};

AtomRoots roots_of(const HpdMatrix& p) {
  const HermEigen e = herm_eig(p.hermitian());
  const RVector s = e.values.cwiseSqrt();
  return {e.vectors * s.asDiagonal() * e.vectors.adjoint(),
          e.vectors * s.cwiseInverse().asDiagonal() * e.vectors.adjoint()};
}

HpdMatrix retract_with(const AtomRoots& r, const HermitianMatrix& v) {
  const HpdMatrix inner = expm(HermitianMatrix(r.invsqrt * v.matrix() * r.invsqrt));
  const CMatrix out = r.sqrt * inner.matrix() * r.sqrt;
  return validate_hpd((out + out.adjoint()) * 0.5, kHermitianTol * std::max(1.0, out.cwiseAbs().maxCoeff()));
}

}  // namespace

double dict_objective(const DictBatch& batch, const std::vector<HpdMatrix>& atoms, double lambda_b,
                      double pd_floor) {
  check_batch(batch, atoms);
  if (atoms.empty()) throw Error(ErrorCode::InvalidArgument, "empty dictionary");
  const std::vector<HermEigen> eig = whitened(batch, atoms, pd_floor);
  double acc = 0.0;
  for (const auto& e : eig) {
    for (Eigen::Index k = 0; k < e.values.size(); ++k) {
      const double l = std::log(e.values(k));
      acc += 0.5 * l * l;
    }
  }
  return acc + lambda_b * trace_sum(atoms);
}

std::vector<HermitianMatrix> dict_euclidean_grads(const DictBatch& batch, const std::vector<HpdMatrix>& atoms,
                                                  double lambda_b, double pd_floor) {
  check_batch(batch, atoms);
  if (atoms.empty()) throw Error(ErrorCode::InvalidArgument, "empty dictionary");
  const Eigen::Index d = atoms.front().dim();
  const std::vector<HermEigen> eig = whitened(batch, atoms, pd_floor);

  // Q_j = G_j log(W_j) W_j^{-1} G_j
  std::vector<CMatrix> q(batch.size());
  parallel_for(static_cast<std::ptrdiff_t>(batch.size()), [&](std::ptrdiff_t j) {
    const HermEigen& e = eig[j];
    RVector f(e.values.size());
    for (Eigen::Index k = 0; k < f.size(); ++k) f(k) = std::log(e.values(k)) / e.values(k);
    const CMatrix& g = batch.problems[j].whitener.matrix();
    q[j] = g * (e.vectors * f.asDiagonal() * e.vectors.adjoint()) * g;
  });

  std::vector<HermitianMatrix> out(atoms.size());
  parallel_for(static_cast<std::ptrdiff_t>(atoms.size()), [&](std::ptrdiff_t i) {
    CMatrix acc = CMatrix::Identity(d, d) * Complex(lambda_b);
    for (std::size_t j = 0; j < batch.size(); ++j) {
      const double a = batch.codes[j][i];
      if (a != 0.0) acc += a * q[j];
    }
    out[i] = HermitianMatrix(acc);
  });
  return out;
}

HermitianMatrix dict_euclidean_grad(const DictBatch& batch, const std::vector<HpdMatrix>& atoms, double lambda_b,
                                    std::size_t i, double pd_floor) {
  if (i >= atoms.size()) throw Error(ErrorCode::InvalidArgument, "atom index out of range");
  return dict_euclidean_grads(batch, atoms, lambda_b, pd_floor)[i];
}

TangentVector dict_riemannian_grad(std::size_t i, const HpdMatrix& atom, const HermitianMatrix& euclid_grad) {
  if (atom.dim() != euclid_grad.dim()) throw Error(ErrorCode::DimensionMismatch, "gradient and atom differ in size");
  return {i, HermitianMatrix(atom.matrix() * euclid_grad.matrix() * atom.matrix())};
}

HpdMatrix retraction(const HpdMatrix& p, const HermitianMatrix& v) {
  if (p.dim() != v.dim()) throw Error(ErrorCode::DimensionMismatch, "tangent vector and base point differ in size");
  return retract_with(roots_of(p), v);
}

HermitianMatrix vector_transport(const HpdMatrix& p, const HpdMatrix& q, const HermitianMatrix& v) {
  if (p.dim() != q.dim() || p.dim() != v.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "transport operands differ in size");
  }
  // E = p^{1/2} (p^{-1/2} q p^{-1/2})^{1/2} p^{-1/2} squares to q p^{-1}.
  const AtomRoots r = roots_of(p);
  const HpdMatrix mid = sqrtm(validate_hpd(HermitianMatrix(r.invsqrt * q.matrix() * r.invsqrt).matrix()));
  const CMatrix e = r.sqrt * mid.matrix() * r.invsqrt;
  return HermitianMatrix(e * v.matrix() * e.adjoint());
}

double product_inner(const std::vector<HpdMatrix>& atoms, const std::vector<HermitianMatrix>& u,
                     const std::vector<HermitianMatrix>& v) {
  if (u.size() != atoms.size() || v.size() != atoms.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one tangent vector per atom required");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) acc += airm_inner(atoms[i], u[i], v[i]);
  return acc;
}

CgState cg_direction(const CgState& prev, std::vector<HpdMatrix> atoms, std::vector<HermitianMatrix> grads,
                     int restart_period) {
  if (grads.size() != atoms.size()) throw Error(ErrorCode::DimensionMismatch, "one gradient per atom required");
  CgState next;
  next.iteration = prev.iteration + 1;
  next.step = prev.step;
  next.directions.resize(atoms.size());

  bool restart = prev.iteration == 0 || prev.atoms.size() != atoms.size();
  if (restart_period > 0 && next.iteration > 1 && (next.iteration - 1) % restart_period == 0) restart = true;

  if (!restart) {
    std::vector<HermitianMatrix> moved_grad(atoms.size());
    std::vector<HermitianMatrix> moved_dir(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      moved_grad[i] = vector_transport(prev.atoms[i], atoms[i], prev.grads[i]);
      moved_dir[i] = vector_transport(prev.atoms[i], atoms[i], prev.directions[i]);
    }
    std::vector<HermitianMatrix> diff(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) diff[i] = grads[i] - moved_grad[i];
    const double num = product_inner(atoms, grads, diff);
    const double den = product_inner(prev.atoms, prev.grads, prev.grads);
    next.beta = den > 0.0 ? num / den : 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) next.directions[i] = next.beta * moved_dir[i] - grads[i];
    if (product_inner(atoms, next.directions, grads) >= 0.0) restart = true;
  }
  if (restart) {
    next.beta = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) next.directions[i] = -1.0 * grads[i];
  }
  next.atoms = std::move(atoms);
  next.grads = std::move(grads);
  return next;
}

LineSearchResult line_search(const DictBatch& batch, const std::vector<HpdMatrix>& atoms,
                             const std::vector<HermitianMatrix>& grads,
                             const std::vector<HermitianMatrix>& directions, const DictLearnConfig& cfg) {
  LineSearchResult out;
  out.atoms = atoms;
  out.value = dict_objective(batch, atoms, cfg.lambda_b, cfg.pd_floor);
  const double slope = product_inner(atoms, grads, directions);
  if (!(slope < 0.0)) {
    out.flagged = true;
    return out;
  }
  std::vector<AtomRoots> roots(atoms.size());
  parallel_for(static_cast<std::ptrdiff_t>(atoms.size()), [&](std::ptrdiff_t i) { roots[i] = roots_of(atoms[i]); });

  double step = cfg.initial_step;
  for (int m = 0; m <= cfg.max_backtracks; ++m, step *= cfg.backtrack) {
    std::vector<HpdMatrix> trial(atoms.size());
    try {
      parallel_for(static_cast<std::ptrdiff_t>(atoms.size()),
                   [&](std::ptrdiff_t i) { trial[i] = retract_with(roots[i], step * directions[i]); });
      const double value = dict_objective(batch, trial, cfg.lambda_b, cfg.pd_floor);
      if (value <= out.value + cfg.armijo_c1 * step * slope) {
        out.step = step;
        out.value = value;
        out.atoms = std::move(trial);
        return out;
      }
    } catch (const Error&) {
      // Overflowing exponential or non-PD reconstruction: shrink the step.
    }
  }
  out.flagged = true;
  return out;
}

DictUpdateResult dict_update(const DictBatch& batch, const Dictionary& in, const DictLearnConfig& cfg) {
  DictUpdateResult out;
  out.dictionary = in;
  if (cfg.freeze) return out;
  in.check();
  std::vector<HpdMatrix> atoms = in.atoms;
  const int period =
      cfg.restart_period > 0 ? cfg.restart_period : static_cast<int>(atoms.size() * in.dim() * in.dim());
  out.trace.push_back(dict_objective(batch, atoms, cfg.lambda_b, cfg.pd_floor));

  CgState state;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const auto egrad = dict_euclidean_grads(batch, atoms, cfg.lambda_b, cfg.pd_floor);
    std::vector<HermitianMatrix> rgrad(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) rgrad[i] = dict_riemannian_grad(i, atoms[i], egrad[i]).value;
    out.grad_norm = std::sqrt(std::max(product_inner(atoms, rgrad, rgrad), 0.0));
    if (out.grad_norm < cfg.grad_tol) break;

    state = cg_direction(state, atoms, std::move(rgrad), period);
    const LineSearchResult ls = line_search(batch, atoms, state.grads, state.directions, cfg);
    if (ls.flagged) break;
    state.step = ls.step;
    atoms = ls.atoms;
    out.trace.push_back(ls.value);
    ++out.iterations;
  }
  out.dictionary.atoms = std::move(atoms);
  return out;
}

}  // namespace srsr::dict
