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

#include "srsr/sparse_coding.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace srsr::coding {

namespace {

void check_sizes(const SparseCode& alpha, const Dictionary& dict) {
  if (static_cast<std::size_t>(alpha.size()) != dict.size()) {
    throw Error(ErrorCode::DimensionMismatch, "code length " + std::to_string(alpha.size()) +
                                                  " vs dictionary size " + std::to_string(dict.size()));
  }
}

// Eigen-decomposition of W = H M H, or nullopt when M fails the PD floor.
std::optional<HermEigen> whitened_eig(const EncodingProblem& p, const HermitianMatrix& m, double pd_floor) {
  if (!reconstruction_is_pd(m, pd_floor)) return std::nullopt;
  const CMatrix& h = p.whitener.matrix();
  HermEigen e = herm_eig(HermitianMatrix(h * m.matrix() * h));
  if (e.values(0) <= 0.0) return std::nullopt;
  return e;
}

double half_sq_log(const RVector& eigenvalues) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    const double l = std::log(eigenvalues(i));
    acc += l * l;
  }
  return 0.5 * acc;
}

[[noreturn]] void not_pd() {
  throw Error(ErrorCode::ReconstructionNotPD, "reconstruction fails the positive-definiteness floor");
}

// H log(W) W^{-1} H, the matrix whose inner products with the atoms give the
// residual gradient.
CMatrix gradient_kernel(const EncodingProblem& p, const HermEigen& e) {
  RVector f(e.values.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = std::log(e.values(i)) / e.values(i);
  const CMatrix& h = p.whitener.matrix();
  return h * (e.vectors * f.asDiagonal() * e.vectors.adjoint()) * h;
}

RVector atom_inner(const CMatrix& q, const Dictionary& dict) {
  RVector g(static_cast<Eigen::Index>(dict.size()));
  const CMatrix qt = q.transpose();
  for (std::size_t i = 0; i < dict.size(); ++i) {
    g(static_cast<Eigen::Index>(i)) = qt.cwiseProduct(dict.atoms[i].matrix()).sum().real();
  }
  return g;
}

struct Point {
  SparseCode code;
  double value = 0.0;
};

// Objective value, or nullopt when the reconstruction is not PD.
std::optional<double> try_objective(const EncodingProblem& p, const SparseCode& a, const Dictionary& dict,
                                    double lambda, double pd_floor) {
  const auto e = whitened_eig(p, reconstruction(a, dict), pd_floor);
  if (!e) return std::nullopt;
  return half_sq_log(e->values) + lambda * a.l1();
}

}  // namespace

EncodingProblem EncodingProblem::from_target(const HpdMatrix& target) { return {target, invsqrtm(target)}; }

SparseCode::SparseCode(RVector values) : v_(std::move(values)) {
  for (Eigen::Index i = 0; i < v_.size(); ++i) {
    if (!std::isfinite(v_(i)) || v_(i) < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "sparse code entries must be finite and non-negative");
    }
  }
}

void Dictionary::check() const {
  if (atoms.empty()) throw Error(ErrorCode::InvalidArgument, "empty dictionary");
  if (labels.size() != atoms.size()) throw Error(ErrorCode::InvalidArgument, "one label per atom required");
  if (atoms_per_class <= 0 || classes <= 0 ||
      static_cast<std::size_t>(atoms_per_class) * static_cast<std::size_t>(classes) != atoms.size()) {
    throw Error(ErrorCode::InvalidArgument, "dictionary size must equal atoms_per_class * classes");
  }
  std::vector<int> per_class(classes, 0);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].dim() != atoms.front().dim()) throw Error(ErrorCode::DimensionMismatch, "atom dimensions differ");
    if (labels[i] < 1 || labels[i] > classes) throw Error(ErrorCode::InvalidArgument, "atom label out of range");
    ++per_class[labels[i] - 1];
  }
  for (int c : per_class) {
    if (c != atoms_per_class) throw Error(ErrorCode::InvalidArgument, "labels do not partition atoms evenly");
  }
}

HermitianMatrix reconstruction(const SparseCode& alpha, const Dictionary& dict) {
  check_sizes(alpha, dict);
  const Eigen::Index d = dict.dim();
  CMatrix m = CMatrix::Zero(d, d);
  for (std::size_t i = 0; i < dict.size(); ++i) {
    const double a = alpha[static_cast<Eigen::Index>(i)];
    if (a != 0.0) m += a * dict.atoms[i].matrix();
  }
  return HermitianMatrix(m);
}

bool reconstruction_is_pd(const HermitianMatrix& m, double pd_floor) {
  if (m.dim() == 0 || !m.matrix().allFinite()) return false;
  const double trace = m.matrix().trace().real();
  if (!(trace > 0.0)) return false;
  const RVector ev = herm_eig(m).values;
  return ev(0) > pd_floor * trace / static_cast<double>(m.dim());
}

double residual(const EncodingProblem& p, const SparseCode& alpha, const Dictionary& dict, double pd_floor) {
  const auto e = whitened_eig(p, reconstruction(alpha, dict), pd_floor);
  if (!e) not_pd();
  return half_sq_log(e->values);
}

double objective(const EncodingProblem& p, const SparseCode& alpha, const Dictionary& dict, double lambda,
                 double pd_floor) {
  return residual(p, alpha, dict, pd_floor) + lambda * alpha.l1();
}

RVector residual_gradient(const EncodingProblem& p, const SparseCode& alpha, const Dictionary& dict,
                          double pd_floor) {
  const auto e = whitened_eig(p, reconstruction(alpha, dict), pd_floor);
  if (!e) not_pd();
  return atom_inner(gradient_kernel(p, *e), dict);
}

RVector full_gradient(const EncodingProblem& p, const SparseCode& alpha, const Dictionary& dict, double lambda,
                      double pd_floor) {
  RVector g = residual_gradient(p, alpha, dict, pd_floor);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (alpha[i] > 0.0) g(i) += lambda;
  }
  return g;
}

RVector soft_threshold(const RVector& x, double theta) {
  if (theta < 0.0) throw Error(ErrorCode::InvalidArgument, "threshold must be non-negative");
  return (x.array() - theta).max(0.0).matrix();
}

StepResult ista_step(const EncodingProblem& p, const SparseCode& alpha, const Dictionary& dict,
                     const SrsrConfig& cfg) {
  check_sizes(alpha, dict);
  const auto e = whitened_eig(p, reconstruction(alpha, dict), cfg.pd_floor);
  if (!e) return {alpha, std::numeric_limits<double>::quiet_NaN(), 0.0, true};
  const double current = half_sq_log(e->values) + cfg.lambda * alpha.l1();
  const RVector grad = atom_inner(gradient_kernel(p, *e), dict);

  double t = cfg.step;
  const int attempts = cfg.safeguard ? cfg.max_halvings + 1 : 1;
  for (int k = 0; k < attempts; ++k, t *= 0.5) {
    SparseCode trial(soft_threshold(alpha.values() - t * grad, cfg.lambda * t));
    const auto value = try_objective(p, trial, dict, cfg.lambda, cfg.pd_floor);
    if (!value) continue;
    if (!cfg.safeguard || *value <= current) return {std::move(trial), *value, t, false};
  }
  return {alpha, current, 0.0, true};
}

SparseCode spg_init(const EncodingProblem& p, const Dictionary& dict, const SrsrConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(dict.size());
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty dictionary");
  const SparseCode start = SparseCode::uniform(n);
  try {
    // On the non-negative orthant lambda ||a||_1 = lambda 1^T a, so the
    // objective is smooth there with gradient residual_grad + lambda.
    auto smooth_grad = [&](const SparseCode& a) {
      return RVector(residual_gradient(p, a, dict, cfg.pd_floor).array() + cfg.lambda);
    };
    auto project = [](const RVector& v) { return RVector(v.cwiseMax(0.0)); };

    SparseCode x = start;
    double fx = objective(p, x, dict, cfg.lambda, cfg.pd_floor);
    RVector g = smooth_grad(x);
    double bb = 1.0 / std::max((project(x.values() - g) - x.values()).lpNorm<Eigen::Infinity>(), 1e-12);
    bb = std::clamp(bb, 1e-10, 1e10);

    for (int it = 0; it < cfg.init_iterations; ++it) {
      const RVector dir = project(x.values() - bb * g) - x.values();
      if (dir.lpNorm<Eigen::Infinity>() < 1e-14) break;
      const double slope = g.dot(dir);
      if (slope >= 0.0) break;
      double theta = 1.0;
      std::optional<Point> next;
      for (int bt = 0; bt < 40; ++bt, theta *= 0.5) {
        SparseCode trial(project(x.values() + theta * dir));
        const auto value = try_objective(p, trial, dict, cfg.lambda, cfg.pd_floor);
        if (value && *value <= fx + 1e-4 * theta * slope) {
          next = Point{std::move(trial), *value};
          break;
        }
      }
      if (!next) break;
      const RVector g_next = smooth_grad(next->code);
      const RVector s = next->code.values() - x.values();
      const RVector y = g_next - g;
      const double sy = s.dot(y);
      bb = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-10, 1e10) : 1e10;
      x = std::move(next->code);
      fx = next->value;
      g = g_next;
    }
    return x;
  } catch (const Error&) {
    return start;
  }
}

SolveResult solve_ista(const EncodingProblem& p, const SparseCode& start, const Dictionary& dict,
                       const SrsrConfig& cfg) {
  SolveResult out;
  out.code = start;
  const auto first = try_objective(p, start, dict, cfg.lambda, cfg.pd_floor);
  if (!first) {
    out.failed = true;
    return out;
  }
  out.trace.push_back(*first);
  for (int it = 0; it < cfg.ref_max_iterations; ++it) {
    StepResult step = ista_step(p, out.code, dict, cfg);
    if (step.failed) {
      out.failed = true;
      break;
    }
    const double dobj = std::abs(step.objective - out.trace.back());
    const double dalpha = (step.code.values() - out.code.values()).lpNorm<Eigen::Infinity>();
    out.code = std::move(step.code);
    out.trace.push_back(step.objective);
    ++out.iterations;
    if (dobj < cfg.ref_tol && dalpha < cfg.ref_tol) break;
  }
  return out;
}

}  // namespace srsr::coding
