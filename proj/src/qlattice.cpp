// Copyright 2026 The qfv authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qfv/qlattice.hpp"

#include <cmath>

namespace qfv {

Projector::Projector(Operator op, const TolerancePolicy& pol) : op_(std::move(op)), rank_(0) {
  if (!op_.is_hermitian(pol.eq_tol)) throw NotHermitian("projector not Hermitian");
  EigenSystem es = hermitian_eigendecomposition(op_, pol);
  for (double lam : es.values) {
    if (std::abs(lam) <= pol.eq_tol) continue;
    if (std::abs(lam - 1) <= pol.eq_tol) {
      ++rank_;
      continue;
    }
    throw ValidationError("projector eigenvalue " + std::to_string(lam) +
                          " is neither 0 nor 1 within tolerance");
  }
}

Projector Projector::zero(int dim) { return Projector(Operator::zero(dim)); }

Projector Projector::identity(int dim) { return Projector(Operator::identity(dim)); }

Projector Projector::onto(const StateVector& ray, const TolerancePolicy& pol) {
  StateVector n = ray.normalized();
  return Projector(Operator::outer(n, n), pol);
}

Projector Projector::onto_span(const std::vector<StateVector>& vectors,
                               const TolerancePolicy& pol) {
  if (vectors.empty()) throw ValidationError("onto_span needs at least one vector");
  std::vector<StateVector> basis = orthonormal_range_basis(vectors, pol);
  Operator P(vectors[0].dim);
  for (const auto& v : basis) P = P + Operator::outer(v, v);
  return Projector(P, pol);
}

std::vector<StateVector> range_basis(const Projector& P, const TolerancePolicy& pol) {
  EigenSystem es = hermitian_eigendecomposition(P.op(), pol);
  std::vector<StateVector> out;
  for (size_t i = 0; i < es.values.size(); ++i)
    if (es.values[i] > 0.5) out.push_back(es.vectors[i]);
  return out;
}

Projector complement(const Projector& P, const TolerancePolicy& pol) {
  return Projector(Operator::identity(P.dim()) - P.op(), pol);
}

Projector meet(const Projector& P, const Projector& Q, const TolerancePolicy& pol) {
  if (P.dim() != Q.dim()) throw DimensionMismatch("meet dims differ");
  Operator I = Operator::identity(P.dim());
  Operator S = (I - P.op()) + (I - Q.op());
  EigenSystem es = hermitian_eigendecomposition(S, pol);
  Operator M(P.dim());
  for (size_t i = 0; i < es.values.size(); ++i)
    if (std::abs(es.values[i]) <= pol.eq_tol)
      M = M + Operator::outer(es.vectors[i], es.vectors[i]);
  return Projector(M, pol);
}

Projector join(const Projector& P, const Projector& Q, const TolerancePolicy& pol) {
  if (P.dim() != Q.dim()) throw DimensionMismatch("join dims differ");
  std::vector<StateVector> vecs = range_basis(P, pol);
  std::vector<StateVector> qb = range_basis(Q, pol);
  vecs.insert(vecs.end(), qb.begin(), qb.end());
  if (vecs.empty()) return Projector::zero(P.dim());
  std::vector<StateVector> basis = orthonormal_range_basis(vecs, pol);
  Operator J(P.dim());
  for (const auto& v : basis) J = J + Operator::outer(v, v);
  return Projector(J, pol);
}

bool leq(const Projector& P, const Projector& Q, const TolerancePolicy& pol) {
  if (P.dim() != Q.dim()) throw DimensionMismatch("leq dims differ");
  return max_abs_diff(Q.op() * P.op(), P.op()) <= pol.eq_tol;
}

bool check_orthomodular(const Projector& P, const Projector& Q, const TolerancePolicy& pol) {
  if (!leq(P, Q, pol)) throw PreconditionViolated("check_orthomodular needs P <= Q");
  Projector rhs = join(P, meet(complement(P, pol), Q, pol), pol);
  return max_abs_diff(Q.op(), rhs.op()) <= 10 * pol.eq_tol;
}

bool check_modular(const Projector& M, const Projector& N, const Projector& L,
                   const TolerancePolicy& pol) {
  if (!leq(M, N, pol)) throw PreconditionViolated("check_modular needs M <= N");
  Projector lhs = join(M, meet(L, N, pol), pol);
  Projector rhs = meet(join(M, L, pol), N, pol);
  return max_abs_diff(lhs.op(), rhs.op()) <= 10 * pol.eq_tol;
}

DistributivityWitness distributivity_witness(int dim, uint64_t seed,
                                             const TolerancePolicy& pol) {
  if (dim < 2) throw ValidationError("distributivity_witness needs dim >= 2");
  Rng rng(seed);
  const int max_attempts = 1000;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    // Above dim 2 a ray meets a random plane only at the origin, so both
    // routes vanish for independent triples.  Draw P inside span(Q, R) to
    // keep the left route alive.
    StateVector q = rng.random_state(dim);
    StateVector r = rng.random_state(dim);
    StateVector p = (q * rng.cnormal() + r * rng.cnormal()).normalized();
    Projector P = Projector::onto(p, pol);
    Projector Q = Projector::onto(q, pol);
    Projector R = Projector::onto(r, pol);
    Projector lhs = meet(P, join(Q, R, pol), pol);
    Projector rhs = join(meet(P, Q, pol), meet(P, R, pol), pol);
    double gap = max_abs_diff(lhs.op(), rhs.op());
    if (gap > 0.5) return {P, Q, R, lhs, rhs, gap};
  }
  throw SearchExhausted("no distributivity witness found; generic triples should violate it");
}

double modularity_gap(int n, double a) {
  if (n < 1) throw ValidationError("modularity_gap needs n >= 1");
  if (a <= 1) throw ValidationError("modularity_gap needs a > 1");
  int D = 2 * n + 2;
  auto theta = [D](int i) { return StateVector::basis(D, i - 1); };  // 1-based
  std::vector<StateVector> span_vecs;
  for (int k = 1; k <= n; ++k) {
    StateVector xi = theta(2 * k) + theta(1) * cplx(std::pow(a, -k), 0) +
                     theta(2 * k + 1) * cplx(std::pow(a, -2 * k), 0);
    span_vecs.push_back(xi * cplx(std::pow(a, k), 0) - theta(2 * k) * cplx(std::pow(a, k), 0));
  }
  std::vector<StateVector> basis = orthonormal_range_basis(span_vecs);
  StateVector t1 = theta(1);
  StateVector proj(D);
  for (const auto& b : basis) proj = proj + b * inner(b, t1);
  return (t1 - proj).norm();
}

}  // namespace qfv
