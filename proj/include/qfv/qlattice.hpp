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

#pragma once

#include <cstdint>

#include "qfv/numkernel.hpp"

// The quantum-logic lattice of projectors: meet, join, orthocomplement,
// ordering, and the orthomodularity / modularity / distributivity checks.

namespace qfv {

struct SearchExhausted : Error {
  using Error::Error;
};

class Projector {
 public:
  // Validates Hermitian idempotency by spectrum: every eigenvalue must sit
  // within tol of 0 or 1; anything in between is a borderline rank decision
  // and raises ValidationError instead of rounding silently.
  explicit Projector(Operator op, const TolerancePolicy& pol = {});
  static Projector zero(int dim);
  static Projector identity(int dim);
  static Projector onto(const StateVector& ray, const TolerancePolicy& pol = {});
  static Projector onto_span(const std::vector<StateVector>& vectors,
                             const TolerancePolicy& pol = {});

  const Operator& op() const { return op_; }
  int dim() const { return op_.dim(); }
  int rank() const { return rank_; }

 private:
  Operator op_;
  int rank_;
};

std::vector<StateVector> range_basis(const Projector& P, const TolerancePolicy& pol = {});

Projector complement(const Projector& P, const TolerancePolicy& pol = {});
// Projector onto the eigenvalue-0 eigenspace of (1-P)+(1-Q).
Projector meet(const Projector& P, const Projector& Q, const TolerancePolicy& pol = {});
// Span closure of the union of ranges.
Projector join(const Projector& P, const Projector& Q, const TolerancePolicy& pol = {});
// P <= Q as range inclusion: max |QP - P| <= eq_tol.
bool leq(const Projector& P, const Projector& Q, const TolerancePolicy& pol = {});

// For P <= Q: is Q = P v (~P ^ Q)? Always true on projector lattices.
bool check_orthomodular(const Projector& P, const Projector& Q, const TolerancePolicy& pol = {});
// For M <= N: is M v (L ^ N) = (M v L) ^ N? True at finite dimension.
bool check_modular(const Projector& M, const Projector& N, const Projector& L,
                   const TolerancePolicy& pol = {});

struct DistributivityWitness {
  Projector P, Q, R, lhs, rhs;
  double gap;
};
// Seeded search for random rank-1 triples violating distributivity with
// gap > 0.5. Generic triples violate it, so exhaustion signals a bug.
DistributivityWitness distributivity_witness(int dim, uint64_t seed,
                                             const TolerancePolicy& pol = {});

// Distance from theta_1 to span{a^k xi_k - a^k theta_{2k} : k <= n} for the
// truncated non-modularity construction; bounded by a^{-n}.
double modularity_gap(int n, double a);

}  // namespace qfv
