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

#ifndef QFV_HEPPLAB_HPP_
#define QFV_HEPPLAB_HPP_

#include <array>
#include <utility>
#include <vector>

#include "qfv/numkernel.hpp"

namespace qfv {

struct LengthMismatch : Error {
  using Error::Error;
};
struct ChainExhausted : Error {
  using Error::Error;
};
struct SupportTooLarge : Error {
  using Error::Error;
};

// Unit vector in R^3; sigma.e has it as its +1 eigendirection.
struct BlochVector {
  std::array<double, 3> e;
  BlochVector(double x, double y, double z,
              const TolerancePolicy& pol = TolerancePolicy());
  double dot(const BlochVector& o) const;
};

// Spin-1/2 system coupled to a finite chain of N probe spins under kicked
// dynamics: step k rotates site k by theta about the x axis, conditional on
// the system spin pointing down.  c_plus and c_minus are the amplitudes of
// the up and down system branches; t counts completed steps.
struct ChainState {
  cplx c_plus;
  cplx c_minus;
  int N;
  double theta;
  int t;
  ChainState(cplx cp, cplx cm, int n, double th, int steps = 0,
             const TolerancePolicy& pol = TolerancePolicy());
};

// +1 eigenvector of sigma.e with the down component real and nonnegative.
// At the +z pole that normalization is 0/0, so the first basis vector is
// returned directly.
StateVector bloch_ket(const BlochVector& e);

// Squared overlap of two product states, one factor (1 + e1.e2)/2 per site.
double product_overlap(const std::vector<BlochVector>& e1,
                       const std::vector<BlochVector>& e2);

ChainState evolve_chain(const ChainState& s, int steps);

// Site k (1-based) of the down branch: rotated for k <= t, still up beyond.
StateVector minus_site(const ChainState& s, int k);

// Unit branch vectors on system x chain, up branch first.
std::pair<StateVector, StateVector> branch_states(const ChainState& s);

// c_plus branch_up + c_minus branch_down on 2^(N+1) amplitudes.
StateVector full_state(const ChainState& s);

// Off-diagonal magnitude of the reduced system state,
// |c_plus c_minus| cos(theta/2)^t; exactly zero for the full flip at t >= 1.
double reduced_coherence(const ChainState& s);

// <branch_up| A tensor 1 |branch_down> for A acting on the system and the
// first M chain sites, M read off A's dimension 2^(M+1).
cplx local_cross_term(const Operator& A, const ChainState& s);

// Cross matrix element of sigma^1_system prod_{n<=t} sigma^2_n between the
// branches, amplitudes included.  Defined for the full-flip model only; its
// magnitude stays |c_plus c_minus| no matter how large t grows.
cplx bell_witness(const ChainState& s);

// True when tr(W1 A) and tr(W2 A) agree within tol for every listed A.
bool macrostate_equivalent(const DensityState& W1, const DensityState& W2,
                           const std::vector<Operator>& observables,
                           double tol);

}  // namespace qfv

#endif  // QFV_HEPPLAB_HPP_
