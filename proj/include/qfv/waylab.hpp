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

#ifndef QFV_WAYLAB_HPP_
#define QFV_WAYLAB_HPP_

#include <map>
#include <string>
#include <vector>

#include "qfv/numkernel.hpp"
#include "qfv/report.hpp"

namespace qfv {

struct GramNotPSD : Error {
  using Error::Error;
};
struct InsufficientMultiplicity : Error {
  using Error::Error;
};
struct GramMismatch : Error {
  using Error::Error;
};
struct ConservationViolated : Error {
  using Error::Error;
};
struct ZeroVariance : Error {
  using Error::Error;
};

// Measured observable plus the additive conserved charges on system and
// apparatus.  Charges must have integer spectra.
struct ConservedPair {
  Operator M;
  Operator L1;
  Operator L2;
  int l;

  ConservedPair(Operator m, Operator l1, Operator l2,
                const TolerancePolicy& pol = TolerancePolicy());
};

struct YanaseResult {
  bool commutes;
  double commutator_max;
  std::string verdict;
};

// Commutation test between the measured observable and the system charge.
// Failure rules out exact conservation-respecting repeatable measurement.
YanaseResult yanase_condition(const Operator& M, const Operator& L1,
                              const TolerancePolicy& pol = TolerancePolicy());

// Approximate-measurement apparatus: preparation xi, pointer states X and
// noise states eta on an apparatus space organised as charge blocks of
// uniform dimension 2*dim_h1 for charge values -(N+l)..N+l.
struct FiduciaryApparatus {
  int l = 0;
  double epsilon = 0;
  int N = 0;
  int dim_h1 = 0;
  std::vector<int> charge_of_site;  // system charge per H1 basis index
  Operator phi;                     // columns: measured-observable eigenbasis
  StateVector psi;                  // charge-0 system residue
  StateVector xi;                   // apparatus preparation
  std::vector<StateVector> X;       // pointer states, one per measured index
  std::vector<StateVector> eta;     // noise states, one per measured index
  std::map<int, int> h2_block_dims;

  FiduciaryApparatus() : phi(1), psi(1), xi(1) {}

  int lambda_span() const { return N + l; }
  int block_dim() const { return 2 * dim_h1; }
  int h2_dim() const { return (2 * lambda_span() + 1) * block_dim(); }
  // offset of the charge-lambda block inside the apparatus space
  int block_offset(int lambda) const {
    return (lambda + lambda_span()) * block_dim();
  }
  bool in_lambda_range(int lambda) const {
    return lambda >= -lambda_span() && lambda <= lambda_span();
  }

  const StateVector& pointer_state(int mu, int k = 0) const;
  const StateVector& noise_state(int mu, int k = 0) const;

  Operator system_charge() const;     // diagonal on H1
  Operator apparatus_charge() const;  // diagonal on H2
  Operator total_charge() const;      // L1 x 1 + 1 x L2 on H1 x H2
  Operator measured_observable() const;
  StateVector measured_basis_vector(int mu) const;
};

// Builds the apparatus for target inaccuracy epsilon.  dims_per_charge maps
// each system charge in -l..l to its eigenspace dimension; charge 0 must be
// populated (hosts the residue state).
FiduciaryApparatus build_fiduciary(
    int l, double epsilon, const std::map<int, int>& dims_per_charge,
    const TolerancePolicy& pol = TolerancePolicy());

// Checks the pointer/noise orthogonality relations, the noise norm and the
// per-charge-block Gram identity; every residual must stay within 10*eq_tol.
CheckReport verify_fiduciary(const FiduciaryApparatus& app,
                             const TolerancePolicy& pol = TolerancePolicy());

// Pre- and post-measurement vector families fed to the unitary extension.
std::vector<StateVector> initial_vectors(const FiduciaryApparatus& app);
std::vector<StateVector> final_vectors(const FiduciaryApparatus& app);

// Unitary with [U, L] = 0 mapping each psi_in[i] to psi_out[i]; exists iff
// the per-eigenspace Grams of the two families agree.  Completed
// deterministically (basis order) on the orthogonal complements.
Operator extend_conserving_unitary(const std::vector<StateVector>& psi_in,
                                   const std::vector<StateVector>& psi_out,
                                   const Operator& L,
                                   const TolerancePolicy& pol =
                                       TolerancePolicy());

// Max-entry norm of [A, B]; takes the O(n^2) route when B is diagonal.
double max_commutator(const Operator& A, const Operator& B);

// Block-random unitary commuting with the diagonal integer charge pattern.
Operator random_conserving_unitary(Rng& rng,
                                   const std::vector<int>& charge_per_index);

struct OzawaResult {
  double noise_sq;
  double lower_bound;
  bool zero_variance;
};

// Noise of reading A_probe as a measurement of M through coupling U, against
// the variance-limited lower bound from the conserved charge.
OzawaResult ozawa_noise_bound(const Operator& U, const Operator& M,
                              const Operator& A_probe, const Operator& L1,
                              const Operator& L2, const StateVector& psi,
                              const StateVector& xi,
                              const TolerancePolicy& pol = TolerancePolicy());

// Default probe meter: pointer index weighted by the pointer-state rays.
Operator default_pointer_observable(const FiduciaryApparatus& app);

// Text manifest round trip.
void save_apparatus(const FiduciaryApparatus& app, const std::string& path);
FiduciaryApparatus load_apparatus(const std::string& path);

}  // namespace qfv

#endif  // QFV_WAYLAB_HPP_
