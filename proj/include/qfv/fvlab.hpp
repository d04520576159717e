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

#ifndef QFV_FVLAB_HPP_
#define QFV_FVLAB_HPP_

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qfv/numkernel.hpp"
#include "qfv/report.hpp"

namespace qfv {

struct CausalOrderViolated : Error {
  using Error::Error;
};
struct ZeroProbability : Error {
  using Error::Error;
};

// Spacetime stand-in: tensor factors tagged with region labels, a strict
// partial order "first precedes second" on the labels, and an explicit
// spacelike relation.  Locality statements become statements about which
// factors an operator touches.
struct LocalFactorization {
  std::vector<int> factor_dims;
  std::vector<std::string> region_of_factor;
  std::vector<std::pair<std::string, std::string>> causal_edges;
  std::vector<std::pair<std::string, std::string>> spacelike_pairs;

  LocalFactorization(std::vector<int> dims, std::vector<std::string> regions,
                     std::vector<std::pair<std::string, std::string>> edges,
                     std::vector<std::pair<std::string, std::string>> spacelike);

  int total_dim() const;
  int factors() const { return static_cast<int>(factor_dims.size()); }
  bool known_region(const std::string& r) const;
  // Strict transitive order derived from the edges.
  bool precedes(const std::string& a, const std::string& b) const;
  // a lies in the causal past of b (a == b counts).
  bool in_past(const std::string& a, const std::string& b) const;
  bool is_spacelike(const std::string& a, const std::string& b) const;
  // Ascending factor indices carrying the region.
  std::vector<int> factors_of_region(const std::string& r) const;
  int dim_of_region(const std::string& r) const;
};

// Unitary on a tensor product together with the factors it claims to act on.
// validate() checks the claim: conjugation must fix matrix units embedded on
// every factor outside the support.
struct ScatteringMorphism {
  Operator U;
  std::vector<int> factor_dims;
  std::vector<int> support;

  ScatteringMorphism(Operator u, std::vector<int> dims, std::vector<int> supp);
  void validate(const TolerancePolicy& pol = TolerancePolicy()) const;
  int dim() const { return U.dim(); }
};

// Hermitian with spectrum inside [-tol, 1+tol].
struct Effect {
  Operator op;
  explicit Effect(Operator o, const TolerancePolicy& pol = TolerancePolicy());
};

struct EffectValuedMeasure {
  std::vector<std::string> outcomes;
  std::vector<Effect> effects;

  EffectValuedMeasure(std::vector<std::string> outs, std::vector<Effect> effs,
                      const TolerancePolicy& pol = TolerancePolicy());
  const Effect& effect_of(const std::string& outcome) const;
};

// Embeds A, whose k-th tensor slot lives on factor on[k] of dims, into the
// full product, acting as identity elsewhere.  Factor 0 is the most
// significant index digit, matching tensor_product.
Operator lift_operator(const std::vector<int>& dims, const std::vector<int>& on,
                       const Operator& A);

// Partial evaluation of C on A(system) tensor B(probe) against the probe
// state: result[i][j] = sum_{k,l} C[(i,k),(j,l)] sigma[l][k].
Operator eta_sigma(const Operator& C, const DensityState& sigma);

// Observable the probe measurement induces on the system, eta_sigma applied
// to the conjugated probe observable.  The probe is the last factor of
// theta's space.  Cross-checked internally against the defining pairing on a
// few random system states.
Operator induced_observable(const Operator& B, const DensityState& sigma,
                            const ScatteringMorphism& theta,
                            const TolerancePolicy& pol = TolerancePolicy());

// Unitality, adjoint compatibility, the operator inequality on B*B, and
// complete positivity via the Choi matrix (probe dims up to 4).
CheckReport check_epsilon_properties(const DensityState& sigma,
                                     const ScatteringMorphism& theta,
                                     int trials, uint64_t seed,
                                     const TolerancePolicy& pol = TolerancePolicy());

struct PreInstrumentResult {
  // tr(functional * A) is the unnormalized updated expectation of A.
  Operator functional;
  double weight;
};

PreInstrumentResult pre_instrument(const Effect& B, const DensityState& sigma,
                                   const ScatteringMorphism& theta,
                                   const DensityState& omega,
                                   const TolerancePolicy& pol = TolerancePolicy());

// Normalized post-selected state; throws ZeroProbability when the effect has
// weight below tol.
DensityState post_select(const Effect& B, const DensityState& sigma,
                         const ScatteringMorphism& theta,
                         const DensityState& omega,
                         const TolerancePolicy& pol = TolerancePolicy());

// Two couplings on a shared system, fact laid out as
// [probe1, system factors..., probe2].  theta1 and theta2 live on
// system tensor own-probe, probe last.  Verifies that composing the two
// pre-instruments equals the joint-probe pre-instrument, and order
// independence when the coupling regions are spacelike.  The coupling
// regions are the regions of the probe factors; the second must not lie in
// the causal past of the first.
CheckReport compose_instruments(const Effect& B1, const DensityState& sigma1,
                                const ScatteringMorphism& theta1,
                                const Effect& B2, const DensityState& sigma2,
                                const ScatteringMorphism& theta2,
                                const DensityState& omega,
                                const LocalFactorization& fact,
                                const TolerancePolicy& pol = TolerancePolicy());

struct NonsignalingResult {
  double with_A;
  double without_A;
  double gap;
};

// Expectation of C in region O3 with and without the first coupling.  Both
// morphisms live on the full space of fact.  The first coupling must stay
// inside its own region's factors, the second inside factors of its region
// or regions strictly after it; C sits on the factors of c_region.  omega is
// the state of the non-probe factors in ascending order.
NonsignalingResult nonsignaling_check(const ScatteringMorphism& theta1,
                                      const ScatteringMorphism& theta2,
                                      const Operator& C, const std::string& c_region,
                                      const DensityState& omega,
                                      const DensityState& sigma1,
                                      const DensityState& sigma2,
                                      const LocalFactorization& fact,
                                      int probe1_factor, int probe2_factor,
                                      const TolerancePolicy& pol = TolerancePolicy());

EffectValuedMeasure evm_induce(const EffectValuedMeasure& E,
                               const DensityState& sigma,
                               const ScatteringMorphism& theta,
                               const TolerancePolicy& pol = TolerancePolicy());

struct VarianceResult {
  double var_measured;
  double var_induced;
};

// Variance of the actually measured probe observable against the variance of
// the induced observable in the system state.
VarianceResult variance_check(const Operator& B, const DensityState& sigma,
                              const ScatteringMorphism& theta,
                              const DensityState& omega,
                              const TolerancePolicy& pol = TolerancePolicy());

// Pure state on the top eigendirection of A - B, which gives different
// expectations to the two observables.  Throws ValidationError when the
// difference is below tol.
DensityState separating_state(const Operator& A, const Operator& B,
                              const TolerancePolicy& pol = TolerancePolicy());

// Text scenario: factor dims, per-factor regions, causal edges, spacelike
// pairs, and named couplings (swap, cflip, or explicit matrices) lifted to
// the full space.
struct Scenario {
  LocalFactorization fact;
  std::map<std::string, ScatteringMorphism> morphisms;
};

Scenario load_scenario(const std::string& path,
                       const TolerancePolicy& pol = TolerancePolicy());

}  // namespace qfv

#endif  // QFV_FVLAB_HPP_
