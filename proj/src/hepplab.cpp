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

#include "qfv/hepplab.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace qfv {

namespace {

constexpr double kPi = std::numbers::pi;

// cos(theta/2) and sin(theta/2) taken through the complement of theta, so
// that the full flip theta = pi gives exactly 0 and 1 in doubles.
double up_amp(double theta) { return std::sin((kPi - theta) / 2); }
double down_amp(double theta) { return std::cos((kPi - theta) / 2); }

StateVector up_site() { return StateVector::basis(2, 0); }

// exp(-i theta sigma_x / 2) applied to up.
StateVector rotated_site(double theta) {
  StateVector v(2);
  v.amps[0] = cplx(up_amp(theta), 0);
  v.amps[1] = cplx(0, -down_amp(theta));
  return v;
}

}  // namespace

BlochVector::BlochVector(double x, double y, double z,
                         const TolerancePolicy& pol)
    : e{x, y, z} {
  double n = std::sqrt(x * x + y * y + z * z);
  if (std::abs(n - 1) > pol.eq_tol)
    throw ValidationError("Bloch vector has norm " + std::to_string(n));
}

double BlochVector::dot(const BlochVector& o) const {
  return e[0] * o.e[0] + e[1] * o.e[1] + e[2] * o.e[2];
}

ChainState::ChainState(cplx cp, cplx cm, int n, double th, int steps,
                       const TolerancePolicy& pol)
    : c_plus(cp), c_minus(cm), N(n), theta(th), t(steps) {
  double norm2 = std::norm(cp) + std::norm(cm);
  if (std::abs(norm2 - 1) > pol.eq_tol)
    throw ValidationError("branch amplitudes are not normalized");
  if (n < 1) throw ValidationError("chain needs at least one site");
  if (steps < 0 || steps > n)
    throw ValidationError("elapsed steps outside 0..N");
  if (!(th > 0) || th > kPi)
    throw ValidationError("rotation angle outside (0, pi]");
}

StateVector bloch_ket(const BlochVector& e) {
  double ez = e.e[2];
  if (ez > 1 - 1e-12) return StateVector::basis(2, 0);
  double norm = std::sqrt(2 * (1 - ez));
  StateVector v(2);
  v.amps[0] = cplx(e.e[0], -e.e[1]) / norm;
  v.amps[1] = cplx((1 - ez) / norm, 0);
  return v;
}

double product_overlap(const std::vector<BlochVector>& e1,
                       const std::vector<BlochVector>& e2) {
  if (e1.size() != e2.size())
    throw LengthMismatch("lists cover " + std::to_string(e1.size()) +
                         " and " + std::to_string(e2.size()) + " sites");
  double p = 1;
  for (size_t n = 0; n < e1.size(); ++n) p *= (1 + e1[n].dot(e2[n])) / 2;
  return p;
}

ChainState evolve_chain(const ChainState& s, int steps) {
  if (steps < 0) throw ValidationError("cannot evolve backwards");
  if (s.t + steps > s.N)
    throw ChainExhausted("step " + std::to_string(s.t + steps) +
                         " on a chain of " + std::to_string(s.N) + " sites");
  ChainState out = s;
  out.t += steps;
  return out;
}

StateVector minus_site(const ChainState& s, int k) {
  if (k < 1 || k > s.N) throw ValidationError("site outside 1..N");
  return k <= s.t ? rotated_site(s.theta) : up_site();
}

std::pair<StateVector, StateVector> branch_states(const ChainState& s) {
  if (s.N > 20) throw ValidationError("chain too long to materialize");
  StateVector bp = StateVector::basis(2, 0);
  StateVector bm = StateVector::basis(2, 1);
  for (int k = 1; k <= s.N; ++k) {
    bp = tensor_product(bp, up_site());
    bm = tensor_product(bm, minus_site(s, k));
  }
  return {bp, bm};
}

StateVector full_state(const ChainState& s) {
  auto [bp, bm] = branch_states(s);
  return bp * s.c_plus + bm * s.c_minus;
}

double reduced_coherence(const ChainState& s) {
  return std::abs(s.c_plus) * std::abs(s.c_minus) *
         std::pow(up_amp(s.theta), s.t);
}

cplx local_cross_term(const Operator& A, const ChainState& s) {
  int probe = A.dim();
  int M = 0;
  while (probe > 2 && probe % 2 == 0) {
    probe /= 2;
    ++M;
  }
  if (probe != 2)
    throw DimensionMismatch("operator dim " + std::to_string(A.dim()) +
                            " is not a power of two");
  if (M > s.N)
    throw SupportTooLarge("support covers " + std::to_string(M) +
                          " sites on a chain of " + std::to_string(s.N));
  StateVector hp = StateVector::basis(2, 0);
  StateVector hm = StateVector::basis(2, 1);
  for (int k = 1; k <= M; ++k) {
    hp = tensor_product(hp, up_site());
    hm = tensor_product(hm, minus_site(s, k));
  }
  // Sites past the support factor out as plain overlaps.
  double tail = std::pow(up_amp(s.theta), std::max(0, s.t - M));
  return inner(hp, A.apply(hm)) * tail;
}

cplx bell_witness(const ChainState& s) {
  if (std::abs(s.theta - kPi) > 1e-12)
    throw PreconditionViolated("witness needs the full-flip angle");
  if (s.t < 1) throw PreconditionViolated("witness needs at least one step");
  // System factor <up| sigma_x |down> = 1; each visited site contributes
  // <up| sigma_y |site> = -i site_down.
  cplx value = std::conj(s.c_plus) * s.c_minus;
  for (int k = 1; k <= s.t; ++k)
    value *= cplx(0, -1) * minus_site(s, k).amps[1];
  return value;
}

bool macrostate_equivalent(const DensityState& W1, const DensityState& W2,
                           const std::vector<Operator>& observables,
                           double tol) {
  if (W1.dim() != W2.dim())
    throw DimensionMismatch("states live on different spaces");
  for (const Operator& A : observables) {
    if (A.dim() != W1.dim())
      throw DimensionMismatch("observable does not match the states");
    if (std::abs(W1.expect(A) - W2.expect(A)) > tol) return false;
  }
  return true;
}

}  // namespace qfv
