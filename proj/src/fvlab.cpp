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

#include "qfv/fvlab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace qfv {

namespace {

long long product_of(const std::vector<int>& dims) {
  long long p = 1;
  for (int d : dims) {
    if (d < 1) throw ValidationError("factor dimensions must be positive");
    p *= d;
  }
  return p;
}

cplx trace_prod(const Operator& A, const Operator& B) {
  cplx s = 0;
  for (int i = 0; i < A.dim(); ++i)
    for (int j = 0; j < A.dim(); ++j) s += A.at(i, j) * B.at(j, i);
  return s;
}

Operator hermitized(const Operator& M) {
  Operator H = (M + M.adjoint()) * cplx(0.5, 0);
  return H;
}

Operator matrix_unit(int d, int a, int b) {
  Operator E(d);
  E.at(a, b) = 1;
  return E;
}

// Unnormalized update: trace out the probe from U (rho x sigma) U* against
// the effect.  rho may carry any positive weight.
Operator pre_apply(const Operator& rho, const DensityState& sigma,
                   const Operator& effect, const ScatteringMorphism& theta) {
  int dp = sigma.dim();
  int dA = theta.dim() / dp;
  Operator rho_tot =
      theta.U * tensor_product(rho, sigma.matrix) * theta.U.adjoint();
  Operator M = partial_trace(
      rho_tot * tensor_product(Operator::identity(dA), effect), {dA, dp}, {1});
  return hermitized(M);
}

}  // namespace

LocalFactorization::LocalFactorization(
    std::vector<int> dims, std::vector<std::string> regions,
    std::vector<std::pair<std::string, std::string>> edges,
    std::vector<std::pair<std::string, std::string>> spacelike)
    : factor_dims(std::move(dims)),
      region_of_factor(std::move(regions)),
      causal_edges(std::move(edges)),
      spacelike_pairs(std::move(spacelike)) {
  if (factor_dims.empty()) throw ValidationError("no tensor factors");
  product_of(factor_dims);
  if (region_of_factor.size() != factor_dims.size())
    throw ValidationError("one region label per factor required");
  for (const auto& r : region_of_factor)
    if (r.empty()) throw ValidationError("empty region label");
  for (const auto& [a, b] : causal_edges) {
    if (!known_region(a) || !known_region(b))
      throw ValidationError("causal edge mentions unknown region " +
                            (known_region(a) ? b : a));
  }
  for (const auto& r : region_of_factor)
    if (precedes(r, r))
      throw ValidationError("causal order has a cycle through " + r);
  for (const auto& [a, b] : spacelike_pairs) {
    if (!known_region(a) || !known_region(b))
      throw ValidationError("spacelike pair mentions unknown region " +
                            (known_region(a) ? b : a));
    if (a == b) throw ValidationError("region " + a + " spacelike to itself");
    if (precedes(a, b) || precedes(b, a))
      throw ValidationError("spacelike regions " + a + ", " + b +
                            " are causally ordered");
  }
}

int LocalFactorization::total_dim() const {
  return static_cast<int>(product_of(factor_dims));
}

bool LocalFactorization::known_region(const std::string& r) const {
  return std::find(region_of_factor.begin(), region_of_factor.end(), r) !=
         region_of_factor.end();
}

bool LocalFactorization::precedes(const std::string& a,
                                  const std::string& b) const {
  // Breadth-first walk along the edges; label sets are tiny.
  std::set<std::string> seen;
  std::vector<std::string> frontier = {a};
  while (!frontier.empty()) {
    std::vector<std::string> next;
    for (const auto& r : frontier)
      for (const auto& [x, y] : causal_edges)
        if (x == r && seen.insert(y).second) {
          if (y == b) return true;
          next.push_back(y);
        }
    frontier = std::move(next);
  }
  return false;
}

bool LocalFactorization::in_past(const std::string& a,
                                 const std::string& b) const {
  return a == b || precedes(a, b);
}

bool LocalFactorization::is_spacelike(const std::string& a,
                                      const std::string& b) const {
  for (const auto& [x, y] : spacelike_pairs)
    if ((x == a && y == b) || (x == b && y == a)) return true;
  return false;
}

std::vector<int> LocalFactorization::factors_of_region(
    const std::string& r) const {
  if (!known_region(r)) throw ValidationError("unknown region " + r);
  std::vector<int> out;
  for (int f = 0; f < factors(); ++f)
    if (region_of_factor[f] == r) out.push_back(f);
  return out;
}

int LocalFactorization::dim_of_region(const std::string& r) const {
  int d = 1;
  for (int f : factors_of_region(r)) d *= factor_dims[f];
  return d;
}

ScatteringMorphism::ScatteringMorphism(Operator u, std::vector<int> dims,
                                       std::vector<int> supp)
    : U(std::move(u)), factor_dims(std::move(dims)), support(std::move(supp)) {
  if (product_of(factor_dims) != U.dim())
    throw DimensionMismatch("factor dims do not multiply to the coupling dim");
  std::set<int> seen;
  for (int f : support) {
    if (f < 0 || f >= static_cast<int>(factor_dims.size()))
      throw ValidationError("support factor out of range");
    if (!seen.insert(f).second)
      throw ValidationError("support factor repeated");
  }
}

void ScatteringMorphism::validate(const TolerancePolicy& pol) const {
  double tol = 10 * pol.eq_tol;
  if (!U.is_unitary(tol)) throw ValidationError("coupling is not unitary");
  std::set<int> supp(support.begin(), support.end());
  for (int f = 0; f < static_cast<int>(factor_dims.size()); ++f) {
    if (supp.count(f)) continue;
    for (int a = 0; a < factor_dims[f]; ++a)
      for (int b = 0; b < factor_dims[f]; ++b) {
        Operator E =
            lift_operator(factor_dims, {f}, matrix_unit(factor_dims[f], a, b));
        if (max_abs_diff(U * E, E * U) > tol)
          throw ValidationError("coupling acts on factor " +
                                std::to_string(f) + " outside its support");
      }
  }
}

Effect::Effect(Operator o, const TolerancePolicy& pol) : op(std::move(o)) {
  if (!op.is_hermitian(10 * pol.eq_tol))
    throw NotHermitian("effect is not Hermitian");
  EigenSystem es = hermitian_eigendecomposition(op, pol);
  if (es.values.front() < -pol.eq_tol || es.values.back() > 1 + pol.eq_tol)
    throw ValidationError("effect spectrum escapes [0, 1]");
}

EffectValuedMeasure::EffectValuedMeasure(std::vector<std::string> outs,
                                         std::vector<Effect> effs,
                                         const TolerancePolicy& pol)
    : outcomes(std::move(outs)), effects(std::move(effs)) {
  if (outcomes.empty()) throw ValidationError("measure needs an outcome");
  if (outcomes.size() != effects.size())
    throw ValidationError("one effect per outcome required");
  std::set<std::string> seen;
  for (const auto& o : outcomes)
    if (!seen.insert(o).second)
      throw ValidationError("outcome " + o + " repeated");
  Operator sum(effects.front().op.dim());
  for (const auto& e : effects) {
    if (e.op.dim() != sum.dim())
      throw DimensionMismatch("effects live on different spaces");
    sum = sum + e.op;
  }
  if (max_abs_diff(sum, Operator::identity(sum.dim())) > 10 * pol.eq_tol)
    throw ValidationError("effects do not sum to the identity");
}

const Effect& EffectValuedMeasure::effect_of(const std::string& outcome) const {
  for (size_t i = 0; i < outcomes.size(); ++i)
    if (outcomes[i] == outcome) return effects[i];
  throw ValidationError("unknown outcome " + outcome);
}

Operator lift_operator(const std::vector<int>& dims, const std::vector<int>& on,
                       const Operator& A) {
  int m = static_cast<int>(dims.size());
  if (on.empty()) throw ValidationError("lift needs at least one factor");
  std::set<int> seen;
  for (int f : on) {
    if (f < 0 || f >= m) throw ValidationError("lift factor out of range");
    if (!seen.insert(f).second) throw ValidationError("lift factor repeated");
  }
  long long dsub = 1;
  for (int f : on) dsub *= dims[f];
  if (dsub != A.dim())
    throw DimensionMismatch("operator does not match the listed factors");
  long long total = product_of(dims);

  std::vector<long long> stride(m);
  long long s = 1;
  for (int f = m - 1; f >= 0; --f) {
    stride[f] = s;
    s *= dims[f];
  }

  // Base offsets of every sub-index and every off-support configuration.
  std::vector<long long> baseA(static_cast<size_t>(dsub), 0);
  for (long long p = 0; p < dsub; ++p) {
    long long rest = p;
    for (int k = static_cast<int>(on.size()) - 1; k >= 0; --k) {
      int f = on[k];
      baseA[static_cast<size_t>(p)] += (rest % dims[f]) * stride[f];
      rest /= dims[f];
    }
  }
  std::vector<int> off;
  for (int f = 0; f < m; ++f)
    if (!seen.count(f)) off.push_back(f);
  long long doff = total / dsub;
  std::vector<long long> baseOff(static_cast<size_t>(doff), 0);
  for (long long c = 0; c < doff; ++c) {
    long long rest = c;
    for (int k = static_cast<int>(off.size()) - 1; k >= 0; --k) {
      int f = off[k];
      baseOff[static_cast<size_t>(c)] += (rest % dims[f]) * stride[f];
      rest /= dims[f];
    }
  }

  Operator R(static_cast<int>(total));
  for (long long p = 0; p < dsub; ++p)
    for (long long q = 0; q < dsub; ++q) {
      cplx v = A.at(static_cast<int>(p), static_cast<int>(q));
      if (v == cplx(0, 0)) continue;
      for (long long c = 0; c < doff; ++c)
        R.at(static_cast<int>(baseA[p] + baseOff[c]),
             static_cast<int>(baseA[q] + baseOff[c])) = v;
    }
  return R;
}

Operator eta_sigma(const Operator& C, const DensityState& sigma) {
  int dB = sigma.dim();
  if (C.dim() % dB != 0)
    throw DimensionMismatch("operator dim is not a multiple of the probe dim");
  int dA = C.dim() / dB;
  return partial_trace(C * tensor_product(Operator::identity(dA), sigma.matrix),
                       {dA, dB}, {1});
}

Operator induced_observable(const Operator& B, const DensityState& sigma,
                            const ScatteringMorphism& theta,
                            const TolerancePolicy& pol) {
  if (theta.factor_dims.size() < 2)
    throw DimensionMismatch("coupling needs a system and a probe factor");
  int dp = theta.factor_dims.back();
  if (B.dim() != dp || sigma.dim() != dp)
    throw DimensionMismatch("probe observable dim mismatch");
  int dA = theta.dim() / dp;
  int last = static_cast<int>(theta.factor_dims.size()) - 1;
  Operator conj = theta.U.adjoint() *
                  lift_operator(theta.factor_dims, {last}, B) * theta.U;
  Operator eps = eta_sigma(conj, sigma);

  // The defining pairing, contracted the other way around.
  Rng rng(12021);
  double tol = 1e3 * pol.eq_tol * std::max(1.0, B.max_abs());
  for (int t = 0; t < 5; ++t) {
    DensityState w = rng.random_density(dA);
    cplx lhs = trace_prod(w.matrix, eps);
    cplx rhs = trace_prod(tensor_product(w.matrix, sigma.matrix), conj);
    if (std::abs(lhs - rhs) > tol)
      throw ValidationError("induced observable failed its defining pairing");
  }
  return eps;
}

CheckReport check_epsilon_properties(const DensityState& sigma,
                                     const ScatteringMorphism& theta,
                                     int trials, uint64_t seed,
                                     const TolerancePolicy& pol) {
  CheckReport rep;
  double tol = pol.eq_tol;
  int dp = theta.factor_dims.back();
  int dA = theta.dim() / dp;
  int last = static_cast<int>(theta.factor_dims.size()) - 1;
  auto eps = [&](const Operator& B) {
    return eta_sigma(theta.U.adjoint() *
                         lift_operator(theta.factor_dims, {last}, B) * theta.U,
                     sigma);
  };

  double unital = max_abs_diff(
      induced_observable(Operator::identity(dp), sigma, theta, pol),
      Operator::identity(dA));
  rep.add("unitality", unital <= tol, unital, 0, tol);

  Rng rng(seed);
  double worst_adj = 0;
  double worst_gap_eig = 0;
  for (int t = 0; t < trials; ++t) {
    Operator B =
        rng.random_hermitian(dp) + cplx(0, 1) * rng.random_hermitian(dp);
    worst_adj =
        std::max(worst_adj, max_abs_diff(eps(B.adjoint()), eps(B).adjoint()));
    Operator gap = hermitized(eps(B.adjoint() * B) -
                              eps(B).adjoint() * eps(B));
    EigenSystem es = hermitian_eigendecomposition(gap, pol);
    if (t == 0 || es.values.front() < worst_gap_eig)
      worst_gap_eig = es.values.front();
  }
  rep.add("adjoint_compat", worst_adj <= tol, worst_adj, 0, tol);
  rep.add("operator_inequality", worst_gap_eig >= -tol, worst_gap_eig, 0, tol);

  if (dp <= 4) {
    Operator choi(dp * dA);
    for (int a = 0; a < dp; ++a)
      for (int b = 0; b < dp; ++b) {
        Operator blk = eps(matrix_unit(dp, a, b));
        for (int i = 0; i < dA; ++i)
          for (int j = 0; j < dA; ++j)
            choi.at(a * dA + i, b * dA + j) = blk.at(i, j);
      }
    EigenSystem es = hermitian_eigendecomposition(hermitized(choi), pol);
    rep.add("choi_min_eigenvalue", es.values.front() >= -tol,
            es.values.front(), 0, tol);
  } else {
    rep.warn("choi_skipped_probe_dim", dp, 4, 0);
  }
  return rep;
}

PreInstrumentResult pre_instrument(const Effect& B, const DensityState& sigma,
                                   const ScatteringMorphism& theta,
                                   const DensityState& omega,
                                   const TolerancePolicy& pol) {
  int dp = theta.factor_dims.back();
  if (sigma.dim() != dp || B.op.dim() != dp)
    throw DimensionMismatch("probe effect dim mismatch");
  int dA = theta.dim() / dp;
  if (omega.dim() != dA)
    throw DimensionMismatch("system state dim mismatch");
  Operator M = pre_apply(omega.matrix, sigma, B.op, theta);
  EigenSystem es = hermitian_eigendecomposition(M, pol);
  if (es.values.front() < -10 * pol.eq_tol)
    throw ValidationError("updated functional is not positive");
  return {M, M.trace().real()};
}

DensityState post_select(const Effect& B, const DensityState& sigma,
                         const ScatteringMorphism& theta,
                         const DensityState& omega,
                         const TolerancePolicy& pol) {
  PreInstrumentResult pre = pre_instrument(B, sigma, theta, omega, pol);
  if (pre.weight <= pol.eq_tol)
    throw ZeroProbability("effect has vanishing probability");
  return DensityState(pre.functional * cplx(1.0 / pre.weight, 0), pol);
}

CheckReport compose_instruments(const Effect& B1, const DensityState& sigma1,
                                const ScatteringMorphism& theta1,
                                const Effect& B2, const DensityState& sigma2,
                                const ScatteringMorphism& theta2,
                                const DensityState& omega,
                                const LocalFactorization& fact,
                                const TolerancePolicy& pol) {
  int m = fact.factors();
  if (m < 3)
    throw ValidationError("layout needs probe, system factors, probe");
  const std::vector<int>& dims = fact.factor_dims;
  int d1 = dims.front();
  int d2 = dims.back();
  int nsys = m - 2;
  std::vector<int> sys_dims(dims.begin() + 1, dims.end() - 1);
  int dA = 1;
  for (int d : sys_dims) dA *= d;
  if (sigma1.dim() != d1 || B1.op.dim() != d1 || sigma2.dim() != d2 ||
      B2.op.dim() != d2 || omega.dim() != dA)
    throw DimensionMismatch("states do not match the factor layout");
  std::vector<int> want1 = sys_dims, want2 = sys_dims;
  want1.push_back(d1);
  want2.push_back(d2);
  if (theta1.factor_dims != want1 || theta2.factor_dims != want2)
    throw DimensionMismatch("couplings do not match the factor layout");

  const std::string& k1 = fact.region_of_factor.front();
  const std::string& k2 = fact.region_of_factor.back();
  if (fact.in_past(k2, k1))
    throw CausalOrderViolated("second coupling region " + k2 +
                              " lies in the causal past of " + k1);
  bool spacelike = fact.is_spacelike(k1, k2);
  if (spacelike) {
    std::set<int> s1(theta1.support.begin(), theta1.support.end());
    for (int f : theta2.support)
      if (f < nsys && s1.count(f))
        throw CausalOrderViolated(
            "spacelike couplings share system factor " + std::to_string(f));
  }

  // Sequential route.
  Operator r1 = pre_apply(omega.matrix, sigma1, B1.op, theta1);
  Operator r12 = pre_apply(r1, sigma2, B2.op, theta2);

  // Joint-probe route on probe1 x system x probe2.
  std::vector<int> sys_idx(static_cast<size_t>(nsys));
  for (int k = 0; k < nsys; ++k) sys_idx[static_cast<size_t>(k)] = 1 + k;
  std::vector<int> on1 = sys_idx, on2 = sys_idx;
  on1.push_back(0);
  on2.push_back(m - 1);
  Operator U1 = lift_operator(dims, on1, theta1.U);
  Operator U2 = lift_operator(dims, on2, theta2.U);
  Operator U = U2 * U1;
  Operator rho_full = lift_operator(dims, {0}, sigma1.matrix) *
                      lift_operator(dims, sys_idx, omega.matrix) *
                      lift_operator(dims, {m - 1}, sigma2.matrix);
  Operator rho_out = U * rho_full * U.adjoint();
  std::set<int> probes = {0, m - 1};
  Operator joint = hermitized(partial_trace(
      rho_out * (lift_operator(dims, {0}, B1.op) *
                 lift_operator(dims, {m - 1}, B2.op)),
      dims, probes));

  CheckReport rep;
  double res = max_abs_diff(r12, joint);
  rep.add("sequential_vs_joint", res <= pol.eq_tol, res, 0, pol.eq_tol);
  double wgap = std::abs(r12.trace().real() - joint.trace().real());
  rep.add("weight_sequential_vs_joint", wgap <= pol.eq_tol, wgap, 0,
          pol.eq_tol);

  Operator r2 = pre_apply(omega.matrix, sigma2, B2.op, theta2);
  Operator r21 = pre_apply(r2, sigma1, B1.op, theta1);
  double ogap = max_abs_diff(r21, r12);
  if (spacelike)
    rep.add("order_independence", ogap <= pol.eq_tol, ogap, 0, pol.eq_tol);
  else
    rep.warn("order_swap_gap", ogap, 0, 0);
  return rep;
}

NonsignalingResult nonsignaling_check(const ScatteringMorphism& theta1,
                                      const ScatteringMorphism& theta2,
                                      const Operator& C, const std::string& c_region,
                                      const DensityState& omega,
                                      const DensityState& sigma1,
                                      const DensityState& sigma2,
                                      const LocalFactorization& fact,
                                      int probe1_factor, int probe2_factor,
                                      const TolerancePolicy& pol) {
  const std::vector<int>& dims = fact.factor_dims;
  int m = fact.factors();
  if (probe1_factor < 0 || probe1_factor >= m || probe2_factor < 0 ||
      probe2_factor >= m || probe1_factor == probe2_factor)
    throw ValidationError("probe factors invalid");
  if (theta1.factor_dims != dims || theta2.factor_dims != dims)
    throw DimensionMismatch("couplings must live on the full space");
  const std::string& o1 = fact.region_of_factor[probe1_factor];
  const std::string& o2 = fact.region_of_factor[probe2_factor];
  const std::string& o3 = c_region;
  if (!fact.known_region(o3)) throw ValidationError("unknown region " + o3);

  if (fact.in_past(o2, o1))
    throw CausalOrderViolated("region " + o2 + " lies in the causal past of " +
                              o1);
  if (fact.in_past(o3, o2))
    throw CausalOrderViolated("region " + o3 + " lies in the causal past of " +
                              o2);
  if (!fact.is_spacelike(o1, o3))
    throw CausalOrderViolated("regions " + o1 + " and " + o3 +
                              " are not spacelike");
  for (int f : theta1.support)
    if (fact.region_of_factor[f] != o1)
      throw CausalOrderViolated("first coupling touches factor " +
                                std::to_string(f) + " in region " +
                                fact.region_of_factor[f]);
  for (int f : theta2.support) {
    const std::string& r = fact.region_of_factor[f];
    if (r != o2 && !fact.precedes(o2, r))
      throw CausalOrderViolated("second coupling touches factor " +
                                std::to_string(f) + " in region " + r +
                                " outside its causal future");
  }

  std::vector<int> c_factors = fact.factors_of_region(o3);
  long long dc = 1;
  for (int f : c_factors) dc *= dims[f];
  if (C.dim() != dc)
    throw DimensionMismatch("observable does not match its region");
  if (!C.is_hermitian(10 * pol.eq_tol))
    throw NotHermitian("observable is not Hermitian");
  if (sigma1.dim() != dims[probe1_factor] ||
      sigma2.dim() != dims[probe2_factor])
    throw DimensionMismatch("probe state dim mismatch");
  std::vector<int> rest;
  long long drest = 1;
  for (int f = 0; f < m; ++f)
    if (f != probe1_factor && f != probe2_factor) {
      rest.push_back(f);
      drest *= dims[f];
    }
  if (omega.dim() != drest)
    throw DimensionMismatch("system state dim mismatch");

  Operator rho_full = lift_operator(dims, {probe1_factor}, sigma1.matrix) *
                      lift_operator(dims, {probe2_factor}, sigma2.matrix) *
                      lift_operator(dims, rest, omega.matrix);
  Operator Chat = lift_operator(dims, c_factors, C);
  Operator after2 = theta2.U.adjoint() * Chat * theta2.U;
  Operator after12 = theta1.U.adjoint() * after2 * theta1.U;
  double with_A = trace_prod(rho_full, after12).real();
  double without_A = trace_prod(rho_full, after2).real();
  return {with_A, without_A, std::abs(with_A - without_A)};
}

EffectValuedMeasure evm_induce(const EffectValuedMeasure& E,
                               const DensityState& sigma,
                               const ScatteringMorphism& theta,
                               const TolerancePolicy& pol) {
  std::vector<Effect> induced;
  induced.reserve(E.effects.size());
  for (const auto& e : E.effects)
    induced.emplace_back(induced_observable(e.op, sigma, theta, pol), pol);
  return EffectValuedMeasure(E.outcomes, std::move(induced), pol);
}

VarianceResult variance_check(const Operator& B, const DensityState& sigma,
                              const ScatteringMorphism& theta,
                              const DensityState& omega,
                              const TolerancePolicy& pol) {
  if (!B.is_hermitian(10 * pol.eq_tol))
    throw NotHermitian("probe observable is not Hermitian");
  int dp = theta.factor_dims.back();
  if (B.dim() != dp || sigma.dim() != dp)
    throw DimensionMismatch("probe observable dim mismatch");
  int dA = theta.dim() / dp;
  if (omega.dim() != dA)
    throw DimensionMismatch("system state dim mismatch");
  int last = static_cast<int>(theta.factor_dims.size()) - 1;
  Operator rho_os = tensor_product(omega.matrix, sigma.matrix);
  Operator lifted = lift_operator(theta.factor_dims, {last}, B);
  Operator conj1 = theta.U.adjoint() * lifted * theta.U;
  Operator conj2 = theta.U.adjoint() *
                   lift_operator(theta.factor_dims, {last}, B * B) * theta.U;
  double e1 = trace_prod(rho_os, conj1).real();
  double e2 = trace_prod(rho_os, conj2).real();
  Operator eps = induced_observable(B, sigma, theta, pol);
  double i1 = omega.expect(eps).real();
  double i2 = omega.expect(eps * eps).real();
  return {e2 - e1 * e1, i2 - i1 * i1};
}

DensityState separating_state(const Operator& A, const Operator& B,
                              const TolerancePolicy& pol) {
  if (A.dim() != B.dim()) throw DimensionMismatch("observable dims differ");
  if (!A.is_hermitian(10 * pol.eq_tol) || !B.is_hermitian(10 * pol.eq_tol))
    throw NotHermitian("separation needs Hermitian observables");
  EigenSystem es = hermitian_eigendecomposition(A - B, pol);
  size_t best = 0;
  for (size_t i = 1; i < es.values.size(); ++i)
    if (std::abs(es.values[i]) > std::abs(es.values[best])) best = i;
  if (std::abs(es.values[best]) <= pol.eq_tol)
    throw ValidationError("observables agree within tolerance");
  return DensityState::pure(es.vectors[best], pol);
}

namespace {

[[noreturn]] void scenario_fail(int line, const std::string& what) {
  throw ValidationError("scenario line " + std::to_string(line) + ": " + what);
}

Operator swap_gate(int d) {
  Operator S(d * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) S.at(a * d + b, b * d + a) = 1;
  return S;
}

Operator cflip_gate(int dt) {
  // Qubit control; |1> drives a cyclic shift on the target.
  Operator U(2 * dt);
  for (int j = 0; j < dt; ++j) {
    U.at(j, j) = 1;
    U.at(dt + (j + 1) % dt, dt + j) = 1;
  }
  return U;
}

}  // namespace

Scenario load_scenario(const std::string& path, const TolerancePolicy& pol) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario " + path);

  std::vector<int> dims;
  std::vector<std::string> regions;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::pair<std::string, std::string>> spacelike;
  std::vector<std::pair<std::string, std::pair<std::vector<int>, Operator>>>
      gates;

  std::string raw;
  int lineno = 0;
  auto next_line = [&](std::string& out) {
    while (std::getline(in, raw)) {
      ++lineno;
      size_t hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      std::istringstream probe(raw);
      std::string tok;
      if (probe >> tok) {
        out = raw;
        return true;
      }
    }
    return false;
  };

  std::string line;
  while (next_line(line)) {
    std::istringstream ss(line);
    std::string kw;
    ss >> kw;
    if (kw == "factors") {
      if (!dims.empty()) scenario_fail(lineno, "factors repeated");
      int d;
      while (ss >> d) dims.push_back(d);
      if (dims.empty()) scenario_fail(lineno, "factors needs dimensions");
      regions.assign(dims.size(), "");
    } else if (kw == "region") {
      int f;
      std::string r;
      if (!(ss >> f >> r)) scenario_fail(lineno, "region needs factor, label");
      if (dims.empty()) scenario_fail(lineno, "factors must come first");
      if (f < 0 || f >= static_cast<int>(dims.size()))
        scenario_fail(lineno, "factor out of range");
      regions[static_cast<size_t>(f)] = r;
    } else if (kw == "edge" || kw == "spacelike") {
      std::string a, b;
      if (!(ss >> a >> b)) scenario_fail(lineno, kw + " needs two regions");
      (kw == "edge" ? edges : spacelike).emplace_back(a, b);
    } else if (kw == "unitary") {
      if (dims.empty()) scenario_fail(lineno, "factors must come first");
      std::string name, kind;
      if (!(ss >> name >> kind)) scenario_fail(lineno, "unitary needs a kind");
      std::vector<int> on;
      int f;
      while (ss >> f) {
        if (f < 0 || f >= static_cast<int>(dims.size()))
          scenario_fail(lineno, "factor out of range");
        on.push_back(f);
      }
      Operator G(1);
      if (kind == "swap") {
        if (on.size() != 2 || dims[on[0]] != dims[on[1]])
          scenario_fail(lineno, "swap needs two equal-dim factors");
        G = swap_gate(dims[on[0]]);
      } else if (kind == "cflip") {
        if (on.size() != 2 || dims[on[0]] != 2)
          scenario_fail(lineno, "cflip needs a qubit control and a target");
        G = cflip_gate(dims[on[1]]);
      } else if (kind == "matrix") {
        if (on.empty()) scenario_fail(lineno, "matrix needs factors");
        int d = 1;
        for (int g : on) d *= dims[g];
        std::vector<std::vector<cplx>> rows;
        for (int i = 0; i < d; ++i) {
          std::string row;
          if (!next_line(row)) scenario_fail(lineno, "matrix rows missing");
          std::istringstream rs(row);
          std::vector<cplx> r;
          double re, im;
          while (rs >> re >> im) r.emplace_back(re, im);
          if (static_cast<int>(r.size()) != d)
            scenario_fail(lineno, "matrix row has wrong width");
          rows.push_back(std::move(r));
        }
        G = Operator::from_rows(rows);
      } else {
        scenario_fail(lineno, "unknown unitary kind " + kind);
      }
      for (const auto& [n, g] : gates)
        if (n == name) scenario_fail(lineno, "unitary " + name + " repeated");
      gates.emplace_back(name, std::make_pair(on, G));
    } else {
      scenario_fail(lineno, "unknown keyword " + kw);
    }
  }
  if (dims.empty()) throw ValidationError("scenario has no factors line");
  for (size_t f = 0; f < regions.size(); ++f)
    if (regions[f].empty())
      throw ValidationError("factor " + std::to_string(f) + " has no region");

  Scenario sc{LocalFactorization(dims, regions, edges, spacelike), {}};
  for (auto& [name, spec] : gates) {
    std::vector<int> supp = spec.first;
    std::sort(supp.begin(), supp.end());
    ScatteringMorphism theta(lift_operator(dims, spec.first, spec.second),
                             dims, supp);
    theta.validate(pol);
    sc.morphisms.emplace(name, std::move(theta));
  }
  return sc;
}

}  // namespace qfv
