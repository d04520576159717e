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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "qfv/fvlab.hpp"

using namespace qfv;

namespace {

const TolerancePolicy pol;

cplx tp(const Operator& A, const Operator& B) {
  cplx s = 0;
  for (int i = 0; i < A.dim(); ++i)
    for (int j = 0; j < A.dim(); ++j) s += A.at(i, j) * B.at(j, i);
  return s;
}

Operator ketbra(int dim, int k) {
  return Operator::outer(StateVector::basis(dim, k), StateVector::basis(dim, k));
}

Operator unit(int d, int a, int b) {
  Operator E(d);
  E.at(a, b) = 1;
  return E;
}

Operator swap2(int d) {
  Operator S(d * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) S.at(a * d + b, b * d + a) = 1;
  return S;
}

// System qubit drives a flip on the probe qubit; system is the first factor.
Operator control_flip() {
  return tensor_product(ketbra(2, 0), Operator::identity(2)) +
         tensor_product(ketbra(2, 1), pauli_x());
}

ScatteringMorphism qq(const Operator& U) {
  return ScatteringMorphism(U, {2, 2}, {0, 1});
}

Effect random_effect(Rng& rng, int dim) {
  Operator H = rng.random_hermitian(dim);
  Operator E = H * H;
  return Effect(E * cplx(1.0 / (E.max_abs() * dim + 1), 0));
}

std::string data_path(const std::string& name) {
  const char* dir = std::getenv("QFV_DATA_DIR");
  return std::string(dir ? dir : "data") + "/" + name;
}

double entry(const CheckReport& rep, const std::string& name) {
  for (const auto& e : rep.entries)
    if (e.name == name) return e.value;
  FAIL("missing entry ", name);
  return 0;
}

bool has_entry(const CheckReport& rep, const std::string& name) {
  for (const auto& e : rep.entries)
    if (e.name == name) return true;
  return false;
}

StateVector plus_state() {
  return (StateVector::basis(2, 0) + StateVector::basis(2, 1)).normalized();
}

}  // namespace

TEST_CASE("factorization validates its causal data") {
  LocalFactorization fact({2, 2, 2}, {"A", "B", "C"}, {{"A", "B"}, {"B", "C"}},
                          {});
  CHECK(fact.total_dim() == 8);
  CHECK(fact.precedes("A", "C"));
  CHECK(!fact.precedes("C", "A"));
  CHECK(fact.in_past("A", "A"));
  CHECK(fact.factors_of_region("B") == std::vector<int>{1});
  CHECK(fact.dim_of_region("B") == 2);

  CHECK_THROWS_AS(LocalFactorization({2, 2}, {"A", "B"}, {{"A", "B"}},
                                     {{"A", "B"}}),
                  ValidationError);
  CHECK_THROWS_AS(LocalFactorization({2, 2}, {"A", "B"},
                                     {{"A", "B"}, {"B", "A"}}, {}),
                  ValidationError);
  CHECK_THROWS_AS(LocalFactorization({2, 2}, {"A"}, {}, {}), ValidationError);
  CHECK_THROWS_AS(LocalFactorization({2, 2}, {"A", "B"}, {{"A", "X"}}, {}),
                  ValidationError);
}

TEST_CASE("morphism support claims are verified") {
  std::vector<int> dims = {2, 2, 2};
  Operator g = control_flip();
  ScatteringMorphism ok(lift_operator(dims, {0, 2}, g), dims, {0, 2});
  ok.validate(pol);

  ScatteringMorphism lying(lift_operator(dims, {0, 2}, g), dims, {0, 1});
  CHECK_THROWS_AS(lying.validate(pol), ValidationError);

  ScatteringMorphism skew(Operator::identity(8) * cplx(2, 0), dims, {0});
  CHECK_THROWS_AS(skew.validate(pol), ValidationError);
  CHECK_THROWS_AS(ScatteringMorphism(Operator::identity(8), dims, {3}),
                  ValidationError);
  CHECK_THROWS_AS(ScatteringMorphism(Operator::identity(4), dims, {0}),
                  DimensionMismatch);
}

TEST_CASE("lift places operators on the right factors") {
  Rng rng(5);
  Operator A = rng.random_hermitian(2);
  Operator B = rng.random_hermitian(3);
  CHECK(max_abs_diff(lift_operator({2, 3}, {0}, A),
                     tensor_product(A, Operator::identity(3))) < 1e-15);
  CHECK(max_abs_diff(lift_operator({2, 3}, {1}, B),
                     tensor_product(Operator::identity(2), B)) < 1e-15);
  CHECK(max_abs_diff(lift_operator({2, 3}, {0, 1}, tensor_product(A, B)),
                     tensor_product(A, B)) < 1e-15);

  // Permuted placement: control on the second factor, target on the first.
  Operator flipped = lift_operator({2, 2}, {1, 0}, control_flip());
  Operator expect = tensor_product(Operator::identity(2), ketbra(2, 0)) +
                    tensor_product(pauli_x(), ketbra(2, 1));
  CHECK(max_abs_diff(flipped, expect) < 1e-15);

  CHECK_THROWS_AS(lift_operator({2, 2}, {0}, Operator::identity(4)),
                  DimensionMismatch);
  CHECK_THROWS_AS(lift_operator({2, 2}, {0, 0}, Operator::identity(4)),
                  ValidationError);
}

TEST_CASE("partial evaluation against the probe state") {
  Rng rng(7);
  DensityState sigma = rng.random_density(3);
  Operator A = rng.random_hermitian(4);
  Operator B = rng.random_hermitian(3);

  CHECK(max_abs_diff(eta_sigma(tensor_product(A, Operator::identity(3)), sigma),
                     A) < 1e-12);
  cplx sB = tp(sigma.matrix, B);
  CHECK(max_abs_diff(eta_sigma(tensor_product(Operator::identity(4), B), sigma),
                     Operator::identity(4) * sB) < 1e-12);
  CHECK(max_abs_diff(eta_sigma(Operator::identity(12), sigma),
                     Operator::identity(4)) < 1e-12);

  // Decompose a random operator into elementary tensors and evaluate the
  // defining relation term by term.
  Operator C(12);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) C.at(i, j) = rng.cnormal();
  Operator oracle(4);
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) {
      Operator blk(4);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) blk.at(i, j) = C.at(i * 3 + k, j * 3 + l);
      oracle = oracle + blk * tp(sigma.matrix, unit(3, k, l));
    }
  CHECK(max_abs_diff(eta_sigma(C, sigma), oracle) < 1e-12);

  // Linearity.
  Operator C2(12);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) C2.at(i, j) = rng.cnormal();
  CHECK(max_abs_diff(eta_sigma(C + C2, sigma),
                     eta_sigma(C, sigma) + eta_sigma(C2, sigma)) < 1e-12);

  CHECK_THROWS_AS(eta_sigma(Operator::identity(7), sigma), DimensionMismatch);
}

TEST_CASE("induced observables match their oracles") {
  DensityState ground = DensityState::pure(StateVector::basis(2, 0));
  Operator B = pauli_z();

  ScatteringMorphism ident = qq(Operator::identity(4));
  Operator eps_id = induced_observable(B, ground, ident, pol);
  cplx sB = tp(ground.matrix, B);
  CHECK(max_abs_diff(eps_id, Operator::identity(2) * sB) < 1e-12);

  ScatteringMorphism swp = qq(swap2(2));
  CHECK(max_abs_diff(induced_observable(B, ground, swp, pol), B) < 1e-12);

  // Controlled flip, checked against the explicit 4x4 conjugation.
  ScatteringMorphism cf = qq(control_flip());
  Operator eps_cf = induced_observable(B, ground, cf, pol);
  Operator conj = control_flip().adjoint() *
                  tensor_product(Operator::identity(2), B) * control_flip();
  Operator oracle(2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      cplx s = 0;
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
          s += conj.at(i * 2 + k, j * 2 + l) * ground.matrix.at(l, k);
      oracle.at(i, j) = s;
    }
  CHECK(max_abs_diff(eps_cf, oracle) < 1e-12);
  CHECK(max_abs_diff(eps_cf, pauli_z()) < 1e-12);

  CHECK_THROWS_AS(induced_observable(Operator::identity(3), ground, cf, pol),
                  DimensionMismatch);
}

TEST_CASE("epsilon is unital, adjoint compatible and completely positive") {
  DensityState sigma = DensityState::pure(plus_state());

  CheckReport idrep = check_epsilon_properties(sigma, qq(Operator::identity(4)),
                                               4, 11, pol);
  CHECK(idrep.all_pass());
  CHECK(entry(idrep, "unitality") < 1e-12);
  CHECK(entry(idrep, "adjoint_compat") < 1e-12);
  CHECK(entry(idrep, "choi_min_eigenvalue") > -1e-12);

  CheckReport swrep = check_epsilon_properties(sigma, qq(swap2(2)), 4, 12, pol);
  CHECK(swrep.all_pass());

  // For the swap the map is the identity, so the Choi matrix is the
  // maximally entangled projector scaled by the dimension.
  Operator choi(4);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Operator blk = induced_observable(unit(2, a, b), sigma, qq(swap2(2)), pol);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) choi.at(a * 2 + i, b * 2 + j) = blk.at(i, j);
    }
  StateVector omega_vec(4);
  omega_vec.amps[0] = cplx(0.7071067811865475, 0);
  omega_vec.amps[3] = cplx(0.7071067811865475, 0);
  CHECK(max_abs_diff(choi, Operator::outer(omega_vec, omega_vec) * cplx(2, 0)) <
        1e-12);

  // Randomized suite on two qutrits.
  for (int s = 0; s < 50; ++s) {
    Rng rng(1000 + static_cast<uint64_t>(s));
    ScatteringMorphism theta(rng.random_unitary(9), {3, 3}, {0, 1});
    DensityState sg = rng.random_density(3);
    CheckReport rep =
        check_epsilon_properties(sg, theta, 5, 2000 + static_cast<uint64_t>(s),
                                 pol);
    CHECK(rep.all_pass());
    CHECK(entry(rep, "operator_inequality") > -1e-9);
    CHECK(entry(rep, "choi_min_eigenvalue") > -1e-9);
  }
}

TEST_CASE("pre-instrument weights and nonselective updates") {
  Rng rng(21);
  DensityState omega = rng.random_density(4);
  DensityState sigma = rng.random_density(2);
  std::vector<int> dims = {2, 2, 2};
  ScatteringMorphism theta(lift_operator(dims, {0, 2}, control_flip()), dims,
                           {0, 2});

  // Unit effect: weight one and the nonselective state.
  PreInstrumentResult ns =
      pre_instrument(Effect(Operator::identity(2)), sigma, theta, omega, pol);
  CHECK(ns.weight == doctest::Approx(1.0).epsilon(1e-12));
  Operator direct = partial_trace(
      theta.U * tensor_product(omega.matrix, sigma.matrix) * theta.U.adjoint(),
      {4, 2}, {1});
  CHECK(max_abs_diff(ns.functional, direct) < 1e-12);

  // The coupling touches only the first system factor, so observables on
  // the second one keep their expectations.
  Operator a = rng.random_hermitian(2);
  Operator lifted_a = tensor_product(Operator::identity(2), a);
  CHECK(std::abs(omega.expect(lifted_a) - tp(ns.functional, lifted_a)) < 1e-12);

  PreInstrumentResult zero =
      pre_instrument(Effect(Operator(2)), sigma, theta, omega, pol);
  CHECK(zero.weight == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(zero.functional.max_abs() < 1e-12);

  for (int t = 0; t < 10; ++t) {
    Effect eff = random_effect(rng, 2);
    PreInstrumentResult pre = pre_instrument(eff, sigma, theta, omega, pol);
    Operator eps = induced_observable(eff.op, sigma, theta, pol);
    CHECK(std::abs(pre.weight - omega.expect(eps).real()) < 1e-11);
  }
}

TEST_CASE("post-selection transports and rejects") {
  Rng rng(31);
  DensityState omega = rng.random_density(2);
  DensityState sigma = rng.random_density(2);

  // Identity coupling changes nothing, whatever was observed.
  DensityState kept =
      post_select(random_effect(rng, 2), sigma, qq(Operator::identity(4)),
                  omega, pol);
  CHECK(max_abs_diff(kept.matrix, omega.matrix) < 1e-12);

  // Swap coupling measures the old system state and prepares the probe
  // state in its place, whatever the outcome was.
  StateVector phi = rng.random_state(2);
  Effect proj(Operator::outer(phi, phi));
  PreInstrumentResult sw_pre =
      pre_instrument(proj, sigma, qq(swap2(2)), omega, pol);
  CHECK(std::abs(sw_pre.weight - omega.expect(proj.op).real()) < 1e-12);
  DensityState swapped = post_select(proj, sigma, qq(swap2(2)), omega, pol);
  CHECK(max_abs_diff(swapped.matrix, sigma.matrix) < 1e-12);

  // Selecting on an impossible outcome.
  DensityState up = DensityState::pure(StateVector::basis(2, 0));
  CHECK_THROWS_AS(post_select(Effect(ketbra(2, 1)), up, qq(swap2(2)), up, pol),
                  ZeroProbability);

  // Off-coupling expectations survive selection exactly when the observable
  // is uncorrelated with the induced effect in the initial state.
  std::vector<int> dims = {2, 2, 2};
  ScatteringMorphism theta(lift_operator(dims, {0, 2}, control_flip()), dims,
                           {0, 2});
  Effect eff(ketbra(2, 0));
  Operator a = rng.random_hermitian(2);
  Operator lifted_a = tensor_product(Operator::identity(2), a);

  DensityState product(
      tensor_product(rng.random_density(2).matrix, rng.random_density(2).matrix),
      pol);
  DensityState sel = post_select(eff, sigma, theta, product, pol);
  CHECK(std::abs(sel.expect(lifted_a) - product.expect(lifted_a)) < 1e-11);

  StateVector bell(4);
  bell.amps[0] = cplx(0.8, 0);
  bell.amps[3] = cplx(0.6, 0);
  DensityState entangled = DensityState::pure(bell);
  DensityState sel2 = post_select(eff, sigma, theta, entangled, pol);
  CHECK(std::abs(sel2.expect(tensor_product(Operator::identity(2), pauli_z())) -
                 entangled.expect(tensor_product(Operator::identity(2),
                                                 pauli_z()))) > 1e-2);
}

TEST_CASE("composing instruments matches the joint probe") {
  Rng rng(41);
  DensityState omega = rng.random_density(2);
  DensityState sigma1 = rng.random_density(2);
  DensityState sigma2 = rng.random_density(2);
  Effect B1 = random_effect(rng, 2);
  Effect B2 = random_effect(rng, 2);

  // Trivial second coupling.
  LocalFactorization seq({2, 2, 2}, {"K1", "S", "K2"}, {{"K1", "K2"}}, {});
  ScatteringMorphism cf(control_flip(), {2, 2}, {0, 1});
  ScatteringMorphism ident(Operator::identity(4), {2, 2},
                           std::vector<int>{});
  CheckReport trivial = compose_instruments(B1, sigma1, cf, B2, sigma2, ident,
                                            omega, seq, pol);
  CHECK(trivial.all_pass());
  CHECK(entry(trivial, "sequential_vs_joint") < 1e-12);

  // Timelike-ordered couplings sharing the system qubit: the factorization
  // identity holds, swapping the order does not.
  ScatteringMorphism sw(swap2(2), {2, 2}, {0, 1});
  CheckReport timelike = compose_instruments(B1, sigma1, cf, B2, sigma2, sw,
                                             omega, seq, pol);
  CHECK(timelike.all_pass());
  CHECK(entry(timelike, "sequential_vs_joint") < 1e-12);
  CHECK(has_entry(timelike, "order_swap_gap"));
  CHECK(entry(timelike, "order_swap_gap") > 1e-3);

  // Spacelike couplings on separate system patches commute.
  LocalFactorization spc({2, 2, 2, 2}, {"K1", "K1", "K2", "K2"}, {},
                         {{"K1", "K2"}});
  DensityState omega2 = rng.random_density(4);
  std::vector<int> sp_dims = {2, 2, 2};
  ScatteringMorphism t1(lift_operator(sp_dims, {0, 2}, control_flip()),
                        sp_dims, {0, 2});
  ScatteringMorphism t2(lift_operator(sp_dims, {1, 2}, swap2(2)), sp_dims,
                        {1, 2});
  CheckReport space = compose_instruments(B1, sigma1, t1, B2, sigma2, t2,
                                          omega2, spc, pol);
  CHECK(space.all_pass());
  CHECK(entry(space, "order_independence") < 1e-10);
  CHECK(entry(space, "sequential_vs_joint") < 1e-10);

  // Second coupling region in the past of the first.
  LocalFactorization bad({2, 2, 2}, {"K1", "S", "K2"}, {{"K2", "K1"}}, {});
  CHECK_THROWS_AS(compose_instruments(B1, sigma1, cf, B2, sigma2, sw, omega,
                                      bad, pol),
                  CausalOrderViolated);

  // Spacelike couplings must not share a system factor.
  LocalFactorization clash({2, 2, 2}, {"K1", "S", "K2"}, {}, {{"K1", "K2"}});
  CHECK_THROWS_AS(compose_instruments(B1, sigma1, cf, B2, sigma2, sw, omega,
                                      clash, pol),
                  CausalOrderViolated);

  // Random spacelike pairs, both orders and the joint route.
  for (int s = 0; s < 10; ++s) {
    Rng r2(500 + static_cast<uint64_t>(s));
    ScatteringMorphism u1(lift_operator(sp_dims, {0, 2}, r2.random_unitary(4)),
                          sp_dims, {0, 2});
    ScatteringMorphism u2(lift_operator(sp_dims, {1, 2}, r2.random_unitary(4)),
                          sp_dims, {1, 2});
    CheckReport rep = compose_instruments(random_effect(r2, 2),
                                          r2.random_density(2), u1,
                                          random_effect(r2, 2),
                                          r2.random_density(2), u2,
                                          r2.random_density(4), spc, pol);
    CHECK(rep.all_pass());
    CHECK(entry(rep, "sequential_vs_joint") < 1e-10);
    CHECK(entry(rep, "order_independence") < 1e-10);
  }
}

TEST_CASE("downstream expectations ignore the spacelike coupling") {
  Scenario sc = load_scenario(data_path("fv_scenario.txt"), pol);
  const ScatteringMorphism& alice = sc.morphisms.at("alice");
  const ScatteringMorphism& bob = sc.morphisms.at("bob");

  DensityState sigma1 = DensityState::pure(StateVector::basis(2, 0));
  DensityState sigma2 = DensityState::pure(StateVector::basis(2, 0));
  // System factors 1 and 2 prepared in the plus state each.
  DensityState omega =
      DensityState::pure(tensor_product(plus_state(), plus_state()));

  NonsignalingResult res =
      nonsignaling_check(alice, bob, pauli_x(), "O3", omega, sigma1, sigma2,
                         sc.fact, 0, 3, pol);
  CHECK(res.gap < 1e-12);
  // Bob's coupling genuinely moves the O3 expectation.
  CHECK(res.without_A == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(omega.expect(tensor_product(Operator::identity(2), pauli_x()))
                     .real() -
                 res.without_A) > 0.5);

  // Doing nothing is also fine.
  ScatteringMorphism idle(Operator::identity(16), sc.fact.factor_dims,
                          std::vector<int>{});
  NonsignalingResult quiet =
      nonsignaling_check(idle, bob, pauli_x(), "O3", omega, sigma1, sigma2,
                         sc.fact, 0, 3, pol);
  CHECK(quiet.gap < 1e-14);
  CHECK(quiet.with_A == doctest::Approx(quiet.without_A).epsilon(1e-14));

  // Alice reaching into O3 is rejected.
  std::vector<int> dims = sc.fact.factor_dims;
  ScatteringMorphism bad(lift_operator(dims, {2, 0}, control_flip()), dims,
                         {0, 2});
  CHECK_THROWS_AS(nonsignaling_check(bad, bob, pauli_x(), "O3", omega, sigma1,
                                     sigma2, sc.fact, 0, 3, pol),
                  CausalOrderViolated);

  // A second coupling reaching into its causal past is rejected.
  LocalFactorization past({2, 2, 2, 2}, {"O1", "O1", "O3", "O2"},
                          {{"O3", "O2"}}, {{"O1", "O2"}, {"O1", "O3"}});
  ScatteringMorphism grab(lift_operator(dims, {2, 3}, control_flip()), dims,
                          {2, 3});
  CHECK_THROWS_AS(nonsignaling_check(alice, grab, pauli_x(), "O3", omega,
                                     sigma1, sigma2, past, 0, 3, pol),
                  CausalOrderViolated);

  // Random couplings respecting the discipline.
  for (int s = 0; s < 10; ++s) {
    Rng rng(700 + static_cast<uint64_t>(s));
    ScatteringMorphism a2(lift_operator(dims, {0, 1}, rng.random_unitary(4)),
                          dims, {0, 1});
    ScatteringMorphism b2(lift_operator(dims, {2, 3}, rng.random_unitary(4)),
                          dims, {2, 3});
    NonsignalingResult r =
        nonsignaling_check(a2, b2, rng.random_hermitian(2), "O3",
                           rng.random_density(4), rng.random_density(2),
                           rng.random_density(2), sc.fact, 0, 3, pol);
    CHECK(r.gap < 1e-10);
  }
}

TEST_CASE("induced measures stay normalized and lose sharpness") {
  DensityState sigma = DensityState::pure(plus_state());

  EffectValuedMeasure trivialE({"only"}, {Effect(Operator::identity(2))});
  EffectValuedMeasure ind =
      evm_induce(trivialE, sigma, qq(control_flip()), pol);
  CHECK(max_abs_diff(ind.effect_of("only").op, Operator::identity(2)) < 1e-12);

  // Swap transports a projective measure unchanged.
  EffectValuedMeasure pvm({"up", "down"},
                          {Effect(ketbra(2, 0)), Effect(ketbra(2, 1))});
  EffectValuedMeasure through = evm_induce(pvm, sigma, qq(swap2(2)), pol);
  CHECK(max_abs_diff(through.effect_of("up").op, ketbra(2, 0)) < 1e-12);
  CHECK(max_abs_diff(through.effect_of("down").op, ketbra(2, 1)) < 1e-12);

  // The controlled flip with an unbiased probe blurs the outcome.
  EffectValuedMeasure blurred = evm_induce(pvm, sigma, qq(control_flip()), pol);
  Operator sum(2);
  for (const auto& e : blurred.effects) sum = sum + e.op;
  CHECK(max_abs_diff(sum, Operator::identity(2)) < 1e-12);
  Operator e0 = blurred.effect_of("up").op;
  Operator gap = e0 - e0 * e0;
  EigenSystem es = hermitian_eigendecomposition(gap, pol);
  CHECK(es.values.front() > 0.1);

  CHECK_THROWS_AS(EffectValuedMeasure({"a"}, {Effect(ketbra(2, 0))}),
                  ValidationError);
  CHECK_THROWS_AS(EffectValuedMeasure({"a", "a"},
                                      {Effect(ketbra(2, 0)),
                                       Effect(ketbra(2, 1))}),
                  ValidationError);
  CHECK_THROWS_AS(Effect(pauli_z() * cplx(2, 0)), ValidationError);
  CHECK_THROWS_AS(Effect(unit(2, 0, 1)), NotHermitian);
}

TEST_CASE("measured variance dominates the induced variance") {
  Rng rng(61);
  DensityState omega = rng.random_density(2);
  DensityState sigma = rng.random_density(2);
  Operator B = rng.random_hermitian(2);

  VarianceResult ident =
      variance_check(B, sigma, qq(Operator::identity(4)), omega, pol);
  double e1 = tp(sigma.matrix, B).real();
  double e2 = tp(sigma.matrix, B * B).real();
  CHECK(ident.var_measured == doctest::Approx(e2 - e1 * e1).epsilon(1e-12));
  CHECK(std::abs(ident.var_induced) < 1e-12);

  VarianceResult sw = variance_check(B, sigma, qq(swap2(2)), omega, pol);
  CHECK(sw.var_measured == doctest::Approx(sw.var_induced).epsilon(1e-11));

  for (int s = 0; s < 30; ++s) {
    Rng r2(800 + static_cast<uint64_t>(s));
    ScatteringMorphism theta(r2.random_unitary(9), {3, 3}, {0, 1});
    VarianceResult v = variance_check(r2.random_hermitian(3),
                                      r2.random_density(3), theta,
                                      r2.random_density(3), pol);
    CHECK(v.var_measured >= v.var_induced - 1e-10);
  }

  CHECK_THROWS_AS(variance_check(unit(2, 0, 1), sigma, qq(swap2(2)), omega,
                                 pol),
                  NotHermitian);
}

TEST_CASE("conjugation is a star automorphism") {
  Rng rng(71);
  Operator U = rng.random_unitary(9);
  auto theta = [&](const Operator& X) { return U.adjoint() * X * U; };
  for (int t = 0; t < 10; ++t) {
    Operator X = rng.random_hermitian(9) + cplx(0, 1) * rng.random_hermitian(9);
    Operator Y = rng.random_hermitian(9) + cplx(0, 1) * rng.random_hermitian(9);
    CHECK(max_abs_diff(theta(X * Y), theta(X) * theta(Y)) < 1e-11);
    CHECK(max_abs_diff(theta(X.adjoint()), theta(X).adjoint()) < 1e-11);
  }
}

TEST_CASE("induced observables are Lipschitz in the probe state") {
  for (int s = 0; s < 20; ++s) {
    Rng rng(900 + static_cast<uint64_t>(s));
    ScatteringMorphism theta(rng.random_unitary(9), {3, 3}, {0, 1});
    DensityState s1 = rng.random_density(3);
    DensityState s2 = rng.random_density(3);
    Operator B = rng.random_hermitian(3);
    double lhs = max_abs_diff(induced_observable(B, s1, theta, pol),
                              induced_observable(B, s2, theta, pol));
    double rhs = 9.0 * B.max_abs() * max_abs_diff(s1.matrix, s2.matrix);
    CHECK(lhs <= rhs + 1e-12);
  }
}

TEST_CASE("states separate distinct observables") {
  Rng rng(81);
  for (int t = 0; t < 20; ++t) {
    Operator A = rng.random_hermitian(3);
    Operator B = rng.random_hermitian(3);
    DensityState rho = separating_state(A, B, pol);
    CHECK(std::abs(rho.expect(A) - rho.expect(B)) > 1e-6);
  }
  Operator H = rng.random_hermitian(3);
  CHECK_THROWS_AS(separating_state(H, H, pol), ValidationError);
  CHECK_THROWS_AS(separating_state(unit(3, 0, 1), H, pol), NotHermitian);
}

TEST_CASE("joint measures marginalize through the coupling") {
  Rng rng(91);
  // Probe made of two qubits; joint outcomes are pairs.
  ScatteringMorphism theta(rng.random_unitary(8), {2, 4}, {0, 1});
  DensityState sigma = rng.random_density(4);

  std::vector<std::string> names;
  std::vector<Effect> effs;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      names.push_back(std::to_string(a) + std::to_string(b));
      effs.emplace_back(tensor_product(ketbra(2, a), ketbra(2, b)));
    }
  EffectValuedMeasure joint(names, effs);
  EffectValuedMeasure induced = evm_induce(joint, sigma, theta, pol);

  for (int a = 0; a < 2; ++a) {
    Operator marg(2);
    for (int b = 0; b < 2; ++b)
      marg = marg + induced.effect_of(std::to_string(a) + std::to_string(b)).op;
    Operator direct = induced_observable(
        tensor_product(ketbra(2, a), Operator::identity(2)), sigma, theta, pol);
    CHECK(max_abs_diff(marg, direct) < 1e-12);
  }
}

TEST_CASE("scenario files load and reject malformed input") {
  Scenario sc = load_scenario(data_path("fv_scenario.txt"), pol);
  CHECK(sc.fact.factor_dims == std::vector<int>{2, 2, 2, 2});
  CHECK(sc.fact.region_of_factor[2] == "O3");
  CHECK(sc.fact.precedes("O2", "O3"));
  CHECK(sc.fact.is_spacelike("O1", "O3"));
  CHECK(sc.morphisms.count("alice") == 1);
  CHECK(sc.morphisms.count("bob") == 1);

  // alice: factor 1 drives a flip on factor 0.
  std::vector<int> dims = {2, 2, 2, 2};
  Operator expected = lift_operator(
      dims, {1, 0},
      tensor_product(ketbra(2, 0), Operator::identity(2)) +
          tensor_product(ketbra(2, 1), pauli_x()));
  CHECK(max_abs_diff(sc.morphisms.at("alice").U, expected) < 1e-15);
  CHECK(sc.morphisms.at("bob").support == std::vector<int>{2, 3});

  auto write_and_load = [&](const std::string& body) {
    std::string path = "/tmp/qfv_scenario_case.txt";
    std::ofstream out(path);
    out << body;
    out.close();
    return load_scenario(path, pol);
  };
  CHECK_THROWS_AS(write_and_load("factors 2 2\nbogus 1\n"), ValidationError);
  CHECK_THROWS_AS(write_and_load("factors 2 3\nregion 0 A\nregion 1 A\n"
                                 "unitary s swap 0 1\n"),
                  ValidationError);
  CHECK_THROWS_AS(write_and_load("factors 2 2\nregion 0 A\n"),
                  ValidationError);
  CHECK_THROWS_AS(write_and_load("factors 2\nregion 0 A\n"
                                 "unitary m matrix 0\n1 0\n"),
                  ValidationError);
  CHECK_THROWS_AS(write_and_load("region 0 A\n"), ValidationError);

  // An explicit matrix gate round-trips.
  Scenario mat = write_and_load(
      "factors 2 2\nregion 0 A\nregion 1 B\n"
      "unitary h matrix 1\n"
      "0.7071067811865475 0 0.7071067811865475 0\n"
      "0.7071067811865475 0 -0.7071067811865475 0\n");
  Operator had(2);
  had.at(0, 0) = had.at(0, 1) = had.at(1, 0) = cplx(0.7071067811865475, 0);
  had.at(1, 1) = cplx(-0.7071067811865475, 0);
  CHECK(max_abs_diff(mat.morphisms.at("h").U,
                     lift_operator({2, 2}, {1}, had)) < 1e-15);
}
