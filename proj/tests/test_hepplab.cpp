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
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "qfv/hepplab.hpp"

using namespace qfv;

namespace {

constexpr double kPi = std::numbers::pi;

BlochVector random_bloch(Rng& rng) {
  double x = rng.normal(), y = rng.normal(), z = rng.normal();
  double n = std::sqrt(x * x + y * y + z * z);
  return BlochVector(x / n, y / n, z / n);
}

Operator sigma_dot(const BlochVector& e) {
  return pauli_x() * cplx(e.e[0], 0) + pauli_y() * cplx(e.e[1], 0) +
         pauli_z() * cplx(e.e[2], 0);
}

// Reduced system matrix of a pure state on system x 2^N chain, straight from
// the amplitudes.
Operator reduced_system(const StateVector& psi, int N) {
  int R = 1 << N;
  Operator rho(2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      cplx sum = 0;
      for (int r = 0; r < R; ++r)
        sum += psi.amps[i * R + r] * std::conj(psi.amps[j * R + r]);
      rho.at(i, j) = sum;
    }
  return rho;
}

Operator chain_observable(int sites) {
  Operator Z = pauli_x();
  for (int n = 0; n < sites; ++n) Z = tensor_product(Z, pauli_y());
  return Z;
}

double operator_norm(const Operator& H) {
  EigenSystem es = hermitian_eigendecomposition(H);
  return std::max(std::abs(es.values.front()), std::abs(es.values.back()));
}

ChainState flip_chain(int N, int t) {
  return ChainState(cplx(0.8, 0), cplx(0, 0.6), N, kPi, t);
}

}  // namespace

TEST_CASE("bloch kets obey the overlap law") {
  BlochVector zp(0, 0, 1), zm(0, 0, -1), xp(1, 0, 0);
  CHECK(max_abs_diff(Operator::outer(bloch_ket(zp), bloch_ket(zp)),
                     Operator::outer(StateVector::basis(2, 0),
                                     StateVector::basis(2, 0))) < 1e-15);
  CHECK(std::abs(bloch_ket(zm).amps[1] - cplx(1, 0)) < 1e-15);
  CHECK(std::abs(inner(bloch_ket(zp), bloch_ket(zp))) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(inner(bloch_ket(zp), bloch_ket(zm))) < 1e-15);
  // 90 degrees apart: half overlap, matching the explicit spinors.
  double o2 = std::norm(inner(bloch_ket(zp), bloch_ket(xp)));
  CHECK(o2 == doctest::Approx(0.5).epsilon(1e-13));
  cplx direct = std::conj(cplx(1, 0)) * (cplx(1, 0) / std::sqrt(2.0));
  CHECK(std::norm(direct) == doctest::Approx(0.5).epsilon(1e-14));

  Rng rng(11);
  for (int c = 0; c < 50; ++c) {
    BlochVector a = random_bloch(rng), b = random_bloch(rng);
    StateVector ka = bloch_ket(a), kb = bloch_ket(b);
    CHECK(std::abs(ka.norm() - 1) < 1e-13);
    CHECK(max_abs_diff(Operator::outer(sigma_dot(a).apply(ka), ka),
                       Operator::outer(ka, ka)) < 1e-12);
    CHECK(std::norm(inner(ka, kb)) ==
          doctest::Approx((1 + a.dot(b)) / 2).epsilon(1e-12));
  }

  CHECK_THROWS_AS(BlochVector(1, 1, 0), ValidationError);
}

TEST_CASE("product overlaps factorize site by site") {
  Rng rng(13);
  std::vector<BlochVector> same;
  for (int n = 0; n < 6; ++n) same.push_back(random_bloch(rng));
  CHECK(product_overlap(same, same) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<BlochVector> flip = same;
  flip[3] = BlochVector(-same[3].e[0], -same[3].e[1], -same[3].e[2]);
  CHECK(product_overlap(same, flip) < 1e-14);

  std::vector<BlochVector> zs(8, BlochVector(0, 0, 1));
  std::vector<BlochVector> xs(8, BlochVector(1, 0, 0));
  CHECK(product_overlap(zs, xs) ==
        doctest::Approx(std::pow(0.5, 8)).epsilon(1e-12));

  // Brute tensor-product oracle up to ten sites.
  for (int N = 1; N <= 10; ++N) {
    std::vector<BlochVector> e1, e2;
    e1.push_back(random_bloch(rng));
    e2.push_back(random_bloch(rng));
    StateVector v1 = bloch_ket(e1.back());
    StateVector v2 = bloch_ket(e2.back());
    for (int n = 1; n < N; ++n) {
      e1.push_back(random_bloch(rng));
      e2.push_back(random_bloch(rng));
      v1 = tensor_product(v1, bloch_ket(e1.back()));
      v2 = tensor_product(v2, bloch_ket(e2.back()));
    }
    CHECK(std::abs(product_overlap(e1, e2) - std::norm(inner(v1, v2))) <
          1e-12);
  }

  // Fixed per-site misalignment decays geometrically.
  double alpha = 0.7;
  BlochVector tilted(std::sin(alpha), 0, std::cos(alpha));
  double ratio = (1 + std::cos(alpha)) / 2;
  double prev = 1;
  for (int N = 1; N <= 12; ++N) {
    std::vector<BlochVector> up(N, BlochVector(0, 0, 1));
    std::vector<BlochVector> tilt(N, tilted);
    double val = product_overlap(up, tilt);
    CHECK(val < prev);
    CHECK(val == doctest::Approx(std::pow(ratio, N)).epsilon(1e-12));
    prev = val;
  }

  CHECK_THROWS_AS(product_overlap(zs, same), LengthMismatch);
}

TEST_CASE("chain evolution rotates one site per step") {
  ChainState s0(cplx(std::sqrt(0.5), 0), cplx(0, -std::sqrt(0.5)), 3, kPi);
  CHECK(s0.t == 0);
  ChainState same = evolve_chain(s0, 0);
  CHECK(same.t == 0);
  CHECK(max_abs_diff(Operator::outer(full_state(same), full_state(same)),
                     Operator::outer(full_state(s0), full_state(s0))) <
        1e-15);

  // Full flip: after one step the down branch has site 1 flipped (with the
  // rotation phase) and the rest untouched.
  ChainState s1 = evolve_chain(s0, 1);
  StateVector site1 = minus_site(s1, 1);
  CHECK(std::abs(site1.amps[0]) == 0.0);
  CHECK(std::abs(site1.amps[1] - cplx(0, -1)) < 1e-15);
  CHECK(std::abs(minus_site(s1, 2).amps[0] - cplx(1, 0)) < 1e-15);

  // Quarter flip for three steps against a hand-built tensor state.
  ChainState q(cplx(0.6, 0), cplx(0.8, 0), 3, kPi / 2, 3);
  StateVector rot(2);
  rot.amps[0] = cplx(std::cos(kPi / 4), 0);
  rot.amps[1] = cplx(0, -std::sin(kPi / 4));
  StateVector expect = tensor_product(StateVector::basis(2, 0),
                                      StateVector::basis(2, 0));
  expect = tensor_product(expect, StateVector::basis(2, 0));
  expect = tensor_product(expect, StateVector::basis(2, 0)) * cplx(0.6, 0);
  StateVector down = tensor_product(StateVector::basis(2, 1), rot);
  down = tensor_product(down, rot);
  down = tensor_product(down, rot);
  StateVector full = expect + down * cplx(0.8, 0);
  CHECK(max_abs_diff(Operator::outer(full_state(q), full_state(q)),
                     Operator::outer(full, full)) < 1e-14);
  CHECK(std::abs(full_state(q).norm() - 1) < 1e-13);

  // Apparatus branches overlap as cos(pi/4)^3.
  cplx app = 1;
  for (int k = 1; k <= 3; ++k)
    app *= inner(StateVector::basis(2, 0), minus_site(q, k));
  CHECK(std::abs(app - cplx(std::pow(std::cos(kPi / 4), 3), 0)) < 1e-13);

  CHECK(evolve_chain(evolve_chain(s0, 1), 2).t == 3);
  CHECK_THROWS_AS(evolve_chain(s0, 4), ChainExhausted);
  CHECK_THROWS_AS(evolve_chain(s1, 3), ChainExhausted);
  CHECK_THROWS_AS(evolve_chain(s0, -1), ValidationError);
  CHECK_THROWS_AS(ChainState(cplx(1, 0), cplx(1, 0), 3, kPi), ValidationError);
  CHECK_THROWS_AS(ChainState(cplx(1, 0), cplx(0, 0), 3, 0.0), ValidationError);
  CHECK_THROWS_AS(ChainState(cplx(1, 0), cplx(0, 0), 3, 4.0), ValidationError);
  CHECK_THROWS_AS(ChainState(cplx(1, 0), cplx(0, 0), 3, kPi, 5),
                  ValidationError);
}

TEST_CASE("reduced coherence follows the closed form") {
  ChainState fresh(cplx(0.6, 0), cplx(0, 0.8), 8, 1.1);
  CHECK(reduced_coherence(fresh) == doctest::Approx(0.48).epsilon(1e-13));

  CHECK(reduced_coherence(flip_chain(4, 1)) == 0.0);
  CHECK(reduced_coherence(flip_chain(4, 4)) == 0.0);

  ChainState quarter(cplx(0.6, 0), cplx(0, 0.8), 6, kPi / 2, 4);
  CHECK(reduced_coherence(quarter) ==
        doctest::Approx(0.48 / 4).epsilon(1e-12));

  // Partial-trace route, straight from the state amplitudes.
  Rng rng(17);
  for (int N = 1; N <= 12; ++N) {
    double a = rng.uniform01();
    cplx cp = cplx(std::sqrt(a), 0);
    cplx cm = std::sqrt(1 - a) * std::exp(cplx(0, rng.uniform01() * 6.28));
    double theta = 0.2 + 2.9 * rng.uniform01();
    int t = static_cast<int>(rng.uniform01() * (N + 1));
    if (t > N) t = N;
    ChainState s(cp, cm, N, theta, t);
    Operator rho = reduced_system(full_state(s), N);
    CHECK(std::abs(std::abs(rho.at(0, 1)) - reduced_coherence(s)) < 1e-12);
  }

  // Same numbers through the library partial trace on small chains.
  for (int N = 1; N <= 6; ++N) {
    ChainState s(cplx(0.8, 0), cplx(0.6, 0), N, 2.0, N);
    StateVector psi = full_state(s);
    DensityState rho = DensityState::pure(psi);
    Operator sys = partial_trace(rho.matrix, {2, 1 << N}, {1});
    CHECK(std::abs(std::abs(sys.at(0, 1)) - reduced_coherence(s)) < 1e-12);
  }
}

TEST_CASE("local cross terms vanish beyond the interaction front") {
  CHECK(std::abs(local_cross_term(Operator::identity(2), flip_chain(4, 1))) ==
        0.0);

  // Support on two sites, front at five: sites 3..5 are orthogonal across
  // the branches.
  Rng rng(19);
  Operator A2 = rng.random_hermitian(8);
  CHECK(std::abs(local_cross_term(A2, flip_chain(6, 5))) == 0.0);

  // Front still inside the support: generally nonzero.
  Operator probe = tensor_product(tensor_product(pauli_x(), pauli_x()),
                                  Operator::identity(2));
  cplx inside = local_cross_term(probe, flip_chain(6, 1));
  CHECK(std::abs(inside) > 0.9);

  for (int c = 0; c < 100; ++c) {
    int M = static_cast<int>(rng.uniform01() * 4);
    if (M > 3) M = 3;
    int N = 8;
    int t = M + 1 + static_cast<int>(rng.uniform01() * (N - M - 1));
    if (t > N) t = N;
    Operator A = rng.random_hermitian(1 << (M + 1));
    CHECK(std::abs(local_cross_term(A, flip_chain(N, t))) <= 1e-14);
  }

  // Full-contraction oracle at a generic angle.
  for (int c = 0; c < 10; ++c) {
    int N = 5, M = 2;
    ChainState s(cplx(0.6, 0), cplx(0, 0.8), N, 1.3, 4);
    Operator A = rng.random_hermitian(1 << (M + 1));
    Operator lifted = tensor_product(A, Operator::identity(1 << (N - M)));
    auto [bp, bm] = branch_states(s);
    CHECK(std::abs(local_cross_term(A, s) - inner(bp, lifted.apply(bm))) <
          1e-13);
  }

  CHECK_THROWS_AS(local_cross_term(Operator::identity(64), flip_chain(4, 1)),
                  SupportTooLarge);
  CHECK_THROWS_AS(local_cross_term(Operator::identity(6), flip_chain(4, 1)),
                  DimensionMismatch);
}

TEST_CASE("the witness magnitude outlives the coherence") {
  ChainState one = flip_chain(10, 1);
  // Two-site explicit route.
  ChainState tiny = flip_chain(1, 1);
  auto [bp, bm] = branch_states(tiny);
  cplx direct = std::conj(tiny.c_plus) * tiny.c_minus *
                inner(bp, chain_observable(1).apply(bm));
  CHECK(std::abs(bell_witness(tiny) - direct) < 1e-14);
  CHECK(std::abs(bell_witness(tiny)) == doctest::Approx(0.48).epsilon(1e-13));

  double mag1 = std::abs(bell_witness(one));
  for (int t = 2; t <= 10; ++t) {
    ChainState s = flip_chain(10, t);
    CHECK(std::abs(std::abs(bell_witness(s)) - mag1) <= 1e-12);
    CHECK(reduced_coherence(s) == 0.0);
  }

  // Truncations to fewer sites than the front lose the cross term entirely,
  // within the distance the truncation moved the observable.
  ChainState five = flip_chain(6, 5);
  Operator Z5 = chain_observable(5);
  for (int m = 1; m < 5; ++m) {
    Operator AL = chain_observable(m);
    cplx cross = local_cross_term(AL, five);
    Operator ALext = tensor_product(AL, Operator::identity(1 << (5 - m)));
    double dist = operator_norm(Z5 - ALext);
    CHECK(std::abs(cross) <= dist + 1e-14);
    CHECK(std::abs(cross) <= 1e-14);
    CHECK(dist == doctest::Approx(2.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(bell_witness(ChainState(cplx(0.8, 0), cplx(0, 0.6), 4,
                                          kPi / 2, 2)),
                  PreconditionViolated);
  CHECK_THROWS_AS(bell_witness(flip_chain(4, 0)), PreconditionViolated);
}

TEST_CASE("macrostates are compared through the listed observables") {
  Rng rng(23);
  DensityState W = rng.random_density(4);
  CHECK(macrostate_equivalent(W, W, {rng.random_hermitian(4)}, 1e-12));

  // Superposition against the matched mixture: equivalent for everything
  // diagonal in the pointer basis, split by a coherence probe.
  cplx cp(0.8, 0), cm(0.6, 0);
  StateVector sup(2);
  sup.amps[0] = cp;
  sup.amps[1] = cm;
  DensityState pure = DensityState::pure(sup);
  Operator mixed(2);
  mixed.at(0, 0) = std::norm(cp);
  mixed.at(1, 1) = std::norm(cm);
  DensityState mix(mixed);

  std::vector<Operator> diagonal;
  for (int c = 0; c < 10; ++c) {
    Operator D(2);
    D.at(0, 0) = cplx(rng.normal(), 0);
    D.at(1, 1) = cplx(rng.normal(), 0);
    diagonal.push_back(D);
  }
  CHECK(macrostate_equivalent(pure, mix, diagonal, 1e-12));

  std::vector<Operator> with_probe = diagonal;
  with_probe.push_back(pauli_x());
  CHECK(!macrostate_equivalent(pure, mix, with_probe, 1e-12));
  double gap = std::abs(pure.expect(pauli_x()) - mix.expect(pauli_x()));
  CHECK(gap == doctest::Approx(2 * 0.8 * 0.6).epsilon(1e-13));

  CHECK_THROWS_AS(macrostate_equivalent(pure, W, {pauli_x()}, 1e-9),
                  DimensionMismatch);
  CHECK_THROWS_AS(macrostate_equivalent(pure, mix, {rng.random_hermitian(4)},
                                        1e-9),
                  DimensionMismatch);
}
