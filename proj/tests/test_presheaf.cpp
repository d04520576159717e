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
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "qfv/presheaf.hpp"

using namespace qfv;

namespace {

std::string data_path(const std::string& name) {
#ifdef QFV_DATA_DIR
  return std::string(QFV_DATA_DIR "/") + name;
#else
  const char* env = std::getenv("QFV_DATA_DIR");
  return std::string(env ? env : "data") + "/" + name;
#endif
}

Operator diag3(double a, double b, double c) {
  Operator m(3);
  m.at(0, 0) = a;
  m.at(1, 1) = b;
  m.at(2, 2) = c;
  return m;
}

Ray make_ray(const std::string& id, std::vector<double> coords) {
  Ray r;
  r.id = id;
  double n2 = 0.0;
  for (double x : coords) n2 += x * x;
  for (double& x : coords) x /= std::sqrt(n2);
  r.coords = std::move(coords);
  return r;
}

bool has_warn(const CheckReport& rep, const std::string& name) {
  for (const auto& e : rep.entries)
    if (e.name == name && e.status == "warn") return true;
  return false;
}

// Two triads sharing one ray.
std::vector<Ray> overlap_rays() {
  const double s = 1.0 / std::sqrt(2.0);
  return {make_ray("e0", {1, 0, 0}),  make_ray("e1", {0, 1, 0}),
          make_ray("e2", {0, 0, 1}),  make_ray("f1", {0, s, s}),
          make_ray("f2", {0, s, -s})};
}

}  // namespace

TEST_CASE("joint eigenbasis from commuting generators") {
  Context triv = trivial_context(3);
  REQUIRE(triv.blocks.size() == 1);
  CHECK(triv.blocks[0].rank() == 3);
  CHECK(triv.report.all_pass());
  std::vector<Character> tch = characters(triv);
  REQUIRE(tch.size() == 1);
  CHECK(tch[0].evaluate(Operator::identity(3) * cplx(2.5, 0.0)) ==
        doctest::Approx(2.5).epsilon(1e-12));

  Context zc = generate_context({pauli_z()});
  REQUIRE(zc.blocks.size() == 2);
  CHECK(zc.blocks[0].rank() == 1);
  CHECK(zc.blocks[1].rank() == 1);
  CHECK(zc.report.all_pass());
  std::vector<Character> zch = characters(zc);
  REQUIRE(zch.size() == 2);
  CHECK(zch[0].evaluate(pauli_z()) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(zch[1].evaluate(pauli_z()) == doctest::Approx(1.0).epsilon(1e-12));

  Operator za = tensor_product(pauli_z(), Operator::identity(2));
  Operator zb = tensor_product(Operator::identity(2), pauli_z());
  Context tc = generate_context({za, zb});
  REQUIRE(tc.blocks.size() == 4);
  std::set<std::pair<int, int>> pairs;
  for (const Character& chi : characters(tc)) {
    CHECK(tc.blocks[chi.chosen_block].rank() == 1);
    pairs.insert({static_cast<int>(std::lround(chi.evaluate(za))),
                  static_cast<int>(std::lround(chi.evaluate(zb)))});
  }
  std::set<std::pair<int, int>> want = {{-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
  CHECK(pairs == want);

  Context dg = generate_context({diag3(1, 1, 2)});
  REQUIRE(dg.blocks.size() == 2);
  CHECK(dg.blocks[0].rank() == 2);
  CHECK(dg.blocks[1].rank() == 1);
  std::vector<Character> dch = characters(dg);
  CHECK(dch[0].evaluate(diag3(1, 1, 2)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dch[1].evaluate(diag3(1, 1, 2)) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("generator validation") {
  CHECK_THROWS_AS(generate_context({}), PreconditionViolated);
  CHECK_THROWS_AS(generate_context({pauli_z(), Operator::identity(3)}),
                  DimensionMismatch);

  Operator skew(2);
  skew.at(0, 1) = 1.0;
  CHECK_THROWS_AS(generate_context({skew}), NotHermitian);

  try {
    generate_context({pauli_x(), pauli_z()});
    FAIL("expected NotCommuting");
  } catch (const NotCommuting& e) {
    std::string msg = e.what();
    CHECK(msg.find("generators 0 and 1") != std::string::npos);
    CHECK(msg.find("commutator norm") != std::string::npos);
  }
}

TEST_CASE("near-degenerate eigenvalues merge into one block") {
  Context near = generate_context({diag3(0.0, 5e-8, 1.0)});
  CHECK(near.blocks.size() == 2);
  CHECK(has_warn(near.report, "degeneracy_warning"));

  Context tie = generate_context({diag3(0.0, 5e-13, 1.0)});
  CHECK(tie.blocks.size() == 2);
  CHECK(!has_warn(tie.report, "degeneracy_warning"));

  Context split = generate_context({diag3(0.0, 1e-3, 1.0)});
  CHECK(split.blocks.size() == 3);
  CHECK(!has_warn(split.report, "degeneracy_warning"));
}

TEST_CASE("character evaluations sit in the spectrum") {
  Rng rng(71001);
  for (int t = 0; t < 20; ++t) {
    const int d = 2 + t % 3;
    Operator a = rng.random_hermitian(d);
    Context ctx = generate_context({a});
    std::vector<double> spec = hermitian_eigendecomposition(a).values;
    int rank_sum = 0;
    for (const Character& chi : characters(ctx)) {
      rank_sum += ctx.blocks[chi.chosen_block].rank();
      const double la = chi.evaluate(a);
      double dist = std::abs(la - spec[0]);
      for (double v : spec) dist = std::min(dist, std::abs(la - v));
      CHECK(dist <= 1e-9);
    }
    CHECK(rank_sum == d);
    CHECK(ctx.report.all_pass());
  }
}

TEST_CASE("restriction coarsens blocks and preserves evaluations") {
  Operator za = tensor_product(pauli_z(), Operator::identity(2));
  Operator zb = tensor_product(Operator::identity(2), pauli_z());
  Context super = generate_context({za, zb});
  Context sub = generate_context({za});
  Context other = generate_context({zb});
  Context triv = trivial_context(4);

  CHECK(context_includes(sub, super));
  CHECK(!context_includes(super, sub));
  CHECK(context_includes(triv, super));
  CHECK(context_includes(triv, sub));
  CHECK(!context_includes(sub, other));

  for (const Character& chi : characters(super)) {
    Character down = restrict_character(chi, sub);
    CHECK(leq(super.blocks[chi.chosen_block], sub.blocks[down.chosen_block]));
    CHECK(down.evaluate(za) == doctest::Approx(chi.evaluate(za)).epsilon(1e-12));

    Character bottom = restrict_character(chi, triv);
    CHECK(bottom.chosen_block == 0);
  }

  Character on_sub = characters(sub)[0];
  CHECK_THROWS_AS(restrict_character(on_sub, other), NotIncluded);
}

TEST_CASE("restriction through a chain equals the direct restriction") {
  Operator za = tensor_product(pauli_z(), Operator::identity(2));
  Operator zb = tensor_product(Operator::identity(2), pauli_z());
  Context super = generate_context({za, zb});
  Context mid = generate_context({za});
  Context triv = trivial_context(4);

  for (const Character& chi : characters(super)) {
    Character via = restrict_character(restrict_character(chi, mid), triv);
    Character direct = restrict_character(chi, triv);
    CHECK(via.chosen_block == direct.chosen_block);
    Character m = restrict_character(chi, mid);
    CHECK(m.evaluate(za) == doctest::Approx(chi.evaluate(za)).epsilon(1e-12));
  }
}

TEST_CASE("character calculus on random commuting pairs") {
  Rng rng(43007);
  for (int t = 0; t < 100; ++t) {
    const int d = 2 + t % 3;
    Operator u = rng.random_unitary(d);
    Operator da(d), db(d);
    for (int i = 0; i < d; ++i) {
      da.at(i, i) = 4.0 * rng.uniform01() - 2.0;
      db.at(i, i) = 4.0 * rng.uniform01() - 2.0;
    }
    Operator a = u * da * u.adjoint();
    Operator b = u * db * u.adjoint();
    a = (a + a.adjoint()) * cplx(0.5, 0.0);
    b = (b + b.adjoint()) * cplx(0.5, 0.0);
    CheckReport rep = character_calculus_report(a, b);
    CHECK(rep.all_pass());
  }
}

TEST_CASE("poset inclusion is a partial order") {
  Operator za = tensor_product(pauli_z(), Operator::identity(2));
  Operator zb = tensor_product(Operator::identity(2), pauli_z());
  std::vector<Context> family;
  family.push_back(trivial_context(4));
  family.push_back(generate_context({za}));
  family.push_back(generate_context({zb}));
  family.push_back(generate_context({za, zb}));
  ContextPoset poset = build_poset(family);

  for (const Context& c : poset.contexts) CHECK(context_includes(c, c));

  std::set<std::pair<int, int>> incl(poset.inclusion.begin(),
                                     poset.inclusion.end());
  for (const auto& [i, j] : incl) CHECK(!incl.count({j, i}));
  for (const auto& [i, j] : incl)
    for (const auto& [k, l] : incl)
      if (j == k) CHECK(incl.count({i, l}));

  std::set<std::pair<int, int>> want = {{0, 1}, {0, 2}, {0, 3}, {1, 3}, {2, 3}};
  CHECK(incl == want);
}

TEST_CASE("section search on small posets") {
  ContextPoset lone = build_poset({generate_context({pauli_z()})});
  SectionResult s1 = global_section_search(lone);
  REQUIRE(s1.found);
  CHECK(s1.chosen == std::vector<int>{0});
  CHECK(s1.explored == 1);

  std::vector<Context> pairless;
  pairless.push_back(generate_context({pauli_z()}));
  pairless.push_back(generate_context({pauli_x()}));
  SectionResult s2 = global_section_search(build_poset(std::move(pairless)));
  REQUIRE(s2.found);
  CHECK(s2.chosen == std::vector<int>({0, 0}));

  std::vector<Context> chained;
  chained.push_back(trivial_context(2));
  chained.push_back(generate_context({pauli_z()}));
  SectionResult s3 = global_section_search(build_poset(std::move(chained)));
  REQUIRE(s3.found);
  CHECK(s3.chosen == std::vector<int>({0, 0}));
}

TEST_CASE("single triad family") {
  std::vector<Ray> rays = {make_ray("e0", {1, 0, 0}), make_ray("e1", {0, 1, 0}),
                           make_ray("e2", {0, 0, 1})};
  GreechieStructure g = derive_structure(rays, 3);
  REQUIRE(g.contexts.size() == 1);
  RayPoset rp = ray_poset(g);
  CHECK(rp.poset.contexts.size() == 4);

  for (int r = 0; r < 3; ++r) {
    REQUIRE(rp.ray_context[r] >= 0);
    REQUIRE(rp.ray_block[r] >= 0);
    const Context& ctx = rp.poset.contexts[rp.ray_context[r]];
    CHECK(ctx.blocks[rp.ray_block[r]].rank() == 1);
    CHECK(rp.block_ray[rp.ray_context[r]][rp.ray_block[r]] == r);
  }

  SectionResult sec = global_section_search(rp.poset);
  SearchResult col = color_search(g);
  REQUIRE(sec.found);
  REQUIRE(col.found);

  Coloring from_sec = section_to_coloring(sec, rp);
  int ones = 0;
  for (const auto& [id, v] : from_sec.value_of) ones += v;
  CHECK(ones == 1);
  CHECK(valuation_section_roundtrip(from_sec, rp).all_pass());
  CHECK(valuation_section_roundtrip(col.coloring, rp).all_pass());
}

TEST_CASE("overlapping triads stay consistent through the shared ray") {
  GreechieStructure g = derive_structure(overlap_rays(), 3);
  REQUIRE(g.contexts.size() == 2);
  RayPoset rp = ray_poset(g);
  CHECK(rp.poset.contexts.size() == 7);

  SectionResult sec = global_section_search(rp.poset);
  SearchResult col = color_search(g);
  REQUIRE(sec.found);
  REQUIRE(col.found);

  Coloring from_sec = section_to_coloring(sec, rp);
  SectionResult rebuilt = coloring_to_section(from_sec, rp);
  REQUIRE(rebuilt.found);
  CHECK(rebuilt.chosen == sec.chosen);
  CHECK(valuation_section_roundtrip(col.coloring, rp).all_pass());
}

TEST_CASE("defect family keeps its sections") {
  std::vector<Ray> rays = load_rays(data_path("bug.rays"));
  GreechieStructure g = derive_structure(rays, 3);
  REQUIRE(g.rays.size() == 8);
  REQUIRE(g.contexts.size() == 2);
  RayPoset rp = ray_poset(g);
  CHECK(rp.poset.contexts.size() == 15);
  CHECK(rp.poset.inclusion.size() == 16);

  SectionResult sec = global_section_search(rp.poset);
  SearchResult col = color_search(g);
  CHECK(sec.found == col.found);
  REQUIRE(sec.found);
  CHECK(valuation_section_roundtrip(col.coloring, rp).all_pass());

  Coloring from_sec = section_to_coloring(sec, rp);
  CHECK(valuation_section_roundtrip(from_sec, rp).all_pass());
  CHECK(sec.explored == 15);
}

TEST_CASE("coloring defects are rejected") {
  GreechieStructure g = derive_structure(overlap_rays(), 3);
  RayPoset rp = ray_poset(g);

  Coloring zeros;
  for (const auto& r : g.rays) zeros.value_of[r.id] = 0;
  SectionResult s0 = coloring_to_section(zeros, rp);
  CHECK(!s0.found);
  CheckReport rep = valuation_section_roundtrip(zeros, rp);
  CHECK(!rep.all_pass());

  Coloring partial;
  partial.value_of["e0"] = 1;
  CHECK(!coloring_to_section(partial, rp).found);

  Coloring doubled = zeros;
  doubled.value_of["e1"] = 1;
  doubled.value_of["e2"] = 1;
  CHECK(!coloring_to_section(doubled, rp).found);
}

TEST_CASE("dim-2 grid admits a section") {
  const int n = 90;
  std::vector<Ray> rays = dim2_grid_rays(n);
  REQUIRE(rays.size() == 180);
  GreechieStructure g = derive_structure(rays, 2);
  REQUIRE(g.contexts.size() == 90);
  CHECK(g.ortho_edges.size() == 90);

  RayPoset rp = ray_poset(g);
  CHECK(rp.poset.contexts.size() == 90);
  CHECK(rp.poset.inclusion.empty());

  SectionResult sec = global_section_search(rp.poset);
  SearchResult col = color_search(g);
  CHECK(sec.found == col.found);
  REQUIRE(sec.found);
  CHECK(sec.explored == 90);

  std::vector<int> table(n);
  for (int k = 0; k < n; ++k) table[k] = (k % 3 == 0) ? 1 : 0;
  Dim2Measure m = dim2_two_valued_measure(table);
  REQUIRE(m.report.all_pass());
  Coloring mc = measure_to_coloring(m, g);
  CHECK(valuation_section_roundtrip(mc, rp).all_pass());
}

TEST_CASE("the one-seventeen family has no section") {
  std::vector<Ray> rays = load_rays(data_path("ks117.rays"));
  GreechieStructure g = derive_structure(rays, 3);
  REQUIRE(g.rays.size() == 117);
  REQUIRE(g.contexts.size() == 43);

  RayPoset rp = ray_poset(g);
  CHECK(rp.poset.contexts.size() == 235);
  CHECK(rp.poset.inclusion.size() == 279);

  SectionResult sec = global_section_search(rp.poset);
  SearchResult col = color_search(g);
  CHECK(!sec.found);
  CHECK(!col.found);
  CHECK(sec.found == col.found);
  CHECK(col.explored == 132);
  CHECK(sec.explored == 274);

  SectionResult again = global_section_search(rp.poset);
  CHECK(again.found == sec.found);
  CHECK(again.explored == sec.explored);
}

TEST_CASE("section and coloring verdicts agree across families") {
  struct Family {
    std::string name;
    GreechieStructure g;
    bool expect;
  };
  std::vector<Family> families;
  families.push_back({"triad",
                      derive_structure({make_ray("e0", {1, 0, 0}),
                                        make_ray("e1", {0, 1, 0}),
                                        make_ray("e2", {0, 0, 1})},
                                       3),
                      true});
  families.push_back({"overlap", derive_structure(overlap_rays(), 3), true});
  families.push_back(
      {"bug", derive_structure(load_rays(data_path("bug.rays")), 3), true});
  families.push_back({"grid", derive_structure(dim2_grid_rays(12), 2), true});
  families.push_back(
      {"full", derive_structure(load_rays(data_path("ks117.rays")), 3), false});

  for (const Family& f : families) {
    INFO("family ", f.name);
    RayPoset rp = ray_poset(f.g);
    SectionResult sec = global_section_search(rp.poset);
    SearchResult col = color_search(f.g);
    CHECK(sec.found == f.expect);
    CHECK(col.found == f.expect);
    if (sec.found)
      CHECK(valuation_section_roundtrip(section_to_coloring(sec, rp), rp)
                .all_pass());
  }
}
