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

#ifndef QFV_PRESHEAF_HPP_
#define QFV_PRESHEAF_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include "qfv/kslab.hpp"
#include "qfv/numkernel.hpp"
#include "qfv/qlattice.hpp"
#include "qfv/report.hpp"

// Measurement contexts as commuting operator families, their characters,
// restriction between nested contexts, and the search for an assignment
// that is consistent across a whole family of contexts at once.
//
// A context is stored as the block partition of a joint eigenbasis.  At
// finite dimension this loses nothing: the algebra generated by a commuting
// Hermitian family is already closed, so its structure is fully described
// by the minimal common eigenprojector refinement and no completion step
// is needed.  Characters then correspond one-to-one with block choices.

namespace qfv {

struct NotCommuting : Error {
  using Error::Error;
};

struct NotIncluded : Error {
  using Error::Error;
};

// Commuting family and the block partition of its joint eigenbasis.
// blocks are pairwise orthogonal projectors summing to the identity, each
// generator constant on every block.  report carries the construction
// checks; eigenvalue gaps below the merge threshold during refinement are
// recorded as "degeneracy_warning" entries and the blocks involved are
// merged, so near-ties coarsen the partition instead of splitting it on
// noise.
struct Context {
  int d = 0;
  std::vector<Projector> blocks;
  std::vector<Operator> generators;
  CheckReport report;
};

// Joint eigenbasis by sequential refinement: eigendecompose the first
// generator, then split each block by the next generator compressed to it.
// Requires every generator Hermitian and all pairs commuting within
// pol.eq_tol; the worst offending pair is named in the NotCommuting
// message.
Context generate_context(const std::vector<Operator>& generators,
                         const TolerancePolicy& pol = {});

// One block, the whole space; its single character sends a*1 to a.
Context trivial_context(int dim);

// A multiplicative evaluation on a context: every operator that is
// diagonal in the context's blocks is sent to its eigenvalue on the chosen
// block.
struct Character {
  const Context* context = nullptr;
  int chosen_block = 0;

  // Eigenvalue of a on the chosen block, i.e. tr(P a)/rank(P).  Only
  // meaningful for operators diagonal in the context's partition.
  double evaluate(const Operator& a) const;
};

// One character per block, in block order.
std::vector<Character> characters(const Context& ctx);

// True when every block of super sits inside some block of sub, i.e. sub's
// partition is a coarsening of super's and sub is a subfamily as an
// algebra.
bool context_includes(const Context& sub, const Context& super,
                      const TolerancePolicy& pol = {});

// The sub-context character whose block contains chi's block.  Throws
// NotIncluded when sub does not coarsen chi's context.
Character restrict_character(const Character& chi, const Context& sub,
                             const TolerancePolicy& pol = {});

// Explicit family of contexts with the inclusion pairs (sub, super) where
// sub's blocks are unions of super's blocks.  Only strict pairs between
// distinct entries are stored; reflexivity is implicit.
struct ContextPoset {
  std::vector<Context> contexts;
  std::vector<std::pair<int, int>> inclusion;
};

// Computes every inclusion pair among the given contexts.  Duplicate
// partitions are kept as given; both directions are recorded for them.
ContextPoset build_poset(std::vector<Context> contexts,
                         const TolerancePolicy& pol = {});

// A block choice per context, or the exhaustion of all choices.  explored
// counts assignments tried (one per candidate block at each context).
struct SectionResult {
  bool found = false;
  std::vector<int> chosen;
  std::uint64_t explored = 0;
};

// Backtracking over contexts in declared order, one character per context,
// every inclusion pair restriction-consistent.  Returns the first section
// in that order, or none after exhausting the tree.  Deterministic.
SectionResult global_section_search(const ContextPoset& poset);

// Context family induced by a ray structure: one context per size-d
// clique, one per orthogonal pair outside every clique (the pair plus its
// completion), and one two-block context per ray.  Identical partitions
// are merged, so in dimension 2 a ray and its partner share one context.
// block_ray identifies blocks that equal a catalog ray's projector.
struct RayPoset {
  ContextPoset poset;
  std::vector<std::string> ray_ids;            // ray index -> id
  std::vector<int> ray_context;                // ray index -> context index
  std::vector<int> ray_block;                  // ray index -> its block there
  std::vector<std::vector<int>> block_ray;     // context -> block -> ray or -1
};

RayPoset ray_poset(const GreechieStructure& g, const TolerancePolicy& pol = {});

// Evenly spaced directions over a half-turn, ids "a000", "a001", ...; step
// pi/(2n), so each direction's orthogonal partner is n steps away.  Feed
// to derive_structure with d = 2.
std::vector<Ray> dim2_grid_rays(int n);

// Reads the first 2n entries of a dim-2 measure table as a coloring of the
// matching grid rays.
Coloring measure_to_coloring(const Dim2Measure& m, const GreechieStructure& g);

// Section from a coloring: per context the unique block carrying value 1,
// where a block equal to a catalog ray takes the ray's value and the
// remaining block takes the rest.  found is false when the values do not
// sum to one somewhere.
SectionResult coloring_to_section(const Coloring& c, const RayPoset& rp);

// Coloring from a section: a ray is 1 exactly when its own context chose
// its block.
Coloring section_to_coloring(const SectionResult& s, const RayPoset& rp);

// Coloring -> section -> coloring: builds the section, validates
// restriction consistency on every inclusion pair, extracts the coloring
// back and compares.  The round trip is an identity check, exact.
CheckReport valuation_section_roundtrip(const Coloring& c, const RayPoset& rp);

// Character calculus on the context generated by {a, b} for commuting a,
// b: spectrum membership, lambda(a^2) = lambda(a)^2, a cubic polynomial
// pushed through, and lambda(ab) = lambda(a)lambda(b), each within caltol.
CheckReport character_calculus_report(const Operator& a, const Operator& b,
                                      double caltol = 1e-10,
                                      const TolerancePolicy& pol = {});

}  // namespace qfv

#endif  // QFV_PRESHEAF_HPP_
