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

#ifndef QFV_KSLAB_HPP_
#define QFV_KSLAB_HPP_

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qfv/numkernel.hpp"
#include "qfv/qlattice.hpp"
#include "qfv/report.hpp"

namespace qfv {

struct SyntaxError : Error {
  SyntaxError(const std::string& what, int position);
  int pos;
};

struct DomainError : Error {
  using Error::Error;
};

struct InconsistentPins : Error {
  using Error::Error;
};

// A closed-form real number built from integer and decimal literals with
// + - * / , parentheses, and nested square roots.  Parsing evaluates the
// expression once at 50-digit working precision; `value` is the double
// rounding of that and `digits` a 40-significant-digit decimal rendering.
// `printed` is a canonical reprint that parses back to the same value.
struct RadicalExpr {
  std::string text;
  std::string printed;
  double value = 0.0;
  std::string digits;
};

// Throws SyntaxError (with a 0-based offset into `text`) on malformed
// input and DomainError when a square root argument evaluates negative.
RadicalExpr parse_radical(const std::string& text);

// One labeled direction.  Rays that fail validation are kept with
// valid = false and a defect note so the caller can report them; they are
// excluded from structure derivation.
struct Ray {
  std::string id;
  std::vector<double> coords;
  std::vector<RadicalExpr> source;
  bool valid = true;
  std::string note;
  double norm_error = 0.0;
};

// Reads `<id>: <expr> ; <expr> ; ...` lines, '#' starting a comment and
// blank lines skipped.  Structurally malformed lines throw ValidationError
// mentioning the 1-based line number; per-expression parse failures only
// mark that ray invalid.
std::vector<Ray> load_rays(const std::string& path);

// Orthogonality hypergraph of a ray set: nodes are rays identified up to
// sign, edges are pairs with |<u,v>| <= ortho_tol, contexts are the maximal
// cliques of size exactly d.
struct GreechieStructure {
  int d = 0;
  double ortho_tol = 0.0;
  std::vector<Ray> rays;
  std::vector<std::pair<int, int>> ortho_edges;
  std::vector<std::vector<int>> contexts;
  CheckReport report;

  int index_of(const std::string& id) const;
  const Ray& ray(const std::string& id) const;
};

GreechieStructure derive_structure(const std::vector<Ray>& rays, int d,
                                   double ortho_tol = 1e-9);

// 0/1 assignment on the rays of a structure, keyed by ray id.
struct Coloring {
  std::map<std::string, int> value_of;
};

struct SearchResult {
  bool found = false;
  Coloring coloring;
  long long explored = 0;
};

struct EnumerationResult {
  std::vector<Coloring> colorings;
  long long explored = 0;
};

// Backtracking search for an assignment giving every context exactly one
// 1 and no two adjacent 1s.  Deterministic: variables in ascending id
// order, value 0 tried before 1, unit propagation after every decision.
// `pins` fixes ray values up front; contradictory pins raise
// InconsistentPins, pins naming unknown rays ValidationError.  `explored`
// counts decision attempts (one per value tried at a branch point).
SearchResult color_search(const GreechieStructure& g,
                          const std::map<std::string, int>& pins = {});

// Same tree split at a fixed shallow frontier and the subtrees solved in
// parallel.  The frontier does not depend on the thread count and workers
// never cancel each other, so the result and the explored count match the
// serial search exactly; with several completions the lexicographically
// least (in id order) is returned.
SearchResult color_search_parallel(const GreechieStructure& g,
                                   const std::map<std::string, int>& pins = {});

// All completions, in the deterministic search order.
EnumerationResult enumerate_colorings(const GreechieStructure& g,
                                      const std::map<std::string, int>& pins = {},
                                      long long limit = 1000000);

// Interprets a coloring as a subset of a finite projector fragment (rank-1
// projectors onto the rays plus in-context pair joins, 0 and 1) and checks
// the filter axioms there: one 1 per context, upward closure, closure
// under available meets, primality on available joins.
CheckReport coloring_to_prime_filter(const Coloring& c,
                                     const GreechieStructure& g);

// One orthonormal basis together with the claimed measure weights.
struct GleasonSample {
  std::vector<StateVector> basis;
  std::vector<double> weights;
};

struct GleasonFit {
  explicit GleasonFit(int d) : T(d) {}
  Operator T;
  double residual = 0.0;
  int rank = 0;
  bool underdetermined = false;
};

// Least-squares Hermitian T with <x, T x> matching the weights across all
// sample bases.  residual is the worst absolute mismatch.  When the
// samples do not pin down all d*d real degrees of freedom the minimum-norm
// solution is returned with underdetermined set.
GleasonFit gleason_fit(const std::vector<GleasonSample>& samples, int d);

// Two-valued measure on the rank-1 projectors of R^2, built from a 0/1
// table g on an n-point grid over [0, pi/2).  mu has 4n entries covering
// [0, 2pi); the report checks two-valuedness, additivity over orthogonal
// pairs and invariance under sign flip of the defining vector.
struct Dim2Measure {
  std::vector<int> mu;
  CheckReport report;
};

Dim2Measure dim2_two_valued_measure(const std::vector<int>& g_table);

}  // namespace qfv

#endif  // QFV_KSLAB_HPP_
