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

#include "qfv/presheaf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace qfv {

namespace {

// Splitting eigenvalues closer than this is a rank decision made on noise;
// the refinement merges them instead and flags the gap unless it is small
// enough to be an exact numerical tie.
constexpr double kMergeGap = 1e-7;
constexpr double kTieGap = 1e-12;

std::string pair_msg(int i, int j, double norm) {
  char buf[96];
  std::snprintf(buf, sizeof(buf),
                "generators %d and %d do not commute (commutator norm %.3e)",
                i, j, norm);
  return buf;
}

// B^dagger A B compressed to the block spanned by the columns.
Operator compress(const Operator& a, const std::vector<StateVector>& cols) {
  const int k = static_cast<int>(cols.size());
  Operator m(k);
  for (int q = 0; q < k; ++q) {
    StateVector av = a.apply(cols[q]);
    for (int p = 0; p < k; ++p) m.at(p, q) = inner(cols[p], av);
  }
  return (m + m.adjoint()) * cplx(0.5, 0.0);
}

StateVector lift(const std::vector<StateVector>& cols, const StateVector& w) {
  StateVector v(cols[0].dim);
  for (int p = 0; p < static_cast<int>(cols.size()); ++p)
    for (int i = 0; i < v.dim; ++i) v.amps[i] += w.amps[p] * cols[p].amps[i];
  return v;
}

}  // namespace

Context generate_context(const std::vector<Operator>& generators,
                         const TolerancePolicy& pol) {
  if (generators.empty())
    throw PreconditionViolated("generate_context needs at least one generator");
  const int d = generators[0].dim();
  for (const auto& g : generators)
    if (g.dim() != d)
      throw DimensionMismatch("generators act on different spaces");
  for (int i = 0; i < static_cast<int>(generators.size()); ++i)
    if (!generators[i].is_hermitian(pol.eq_tol)) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "generator %d is not hermitian", i);
      throw NotHermitian(buf);
    }
  double worst = 0.0;
  int wi = 0, wj = 0;
  for (int i = 0; i < static_cast<int>(generators.size()); ++i)
    for (int j = i + 1; j < static_cast<int>(generators.size()); ++j) {
      const double n =
          (generators[i] * generators[j] - generators[j] * generators[i]).max_abs();
      if (n > worst) worst = n, wi = i, wj = j;
    }
  if (worst > pol.eq_tol) throw NotCommuting(pair_msg(wi, wj, worst));

  Context ctx;
  ctx.d = d;
  ctx.generators = generators;

  std::vector<std::vector<StateVector>> blocks(1);
  for (int i = 0; i < d; ++i) blocks[0].push_back(StateVector::basis(d, i));

  for (const auto& gen : generators) {
    std::vector<std::vector<StateVector>> next;
    for (const auto& cols : blocks) {
      const int k = static_cast<int>(cols.size());
      if (k == 1) {
        next.push_back(cols);
        continue;
      }
      EigenSystem es = hermitian_eigendecomposition(compress(gen, cols), pol);
      int lo = 0;
      for (int i = 1; i <= k; ++i) {
        if (i < k) {
          const double gap = es.values[i] - es.values[i - 1];
          if (gap < kMergeGap) {
            if (gap > kTieGap)
              ctx.report.warn("degeneracy_warning", gap, 0.0, kMergeGap);
            continue;
          }
        }
        std::vector<StateVector> sub;
        for (int j = lo; j < i; ++j) sub.push_back(lift(cols, es.vectors[j]));
        next.push_back(std::move(sub));
        lo = i;
      }
    }
    blocks = std::move(next);
  }

  for (const auto& cols : blocks)
    ctx.blocks.push_back(Projector::onto_span(cols, pol));

  const int nb = static_cast<int>(ctx.blocks.size());
  double ortho = 0.0;
  Operator sum = Operator::zero(d);
  for (int i = 0; i < nb; ++i) {
    sum = sum + ctx.blocks[i].op();
    for (int j = i + 1; j < nb; ++j)
      ortho = std::max(ortho, (ctx.blocks[i].op() * ctx.blocks[j].op()).max_abs());
  }
  const double complete = (sum - Operator::identity(d)).max_abs();
  double offdiag = 0.0;
  for (const auto& gen : generators)
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j) {
        if (i == j) continue;
        offdiag = std::max(
            offdiag, (ctx.blocks[i].op() * gen * ctx.blocks[j].op()).max_abs());
      }
  ctx.report.add("blocks_orthogonal", ortho <= pol.eq_tol, ortho, 0.0,
                 pol.eq_tol);
  ctx.report.add("blocks_complete", complete <= pol.eq_tol, complete, 0.0,
                 pol.eq_tol);
  ctx.report.add("generators_diagonal", offdiag <= pol.eq_tol, offdiag, 0.0,
                 pol.eq_tol);
  return ctx;
}

Context trivial_context(int dim) {
  return generate_context({Operator::identity(dim)});
}

double Character::evaluate(const Operator& a) const {
  const Projector& p = context->blocks[chosen_block];
  return (p.op() * a).trace().real() / p.rank();
}

std::vector<Character> characters(const Context& ctx) {
  std::vector<Character> out;
  for (int b = 0; b < static_cast<int>(ctx.blocks.size()); ++b)
    out.push_back({&ctx, b});
  return out;
}

bool context_includes(const Context& sub, const Context& super,
                      const TolerancePolicy& pol) {
  if (sub.d != super.d) return false;
  for (const auto& b : super.blocks) {
    bool placed = false;
    for (const auto& s : sub.blocks)
      if (leq(b, s, pol)) {
        placed = true;
        break;
      }
    if (!placed) return false;
  }
  return true;
}

Character restrict_character(const Character& chi, const Context& sub,
                             const TolerancePolicy& pol) {
  if (!context_includes(sub, *chi.context, pol))
    throw NotIncluded("target context does not coarsen the character's context");
  const Projector& b = chi.context->blocks[chi.chosen_block];
  for (int s = 0; s < static_cast<int>(sub.blocks.size()); ++s)
    if (leq(b, sub.blocks[s], pol)) return {&sub, s};
  throw NotIncluded("chosen block fits no block of the target context");
}

ContextPoset build_poset(std::vector<Context> contexts,
                         const TolerancePolicy& pol) {
  ContextPoset poset;
  poset.contexts = std::move(contexts);
  const int n = static_cast<int>(poset.contexts.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (context_includes(poset.contexts[i], poset.contexts[j], pol))
        poset.inclusion.push_back({i, j});
    }
  return poset;
}

namespace {

// Which sub block each super block lands in, per inclusion pair.
std::vector<int> restriction_map(const Context& sub, const Context& super) {
  std::vector<int> map(super.blocks.size(), -1);
  for (int b = 0; b < static_cast<int>(super.blocks.size()); ++b)
    for (int s = 0; s < static_cast<int>(sub.blocks.size()); ++s)
      if (leq(super.blocks[b], sub.blocks[s])) {
        map[b] = s;
        break;
      }
  return map;
}

}  // namespace

namespace {

// Chronological search with arc-consistency filtering through the
// restriction maps.  Filtering only ever removes blocks that appear in no
// completion of the current prefix, so the first section in declared
// order with blocks ascending is exactly the one plain enumeration would
// find, at a small fraction of the tree.
struct SectionSolver {
  const ContextPoset& poset;
  struct PairMap {
    int sub, super;
    std::vector<int> map;  // super block -> sub block
  };
  std::vector<PairMap> pairs;
  std::vector<std::vector<int>> incident;  // context -> pair indices
  std::uint64_t explored = 0;

  explicit SectionSolver(const ContextPoset& p) : poset(p) {
    incident.resize(poset.contexts.size());
    for (const auto& [sub, super] : poset.inclusion) {
      pairs.push_back({sub, super,
                       restriction_map(poset.contexts[sub],
                                       poset.contexts[super])});
      incident[sub].push_back(static_cast<int>(pairs.size()) - 1);
      incident[super].push_back(static_cast<int>(pairs.size()) - 1);
    }
  }

  // Filters both ends of every pair touched by a changed context until a
  // fixpoint or an empty domain.
  bool propagate(std::vector<std::uint64_t>& dom, std::vector<int>& queue) {
    while (!queue.empty()) {
      const int v = queue.back();
      queue.pop_back();
      for (int e : incident[v]) {
        const PairMap& pm = pairs[e];
        std::uint64_t keep = 0, image = 0;
        for (int b = 0; b < static_cast<int>(pm.map.size()); ++b)
          if (dom[pm.super] >> b & 1) {
            if (dom[pm.sub] >> pm.map[b] & 1) keep |= std::uint64_t(1) << b;
            image |= std::uint64_t(1) << pm.map[b];
          }
        if (keep != dom[pm.super]) {
          dom[pm.super] = keep;
          if (!keep) return false;
          queue.push_back(pm.super);
          image = 0;
          for (int b = 0; b < static_cast<int>(pm.map.size()); ++b)
            if (keep >> b & 1) image |= std::uint64_t(1) << pm.map[b];
        }
        const std::uint64_t nsub = dom[pm.sub] & image;
        if (nsub != dom[pm.sub]) {
          dom[pm.sub] = nsub;
          if (!nsub) return false;
          queue.push_back(pm.sub);
        }
      }
    }
    return true;
  }

  bool dfs(int k, std::vector<std::uint64_t> dom, std::vector<int>& chosen) {
    const int n = static_cast<int>(poset.contexts.size());
    if (k == n) return true;
    const int nb = static_cast<int>(poset.contexts[k].blocks.size());
    for (int b = 0; b < nb; ++b) {
      if (!(dom[k] >> b & 1)) continue;
      ++explored;
      std::vector<std::uint64_t> next = dom;
      next[k] = std::uint64_t(1) << b;
      std::vector<int> queue = {k};
      if (!propagate(next, queue)) continue;
      chosen[k] = b;
      if (dfs(k + 1, std::move(next), chosen)) return true;
    }
    chosen[k] = -1;
    return false;
  }
};

}  // namespace

SectionResult global_section_search(const ContextPoset& poset) {
  const int n = static_cast<int>(poset.contexts.size());
  SectionResult result;
  if (n == 0) {
    result.found = true;
    return result;
  }
  std::vector<std::uint64_t> dom(n);
  for (int k = 0; k < n; ++k) {
    const int nb = static_cast<int>(poset.contexts[k].blocks.size());
    if (nb < 1 || nb > 64)
      throw PreconditionViolated("context block count outside searchable range");
    dom[k] = nb == 64 ? ~std::uint64_t(0) : (std::uint64_t(1) << nb) - 1;
  }

  SectionSolver solver(poset);
  std::vector<int> queue(n);
  for (int k = 0; k < n; ++k) queue[k] = n - 1 - k;
  std::vector<int> chosen(n, -1);
  if (solver.propagate(dom, queue) && solver.dfs(0, std::move(dom), chosen)) {
    result.found = true;
    result.chosen = chosen;
  }
  result.explored = solver.explored;
  return result;
}

namespace {

StateVector ray_vector(const Ray& r) {
  StateVector v(static_cast<int>(r.coords.size()));
  for (int i = 0; i < v.dim; ++i) v.amps[i] = r.coords[i];
  return v;
}

bool same_partition(const Context& a, const Context& b,
                    const TolerancePolicy& pol) {
  return a.blocks.size() == b.blocks.size() && context_includes(a, b, pol) &&
         context_includes(b, a, pol);
}

}  // namespace

RayPoset ray_poset(const GreechieStructure& g, const TolerancePolicy& pol) {
  const int nr = static_cast<int>(g.rays.size());
  RayPoset rp;
  rp.ray_ids.resize(nr);
  rp.ray_context.assign(nr, -1);
  rp.ray_block.assign(nr, -1);

  std::vector<Projector> proj(nr, Projector::zero(g.d));
  for (int r = 0; r < nr; ++r) {
    rp.ray_ids[r] = g.rays[r].id;
    if (g.rays[r].valid) proj[r] = Projector::onto(ray_vector(g.rays[r]), pol);
  }

  std::vector<Context> ctxs;
  auto add_ctx = [&](Context c) {
    for (int i = 0; i < static_cast<int>(ctxs.size()); ++i)
      if (same_partition(ctxs[i], c, pol)) return i;
    ctxs.push_back(std::move(c));
    return static_cast<int>(ctxs.size()) - 1;
  };
  auto add_ray_ctx = [&](int r) {
    if (rp.ray_context[r] >= 0) return;
    rp.ray_context[r] = add_ctx(generate_context({proj[r].op()}, pol));
  };

  std::set<std::pair<int, int>> covered;
  for (const auto& clique : g.contexts)
    for (size_t i = 0; i < clique.size(); ++i)
      for (size_t j = 0; j < clique.size(); ++j)
        covered.insert({clique[i], clique[j]});
  std::vector<std::pair<int, int>> bare;
  for (const auto& [i, j] : g.ortho_edges)
    if (!covered.count({i, j})) bare.push_back({i, j});

  // Declaration order drives the search: cliques are declared in a
  // connectivity-greedy order (most rays already placed first) and each
  // pair context as soon as both of its rays are placed, so every
  // constraint binds while the decisions that could violate it are still
  // close at hand.
  std::vector<bool> bare_done(bare.size(), false);
  auto add_ready_bare = [&] {
    for (size_t e = 0; e < bare.size(); ++e) {
      if (bare_done[e]) continue;
      const auto& [i, j] = bare[e];
      if (rp.ray_context[i] < 0 || rp.ray_context[j] < 0) continue;
      add_ctx(generate_context({proj[i].op(), proj[j].op()}, pol));
      bare_done[e] = true;
    }
  };
  const int nc = static_cast<int>(g.contexts.size());
  std::vector<int> clique_order;
  {
    std::vector<bool> used(nc, false), seen(nr, false);
    for (int step = 0; step < nc; ++step) {
      int best = -1, best_overlap = -1;
      for (int c = 0; c < nc; ++c) {
        if (used[c]) continue;
        int overlap = 0;
        for (int r : g.contexts[c]) overlap += seen[r] ? 1 : 0;
        if (overlap > best_overlap) best = c, best_overlap = overlap;
      }
      used[best] = true;
      clique_order.push_back(best);
      for (int r : g.contexts[best]) seen[r] = true;
    }
  }
  for (int c : clique_order) {
    std::vector<Operator> gens;
    for (int r : g.contexts[c]) gens.push_back(proj[r].op());
    add_ctx(generate_context(gens, pol));
    for (int r : g.contexts[c]) add_ray_ctx(r);
    add_ready_bare();
  }
  for (const auto& [i, j] : bare) {
    add_ray_ctx(i);
    add_ray_ctx(j);
  }
  add_ready_bare();
  for (int r = 0; r < nr; ++r)
    if (g.rays[r].valid) add_ray_ctx(r);

  rp.block_ray.resize(ctxs.size());
  for (int c = 0; c < static_cast<int>(ctxs.size()); ++c) {
    rp.block_ray[c].assign(ctxs[c].blocks.size(), -1);
    for (int b = 0; b < static_cast<int>(ctxs[c].blocks.size()); ++b) {
      if (ctxs[c].blocks[b].rank() != 1) continue;
      for (int r = 0; r < nr; ++r)
        if (g.rays[r].valid && leq(proj[r], ctxs[c].blocks[b], pol)) {
          rp.block_ray[c][b] = r;
          break;
        }
    }
  }
  for (int r = 0; r < nr; ++r) {
    const int c = rp.ray_context[r];
    if (c < 0) continue;
    for (int b = 0; b < static_cast<int>(rp.block_ray[c].size()); ++b)
      if (rp.block_ray[c][b] == r) rp.ray_block[r] = b;
  }

  rp.poset = build_poset(std::move(ctxs), pol);
  return rp;
}

std::vector<Ray> dim2_grid_rays(int n) {
  if (n < 1) throw PreconditionViolated("grid needs at least one point");
  std::vector<Ray> rays;
  const double step = 3.14159265358979323846 / (2 * n);
  for (int k = 0; k < 2 * n; ++k) {
    Ray r;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "a%03d", k);
    r.id = buf;
    r.coords = {std::cos(k * step), std::sin(k * step)};
    rays.push_back(std::move(r));
  }
  return rays;
}

Coloring measure_to_coloring(const Dim2Measure& m, const GreechieStructure& g) {
  Coloring c;
  const int nr = static_cast<int>(g.rays.size());
  if (static_cast<int>(m.mu.size()) < nr)
    throw DimensionMismatch("measure table shorter than the ray list");
  for (int k = 0; k < nr; ++k) c.value_of[g.rays[k].id] = m.mu[k];
  return c;
}

SectionResult coloring_to_section(const Coloring& c, const RayPoset& rp) {
  const int n = static_cast<int>(rp.poset.contexts.size());
  SectionResult s;
  s.chosen.assign(n, -1);
  s.found = true;
  for (int k = 0; k < n; ++k) {
    int ones = 0, one_block = -1, rest = -1;
    for (int b = 0; b < static_cast<int>(rp.block_ray[k].size()); ++b) {
      const int r = rp.block_ray[k][b];
      if (r < 0) {
        rest = b;
        continue;
      }
      auto it = c.value_of.find(rp.ray_ids[r]);
      const int v = it == c.value_of.end() ? -1 : it->second;
      if (v != 0 && v != 1) {
        s.found = false;
        continue;
      }
      if (v == 1) ++ones, one_block = b;
    }
    if (ones == 1)
      s.chosen[k] = one_block;
    else if (ones == 0 && rest >= 0)
      s.chosen[k] = rest;
    else
      s.found = false;
  }
  return s;
}

Coloring section_to_coloring(const SectionResult& s, const RayPoset& rp) {
  Coloring c;
  for (int r = 0; r < static_cast<int>(rp.ray_ids.size()); ++r) {
    const int ctx = rp.ray_context[r];
    if (ctx < 0) continue;
    const bool one = ctx < static_cast<int>(s.chosen.size()) &&
                     s.chosen[ctx] == rp.ray_block[r];
    c.value_of[rp.ray_ids[r]] = one ? 1 : 0;
  }
  return c;
}

CheckReport valuation_section_roundtrip(const Coloring& c, const RayPoset& rp) {
  CheckReport report;
  SectionResult sec = coloring_to_section(c, rp);
  report.add("section_built", sec.found, sec.found ? 1 : 0, 1, 0);

  int violations = 0;
  for (const auto& [sub, super] : rp.poset.inclusion) {
    if (sec.chosen[sub] < 0 || sec.chosen[super] < 0) {
      ++violations;
      continue;
    }
    std::vector<int> map =
        restriction_map(rp.poset.contexts[sub], rp.poset.contexts[super]);
    if (map[sec.chosen[super]] != sec.chosen[sub]) ++violations;
  }
  report.add("section_consistent", violations == 0, violations, 0, 0);

  Coloring back = section_to_coloring(sec, rp);
  int mismatches = 0;
  for (const auto& [id, v] : back.value_of) {
    auto it = c.value_of.find(id);
    if (it == c.value_of.end() || it->second != v) ++mismatches;
  }
  report.add("roundtrip_identity", mismatches == 0, mismatches, 0, 0);
  return report;
}

CheckReport character_calculus_report(const Operator& a, const Operator& b,
                                      double caltol,
                                      const TolerancePolicy& pol) {
  CheckReport report;
  Context ctx = generate_context({a, b}, pol);

  std::vector<double> spec = hermitian_eigendecomposition(a, pol).values;
  const Operator a2 = a * a;
  const Operator cubic =
      a2 * a - a2 * cplx(2.0, 0.0) + a - Operator::identity(a.dim());
  auto fval = [](double x) { return x * x * x - 2.0 * x * x + x - 1.0; };
  const Operator ab = a * b;

  double worst_spec = 0.0, worst_sq = 0.0, worst_cu = 0.0, worst_mul = 0.0;
  for (const Character& chi : characters(ctx)) {
    const double la = chi.evaluate(a);
    const double lb = chi.evaluate(b);
    double dist = std::abs(la - spec[0]);
    for (double v : spec) dist = std::min(dist, std::abs(la - v));
    worst_spec = std::max(worst_spec, dist);
    worst_sq = std::max(worst_sq, std::abs(chi.evaluate(a2) - la * la));
    worst_cu = std::max(worst_cu, std::abs(chi.evaluate(cubic) - fval(la)));
    worst_mul = std::max(worst_mul, std::abs(chi.evaluate(ab) - la * lb));
  }
  report.add("spectrum_membership", worst_spec <= caltol, worst_spec, 0.0,
             caltol);
  report.add("square_compat", worst_sq <= caltol, worst_sq, 0.0, caltol);
  report.add("cubic_compat", worst_cu <= caltol, worst_cu, 0.0, caltol);
  report.add("multiplicative", worst_mul <= caltol, worst_mul, 0.0, caltol);
  return report;
}

}  // namespace qfv
