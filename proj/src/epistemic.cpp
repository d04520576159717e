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

#include "qfv/epistemic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "qfv/numkernel.hpp"

namespace qfv {

// ---------------------------------------------------------------------------
// Formulas
// ---------------------------------------------------------------------------

static std::string knows_head(const EpistemicFormula& f) {
  std::string s = "K{" + f.label + "@" + f.time;
  if (f.context) s += "|" + *f.context;
  return s + "}";
}

std::string EpistemicFormula::text() const {
  switch (kind) {
    case FormulaKind::kAtom:
      return label;
    case FormulaKind::kNot:
      return "not " + child->text();
    case FormulaKind::kAnd:
      return "(" + left->text() + " & " + right->text() + ")";
    case FormulaKind::kImplies:
      return "(" + left->text() + " -> " + right->text() + ")";
    case FormulaKind::kKnows:
      return knows_head(*this) + "(" + child->text() + ")";
  }
  return "";
}

FormulaPtr atom(const std::string& label) {
  auto f = std::make_shared<EpistemicFormula>();
  f->kind = FormulaKind::kAtom;
  f->label = label;
  return f;
}

FormulaPtr f_not(FormulaPtr x) {
  auto f = std::make_shared<EpistemicFormula>();
  f->kind = FormulaKind::kNot;
  f->child = std::move(x);
  return f;
}

FormulaPtr f_and(FormulaPtr a, FormulaPtr b) {
  auto f = std::make_shared<EpistemicFormula>();
  f->kind = FormulaKind::kAnd;
  f->left = std::move(a);
  f->right = std::move(b);
  return f;
}

FormulaPtr implies(FormulaPtr a, FormulaPtr b) {
  auto f = std::make_shared<EpistemicFormula>();
  f->kind = FormulaKind::kImplies;
  f->left = std::move(a);
  f->right = std::move(b);
  return f;
}

FormulaPtr knows(const std::string& agent, const std::string& time,
                 const std::optional<std::string>& context, FormulaPtr body) {
  auto f = std::make_shared<EpistemicFormula>();
  f->kind = FormulaKind::kKnows;
  f->label = agent;
  f->time = time;
  f->context = context;
  f->child = std::move(body);
  return f;
}

FormulaPtr knows(const std::string& agent, const std::string& time,
                 FormulaPtr body) {
  return knows(agent, time, std::nullopt, std::move(body));
}

bool same_formula(const FormulaPtr& a, const FormulaPtr& b) {
  return a->text() == b->text();
}

bool contains_subformula(const FormulaPtr& f, const FormulaPtr& sub) {
  if (same_formula(f, sub)) return true;
  if (f->child && contains_subformula(f->child, sub)) return true;
  if (f->left && contains_subformula(f->left, sub)) return true;
  if (f->right && contains_subformula(f->right, sub)) return true;
  return false;
}

const AgentDecl* KnowledgeBase::find_agent(const std::string& name,
                                           const std::string& time) const {
  for (const auto& a : agents)
    if (a.name == name && a.time == time) return &a;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Derivation engine
// ---------------------------------------------------------------------------

namespace {

// A position inside a formula: the chain of Knows nodes from the root and
// the subformula they guard.  Rules act on the guarded part; conclusions are
// rebuilt under the same prefix.
struct Site {
  std::vector<const EpistemicFormula*> prefix;
  const EpistemicFormula* rem = nullptr;
};

std::vector<Site> sites_of(const EpistemicFormula* f) {
  std::vector<Site> out;
  Site s;
  s.rem = f;
  out.push_back(s);
  while (s.rem->kind == FormulaKind::kKnows) {
    s.prefix.push_back(s.rem);
    s.rem = s.rem->child.get();
    out.push_back(s);
  }
  return out;
}

std::string prefix_key(const std::vector<const EpistemicFormula*>& prefix) {
  std::string s;
  for (const auto* n : prefix) s += knows_head(*n);
  return s;
}

std::string wrapped_text(const std::vector<const EpistemicFormula*>& prefix,
                         const std::string& inner) {
  std::string s;
  for (const auto* n : prefix) s += knows_head(*n) + "(";
  s += inner;
  s.append(prefix.size(), ')');
  return s;
}

FormulaPtr rebuild(const std::vector<const EpistemicFormula*>& prefix,
                   FormulaPtr body) {
  for (auto it = prefix.rbegin(); it != prefix.rend(); ++it)
    body = knows((*it)->label, (*it)->time, (*it)->context, std::move(body));
  return body;
}

struct ImplRec {
  int idx = 0;
  std::string key;
  std::string ante, cons;  // texts of the bare implication's sides
  std::string ante_full;   // antecedent rebuilt under the prefix
  std::vector<const EpistemicFormula*> prefix;
  const EpistemicFormula* impl = nullptr;
};

struct Engine {
  const KnowledgeBase& kb;
  ClosureResult out;
  std::unordered_map<std::string, int> index;
  std::unordered_set<std::string> blocked_seen;
  bool halted = false;

  explicit Engine(const KnowledgeBase& k) : kb(k) {}

  int append(FormulaPtr f, const std::string& rule, std::vector<int> prem) {
    std::string t = f->text();
    auto it = index.find(t);
    if (it != index.end()) return -1;
    int idx = static_cast<int>(out.closure.size());
    index.emplace(std::move(t), idx);
    out.closure.push_back(f);
    out.trace.steps.push_back({rule, std::move(prem), f});
    univaluation_check(idx);
    return idx;
  }

  // Same-agent clash Knows(i,A) with Knows(i,not A): record the conjunction
  // and stop.  Checked at every insertion.
  void univaluation_check(int idx) {
    const FormulaPtr& f = out.closure[idx];
    if (f->kind != FormulaKind::kKnows) return;
    const FormulaPtr& body = f->child;
    int pos = -1, neg = -1;
    FormulaPtr claim;
    if (body->kind == FormulaKind::kNot) {
      auto sibling = knows(f->label, f->time, f->context, body->child);
      auto it = index.find(sibling->text());
      if (it == index.end()) return;
      pos = it->second;
      neg = idx;
      claim = body->child;
    } else {
      auto sibling = knows(f->label, f->time, f->context, f_not(body));
      auto it = index.find(sibling->text());
      if (it == index.end()) return;
      pos = idx;
      neg = it->second;
      claim = body;
    }
    auto conclusion =
        knows(f->label, f->time, f->context, f_and(claim, f_not(claim)));
    int cidx = static_cast<int>(out.closure.size());
    index.emplace(conclusion->text(), cidx);
    out.closure.push_back(conclusion);
    out.trace.steps.push_back({"univaluation", {pos, neg}, conclusion});
    out.contradiction = conclusion;
    out.contradiction_step = cidx;
    halted = true;
  }

  // Modus ponens and hypothetical syllogism under a shared nonempty Knows
  // prefix.  Premises come from the phase-start snapshot; within the scan
  // each formula is tried in both roles so a usable pair fires at the
  // earlier member's position.
  void phase_distribution() {
    int snap = static_cast<int>(out.closure.size());
    std::vector<ImplRec> recs;
    for (int y = 0; y < snap; ++y) {
      for (const auto& s : sites_of(out.closure[y].get())) {
        if (s.rem->kind != FormulaKind::kImplies || s.prefix.empty()) continue;
        ImplRec r;
        r.idx = y;
        r.key = prefix_key(s.prefix);
        r.ante = s.rem->left->text();
        r.cons = s.rem->right->text();
        r.ante_full = wrapped_text(s.prefix, r.ante);
        r.prefix = s.prefix;
        r.impl = s.rem;
        recs.push_back(std::move(r));
      }
    }
    for (int x = 0; x < snap && !halted; ++x) {
      const FormulaPtr& X = out.closure[x];
      const std::string xt = X->text();
      auto xsites = sites_of(X.get());
      for (const auto& s : xsites) {
        if (halted) return;
        if (s.rem->kind != FormulaKind::kImplies || s.prefix.empty()) continue;
        std::string key = prefix_key(s.prefix);
        auto it = index.find(wrapped_text(s.prefix, s.rem->left->text()));
        if (it != index.end() && it->second < snap) {
          append(rebuild(s.prefix, s.rem->right), "distribution",
                 {x, it->second});
          if (halted) return;
        }
        std::string rt = s.rem->right->text();
        std::string lt = s.rem->left->text();
        for (const auto& r : recs) {
          if (r.key != key) continue;
          if (r.ante == rt)
            append(rebuild(s.prefix, implies(s.rem->left, r.impl->right)),
                   "distribution", {x, r.idx});
          if (halted) return;
          if (r.cons == lt)
            append(rebuild(s.prefix, implies(r.impl->left, s.rem->right)),
                   "distribution", {r.idx, x});
          if (halted) return;
        }
      }
      for (const auto& r : recs) {
        if (r.ante_full != xt) continue;
        append(rebuild(r.prefix, r.impl->right), "distribution", {r.idx, x});
        if (halted) return;
      }
    }
  }

  void phase_trust() {
    int snap = static_cast<int>(out.closure.size());
    for (int x = 0; x < snap && !halted; ++x) {
      const FormulaPtr& X = out.closure[x];
      for (const auto& s : sites_of(X.get())) {
        if (halted) return;
        const EpistemicFormula* outer = s.rem;
        if (outer->kind != FormulaKind::kKnows) continue;
        const EpistemicFormula* inner = outer->child.get();
        if (inner->kind != FormulaKind::kKnows) continue;
        const TrustEdge* edge = nullptr;
        for (const auto& e : kb.trust.edges) {
          if (e.truster == outer->label && e.truster_time == outer->time &&
              e.trusted == inner->label && e.trusted_time == inner->time) {
            edge = &e;
            break;
          }
        }
        if (!edge) continue;
        if (kb.trust.mode == TrustMode::kContextual) {
          const AgentDecl* ai = kb.find_agent(outer->label, outer->time);
          const AgentDecl* aj = kb.find_agent(inner->label, inner->time);
          std::string reason;
          if (!ai || !ai->context)
            reason = "truster context undefined";
          else if (!aj || !aj->context)
            reason = "trusted context undefined";
          else if (*ai->context != *aj->context)
            reason = "context mismatch (" + *ai->context + " vs " +
                     *aj->context + ")";
          if (!reason.empty()) {
            std::string dk = X->text() + "|" + edge->text();
            if (blocked_seen.insert(dk).second)
              out.blocked.push_back({x, X, *edge, reason});
            continue;
          }
        }
        auto prefix = s.prefix;
        prefix.push_back(outer);
        append(rebuild(prefix, inner->child), "trust", {x});
      }
    }
  }

  // Top level only; never re-introspect an introspection product, else the
  // closure is infinite.
  void phase_positive_introspection() {
    int snap = static_cast<int>(out.closure.size());
    for (int x = 0; x < snap && !halted; ++x) {
      if (out.trace.steps[x].rule == "positive_introspection") continue;
      const FormulaPtr& X = out.closure[x];
      if (X->kind != FormulaKind::kKnows) continue;
      append(knows(X->label, X->time, X->context, X), "positive_introspection",
             {x});
    }
  }

  void phase_negative_introspection() {
    int snap = static_cast<int>(out.closure.size());
    for (int x = 0; x < snap && !halted; ++x) {
      const FormulaPtr& X = out.closure[x];
      if (X->kind != FormulaKind::kNot) continue;
      const EpistemicFormula* inner = X->child.get();
      if (inner->kind != FormulaKind::kKnows) continue;
      append(knows(inner->label, inner->time, inner->context, X),
             "negative_introspection", {x});
    }
  }

  // Restricted to the declared tautology stock so the closure stays finite.
  void phase_generalization() {
    for (int si : kb.tautology_stock) {
      if (halted) return;
      const FormulaPtr& s = kb.formulas[si];
      for (const auto& a : kb.agents) {
        std::optional<std::string> ctx;
        if (kb.trust.mode == TrustMode::kContextual) ctx = a.context;
        append(knows(a.name, a.time, ctx, s), "generalization", {});
        if (halted) return;
      }
    }
  }

  void run(int max_depth) {
    for (const auto& f : kb.formulas) {
      if (halted) break;
      append(f, "seed", {});
    }
    int round = 0;
    bool grew = true;
    while (!halted && grew && round < max_depth) {
      ++round;
      size_t before = out.closure.size();
      if (kb.rules.distribution && !halted) phase_distribution();
      if (kb.rules.trust && !halted) phase_trust();
      if (kb.rules.positive_introspection && !halted)
        phase_positive_introspection();
      if (kb.rules.negative_introspection && !halted)
        phase_negative_introspection();
      if (kb.rules.generalization && !halted) phase_generalization();
      grew = out.closure.size() > before;
    }
    out.rounds = round;
    out.depth_exceeded = !halted && grew && round >= max_depth;
  }
};

}  // namespace

ClosureResult derive_closure(const KnowledgeBase& kb, int max_depth) {
  if (max_depth < 1)
    throw PreconditionViolated("derive_closure: max_depth must be >= 1");
  Engine e(kb);
  e.run(max_depth);
  return std::move(e.out);
}

// ---------------------------------------------------------------------------
// Independent trace validation
// ---------------------------------------------------------------------------

namespace {

using EF = EpistemicFormula;

bool st_eq(const EF* a, const EF* b) {
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case FormulaKind::kAtom:
      return a->label == b->label;
    case FormulaKind::kNot:
      return st_eq(a->child.get(), b->child.get());
    case FormulaKind::kAnd:
    case FormulaKind::kImplies:
      return st_eq(a->left.get(), b->left.get()) &&
             st_eq(a->right.get(), b->right.get());
    case FormulaKind::kKnows:
      return a->label == b->label && a->time == b->time &&
             a->context == b->context && st_eq(a->child.get(), b->child.get());
  }
  return false;
}

bool heads_eq(const EF* a, const EF* b) {
  return a->label == b->label && a->time == b->time && a->context == b->context;
}

bool mp_match(const EF* imp, const EF* fact, const EF* concl, int depth) {
  if (imp->kind == FormulaKind::kKnows && fact->kind == FormulaKind::kKnows &&
      concl->kind == FormulaKind::kKnows && heads_eq(imp, fact) &&
      heads_eq(imp, concl)) {
    if (mp_match(imp->child.get(), fact->child.get(), concl->child.get(),
                 depth + 1))
      return true;
  }
  return depth >= 1 && imp->kind == FormulaKind::kImplies &&
         st_eq(imp->left.get(), fact) && st_eq(imp->right.get(), concl);
}

bool chain_match(const EF* l, const EF* r, const EF* c, int depth) {
  if (l->kind == FormulaKind::kKnows && r->kind == FormulaKind::kKnows &&
      c->kind == FormulaKind::kKnows && heads_eq(l, r) && heads_eq(l, c)) {
    if (chain_match(l->child.get(), r->child.get(), c->child.get(), depth + 1))
      return true;
  }
  return depth >= 1 && l->kind == FormulaKind::kImplies &&
         r->kind == FormulaKind::kImplies && c->kind == FormulaKind::kImplies &&
         st_eq(l->left.get(), c->left.get()) &&
         st_eq(l->right.get(), r->left.get()) &&
         st_eq(r->right.get(), c->right.get());
}

bool edge_ok(const KnowledgeBase& kb, const EF* truster, const EF* trusted) {
  bool found = false;
  for (const auto& e : kb.trust.edges)
    if (e.truster == truster->label && e.truster_time == truster->time &&
        e.trusted == trusted->label && e.trusted_time == trusted->time)
      found = true;
  if (!found) return false;
  if (kb.trust.mode != TrustMode::kContextual) return true;
  const AgentDecl* ai = kb.find_agent(truster->label, truster->time);
  const AgentDecl* aj = kb.find_agent(trusted->label, trusted->time);
  return ai && aj && ai->context && aj->context &&
         *ai->context == *aj->context;
}

bool trust_match(const KnowledgeBase& kb, const EF* prem, const EF* concl) {
  if (prem->kind != FormulaKind::kKnows || concl->kind != FormulaKind::kKnows ||
      !heads_eq(prem, concl))
    return false;
  const EF* inner = prem->child.get();
  if (inner->kind == FormulaKind::kKnows &&
      st_eq(inner->child.get(), concl->child.get()) &&
      edge_ok(kb, prem, inner))
    return true;
  return trust_match(kb, prem->child.get(), concl->child.get());
}

}  // namespace

bool validate_trace(const KnowledgeBase& kb, const ProofTrace& trace,
                    std::string* why) {
  auto fail = [&](int i, const std::string& m) {
    if (why) *why = "step " + std::to_string(i) + ": " + m;
    return false;
  };
  for (size_t i = 0; i < trace.steps.size(); ++i) {
    const ProofStep& s = trace.steps[i];
    for (int p : s.premises)
      if (p < 0 || p >= static_cast<int>(i))
        return fail(static_cast<int>(i), "premise out of order");
    const EF* c = s.conclusion.get();
    auto prem = [&](int k) { return trace.steps[s.premises[k]].conclusion.get(); };
    if (s.rule == "seed") {
      if (!s.premises.empty()) return fail(i, "seed with premises");
      bool hit = false;
      for (const auto& f : kb.formulas) hit = hit || st_eq(f.get(), c);
      if (!hit) return fail(i, "seed not in knowledge base");
    } else if (s.rule == "distribution") {
      if (s.premises.size() != 2) return fail(i, "needs two premises");
      if (!mp_match(prem(0), prem(1), c, 0) &&
          !chain_match(prem(0), prem(1), c, 0))
        return fail(i, "no distribution pattern matches");
    } else if (s.rule == "trust") {
      if (s.premises.size() != 1) return fail(i, "needs one premise");
      if (!trust_match(kb, prem(0), c)) return fail(i, "no trusted edge fits");
    } else if (s.rule == "positive_introspection") {
      if (s.premises.size() != 1) return fail(i, "needs one premise");
      const EF* p = prem(0);
      if (p->kind != FormulaKind::kKnows || c->kind != FormulaKind::kKnows ||
          !heads_eq(c, p) || !st_eq(c->child.get(), p))
        return fail(i, "not an introspection of the premise");
    } else if (s.rule == "negative_introspection") {
      if (s.premises.size() != 1) return fail(i, "needs one premise");
      const EF* p = prem(0);
      if (p->kind != FormulaKind::kNot ||
          p->child->kind != FormulaKind::kKnows ||
          c->kind != FormulaKind::kKnows || !heads_eq(c, p->child.get()) ||
          !st_eq(c->child.get(), p))
        return fail(i, "not a negative introspection of the premise");
    } else if (s.rule == "generalization") {
      if (!s.premises.empty()) return fail(i, "generalization with premises");
      if (c->kind != FormulaKind::kKnows) return fail(i, "not a Knows");
      const AgentDecl* a = kb.find_agent(c->label, c->time);
      if (!a) return fail(i, "unknown agent");
      if (kb.trust.mode == TrustMode::kContextual && c->context != a->context)
        return fail(i, "context tag does not match the agent");
      bool hit = false;
      for (int si : kb.tautology_stock)
        hit = hit || st_eq(kb.formulas[si].get(), c->child.get());
      if (!hit) return fail(i, "body is not a stock tautology");
    } else if (s.rule == "univaluation") {
      if (s.premises.size() != 2) return fail(i, "needs two premises");
      const EF* p = prem(0);
      const EF* n = prem(1);
      if (p->kind != FormulaKind::kKnows || n->kind != FormulaKind::kKnows ||
          !heads_eq(p, n) || !heads_eq(p, c) ||
          n->child->kind != FormulaKind::kNot ||
          !st_eq(n->child->child.get(), p->child.get()))
        return fail(i, "premises are not a same-agent clash");
      if (c->kind != FormulaKind::kKnows ||
          c->child->kind != FormulaKind::kAnd ||
          !st_eq(c->child->left.get(), p->child.get()) ||
          c->child->right->kind != FormulaKind::kNot ||
          !st_eq(c->child->right->child.get(), p->child.get()))
        return fail(i, "conclusion is not the recorded clash");
    } else {
      return fail(i, "unknown rule '" + s.rule + "'");
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// The two-lab nested-observer scenario
// ---------------------------------------------------------------------------

KnowledgeBase fr_build_kb(TrustMode mode) {
  KnowledgeBase kb;
  kb.trust.mode = mode;
  const bool with_ctx = mode == TrustMode::kContextual;
  std::optional<std::string> c1, c2;
  if (with_ctx) {
    c1 = "C1";  // the {a,b} measurement
    c2 = "C2";  // the entangled-basis measurement
  }
  kb.atoms = {"d=b", "d~=b", "PcL!=0", "PcL~!=0"};
  kb.agents = {{"F~", "0-2", c1},
               {"F~", "4", std::nullopt},
               {"F", "1-2", c1},
               {"W~", "2-3", c2},
               {"W", "3-4", c2}};

  auto p = atom("PcL!=0");
  auto pt = atom("PcL~!=0");
  auto db = atom("d=b");
  auto dtb = atom("d~=b");
  auto kft = [&](FormulaPtr b) { return knows("F~", "0-2", c1, std::move(b)); };
  auto kf = [&](FormulaPtr b) { return knows("F", "1-2", c1, std::move(b)); };
  auto kwt = [&](FormulaPtr b) { return knows("W~", "2-3", c2, std::move(b)); };
  auto kw = [&](FormulaPtr b) { return knows("W", "3-4", c2, std::move(b)); };

  // What the agents agree on before the run: the inner friend's record
  // forces a null c-outcome for W, the second friend's record fixes the
  // first friend's, and a positive c~-test fixes the second friend's record.
  auto t_friend = kft(implies(kft(dtb), kw(f_not(p))));
  auto t_record = kf(implies(kf(db), kft(dtb)));
  auto t_probe = kwt(implies(kwt(pt), kf(db)));
  // Each statement travels up the reporting chain.
  auto l1 = kf(t_friend);
  auto l2 = kwt(t_record);
  auto l3 = kw(t_probe);
  auto l4 = kwt(l1);
  auto l5 = kw(l4);
  auto l6 = kw(l2);
  // The double-success branch is realized and announced.
  auto n1 = kwt(pt);
  auto n2 = kw(p);
  auto n3 = kw(n1);
  kb.formulas = {t_friend, t_record, t_probe, l1, l2, l3,
                 l4,       l5,       l6,      n1, n2, n3};
  kb.tautology_stock = {0, 1, 2};
  kb.announcements = {9, 10, 11};
  kb.trust.edges = {{"F~", "4", "W", "3-4"},
                    {"W", "3-4", "W~", "2-3"},
                    {"W~", "2-3", "F", "1-2"},
                    {"F", "1-2", "F~", "0-2"},
                    {"W", "3-4", "W", "3-4"}};
  return kb;
}

FrMilestones fr_milestones() {
  auto p = atom("PcL!=0");
  auto pt = atom("PcL~!=0");
  auto db = atom("d=b");
  auto kf = [&](FormulaPtr b) { return knows("F", "1-2", std::move(b)); };
  auto kwt = [&](FormulaPtr b) { return knows("W~", "2-3", std::move(b)); };
  auto kw = [&](FormulaPtr b) { return knows("W", "3-4", std::move(b)); };
  FrMilestones m;
  m.friend_chain = kw(kwt(kf(implies(kf(db), kw(f_not(p))))));
  m.observer_link = kw(kwt(implies(kwt(pt), kw(f_not(p)))));
  m.clash = kw(f_and(p, f_not(p)));
  return m;
}

namespace {

FormulaPtr strip_context(const FormulaPtr& f) {
  switch (f->kind) {
    case FormulaKind::kAtom:
      return f;
    case FormulaKind::kNot:
      return f_not(strip_context(f->child));
    case FormulaKind::kAnd:
      return f_and(strip_context(f->left), strip_context(f->right));
    case FormulaKind::kImplies:
      return implies(strip_context(f->left), strip_context(f->right));
    case FormulaKind::kKnows:
      return knows(f->label, f->time, strip_context(f->child));
  }
  return f;
}

int find_modulo_context(const std::vector<FormulaPtr>& closure,
                        const FormulaPtr& target) {
  std::string t = strip_context(target)->text();
  for (size_t i = 0; i < closure.size(); ++i)
    if (strip_context(closure[i])->text() == t) return static_cast<int>(i);
  return -1;
}

}  // namespace

FrRunResult fr_run_kb(const KnowledgeBase& kb, int max_depth) {
  ClosureResult cr = derive_closure(kb, max_depth);
  FrRunResult r;
  r.rounds = cr.rounds;
  r.depth_exceeded = cr.depth_exceeded;
  FrMilestones ms = fr_milestones();
  int i_chain = find_modulo_context(cr.closure, ms.friend_chain);
  int i_link = find_modulo_context(cr.closure, ms.observer_link);
  r.found_friend_chain = i_chain >= 0;
  r.found_observer_link = i_link >= 0;
  if (!cr.blocked.empty()) r.blocked_step = cr.blocked.front();
  for (const auto& line : trust_context_audit(kb))
    if (line.find("undefined") != std::string::npos ||
        line.find("cross-context") != std::string::npos)
      r.notes.push_back(line);
  if (!cr.contradiction) {
    r.verdict = FrVerdict::kConsistent;
    r.trace = cr.trace;
    return r;
  }
  r.verdict = FrVerdict::kContradiction;
  r.contradiction = cr.contradiction;
  // Report the ancestry of the clash together with the milestone formulas,
  // renumbered in derivation order.
  std::set<int> keep;
  std::vector<int> work = {cr.contradiction_step};
  if (i_chain >= 0) work.push_back(i_chain);
  if (i_link >= 0) work.push_back(i_link);
  while (!work.empty()) {
    int k = work.back();
    work.pop_back();
    if (!keep.insert(k).second) continue;
    for (int p : cr.trace.steps[k].premises) work.push_back(p);
  }
  std::map<int, int> renumber;
  for (int k : keep) renumber.emplace(k, static_cast<int>(renumber.size()));
  for (int k : keep) {
    ProofStep s = cr.trace.steps[k];
    for (int& p : s.premises) p = renumber.at(p);
    r.trace.steps.push_back(std::move(s));
  }
  return r;
}

FrRunResult fr_run(TrustMode mode, int max_depth) {
  return fr_run_kb(fr_build_kb(mode), max_depth);
}

KnowledgeBase ablate_trust_edge(const KnowledgeBase& kb, int edge_index) {
  if (edge_index < 0 ||
      edge_index >= static_cast<int>(kb.trust.edges.size()))
    throw PreconditionViolated("ablate_trust_edge: no such edge");
  KnowledgeBase out = kb;
  out.trust.edges.erase(out.trust.edges.begin() + edge_index);
  return out;
}

namespace {

KnowledgeBase drop_formulas(const KnowledgeBase& kb,
                            const std::vector<bool>& drop) {
  KnowledgeBase out = kb;
  out.formulas.clear();
  out.tautology_stock.clear();
  out.announcements.clear();
  std::vector<int> remap(kb.formulas.size(), -1);
  for (size_t i = 0; i < kb.formulas.size(); ++i) {
    if (drop[i]) continue;
    remap[i] = static_cast<int>(out.formulas.size());
    out.formulas.push_back(kb.formulas[i]);
  }
  for (int s : kb.tautology_stock)
    if (remap[s] >= 0) out.tautology_stock.push_back(remap[s]);
  for (int a : kb.announcements)
    if (remap[a] >= 0) out.announcements.push_back(remap[a]);
  return out;
}

}  // namespace

KnowledgeBase ablate_tautology(const KnowledgeBase& kb, int stock_position) {
  if (stock_position < 0 ||
      stock_position >= static_cast<int>(kb.tautology_stock.size()))
    throw PreconditionViolated("ablate_tautology: no such stock entry");
  const FormulaPtr& target = kb.formulas[kb.tautology_stock[stock_position]];
  std::vector<bool> drop(kb.formulas.size(), false);
  for (size_t i = 0; i < kb.formulas.size(); ++i)
    drop[i] = contains_subformula(kb.formulas[i], target);
  return drop_formulas(kb, drop);
}

KnowledgeBase ablate_announcements(const KnowledgeBase& kb) {
  std::vector<bool> drop(kb.formulas.size(), false);
  for (int a : kb.announcements) drop[a] = true;
  return drop_formulas(kb, drop);
}

std::vector<std::string> trust_context_audit(const KnowledgeBase& kb) {
  std::vector<std::string> out;
  for (const auto& e : kb.trust.edges) {
    std::string line = "trust " + e.text() + ": ";
    if (kb.trust.mode != TrustMode::kContextual) {
      out.push_back(line + "context check disabled (plain mode)");
      continue;
    }
    const AgentDecl* ai = kb.find_agent(e.truster, e.truster_time);
    const AgentDecl* aj = kb.find_agent(e.trusted, e.trusted_time);
    if (!ai || !ai->context)
      line += "truster context undefined; treated as incompatible";
    else if (!aj || !aj->context)
      line += "trusted context undefined; treated as incompatible";
    else if (*ai->context != *aj->context)
      line += "cross-context (" + *ai->context + " vs " + *aj->context +
              "); applications refused";
    else
      line += "shared context " + *ai->context;
    out.push_back(line);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> formula_tokens(const std::string& src) {
  std::string spaced;
  for (char ch : src) {
    if (ch == '(' || ch == ')') {
      spaced += ' ';
      spaced += ch;
      spaced += ' ';
    } else {
      spaced += ch;
    }
  }
  std::vector<std::string> toks;
  std::istringstream is(spaced);
  std::string t;
  while (is >> t) toks.push_back(t);
  return toks;
}

struct FormulaParser {
  const KnowledgeBase& kb;
  TrustMode mode;
  int lineno;
  std::vector<std::string> toks;
  size_t pos = 0;

  [[noreturn]] void fail(const std::string& m) const {
    throw ValidationError("kb line " + std::to_string(lineno) + ": " + m);
  }
  bool done() const { return pos >= toks.size(); }
  const std::string& peek() const {
    if (done()) fail("formula ends unexpectedly");
    return toks[pos];
  }
  std::string next() {
    std::string t = peek();
    ++pos;
    return t;
  }
  void expect(const std::string& t) {
    if (done() || toks[pos] != t) fail("expected '" + t + "'");
    ++pos;
  }

  FormulaPtr parse() {
    FormulaPtr f = implication();
    if (!done()) fail("unexpected token '" + peek() + "'");
    return f;
  }

  FormulaPtr implication() {
    FormulaPtr l = conjunction();
    if (!done() && peek() == "->") {
      next();
      return implies(l, conjunction());
    }
    return l;
  }

  FormulaPtr conjunction() {
    FormulaPtr l = unary();
    while (!done() && peek() == "&") {
      next();
      l = f_and(l, unary());
    }
    return l;
  }

  FormulaPtr unary() {
    std::string t = next();
    if (t == "not") return f_not(unary());
    if (t == "(") {
      FormulaPtr f = implication();
      expect(")");
      return f;
    }
    if (t.rfind("K{", 0) == 0) {
      if (t.back() != '}') fail("malformed knowledge operator '" + t + "'");
      std::string head = t.substr(2, t.size() - 3);
      auto at = head.find('@');
      if (at == std::string::npos) fail("agent tag needs '@': '" + head + "'");
      std::string name = head.substr(0, at);
      std::string time = head.substr(at + 1);
      const AgentDecl* a = kb.find_agent(name, time);
      if (!a) fail("unknown agent '" + head + "'");
      expect("(");
      FormulaPtr body = implication();
      expect(")");
      std::optional<std::string> ctx;
      if (mode == TrustMode::kContextual) ctx = a->context;
      return knows(name, time, ctx, body);
    }
    bool declared = false;
    for (const auto& at : kb.atoms) declared = declared || at == t;
    if (!declared) fail("unknown atom '" + t + "'");
    return atom(t);
  }
};

}  // namespace

KnowledgeBase load_scenario(const std::string& path, TrustMode mode) {
  std::ifstream in(path);
  if (!in) throw ValidationError("kb file not readable: " + path);
  KnowledgeBase kb;
  kb.trust.mode = mode;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& m) {
    throw ValidationError("kb line " + std::to_string(lineno) + ": " + m);
  };
  auto parse_agent_tag = [&](const std::string& t, std::string* name,
                             std::string* time) {
    auto at = t.find('@');
    if (at == std::string::npos || at == 0 || at + 1 == t.size())
      fail("agent tag needs name@time: '" + t + "'");
    *name = t.substr(0, at);
    *time = t.substr(at + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream is(line);
    std::string directive;
    if (!(is >> directive)) continue;
    if (directive == "atom") {
      std::string name, extra;
      if (!(is >> name)) fail("atom needs a name");
      if (is >> extra) fail("trailing tokens after atom name");
      for (const auto& a : kb.atoms)
        if (a == name) fail("duplicate atom '" + name + "'");
      kb.atoms.push_back(name);
    } else if (directive == "agent") {
      std::string tag, kw, label, extra;
      if (!(is >> tag)) fail("agent needs a name@time tag");
      AgentDecl d;
      parse_agent_tag(tag, &d.name, &d.time);
      if (is >> kw) {
        if (kw != "context" || !(is >> label))
          fail("expected 'context <label>'");
        if (is >> extra) fail("trailing tokens after context label");
        if (mode == TrustMode::kContextual) d.context = label;
      }
      if (kb.find_agent(d.name, d.time))
        fail("duplicate agent '" + d.name + "@" + d.time + "'");
      kb.agents.push_back(d);
    } else if (directive == "trust") {
      std::string from, arrow, to, extra;
      if (!(is >> from >> arrow >> to) || arrow != "->")
        fail("expected 'trust a@t -> b@t'");
      if (is >> extra) fail("trailing tokens after trust edge");
      TrustEdge e;
      parse_agent_tag(from, &e.truster, &e.truster_time);
      parse_agent_tag(to, &e.trusted, &e.trusted_time);
      if (!kb.find_agent(e.truster, e.truster_time))
        fail("unknown agent '" + from + "'");
      if (!kb.find_agent(e.trusted, e.trusted_time))
        fail("unknown agent '" + to + "'");
      kb.trust.edges.push_back(e);
    } else if (directive == "taut" || directive == "seed" ||
               directive == "announce") {
      std::string rest;
      std::getline(is, rest);
      FormulaParser fp{kb, mode, lineno, formula_tokens(rest), 0};
      if (fp.toks.empty()) fail("missing formula");
      FormulaPtr f = fp.parse();
      int idx = static_cast<int>(kb.formulas.size());
      kb.formulas.push_back(f);
      if (directive == "taut") kb.tautology_stock.push_back(idx);
      if (directive == "announce") kb.announcements.push_back(idx);
    } else {
      fail("unknown directive '" + directive + "'");
    }
  }
  return kb;
}

// ---------------------------------------------------------------------------
// Protocol probabilities
// ---------------------------------------------------------------------------

Rational::Rational(long long n, long long d) : num(n), den(d) {
  if (den == 0) throw PreconditionViolated("Rational: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  long long g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
}

Rational Rational::operator+(const Rational& o) const {
  return Rational(num * o.den + o.num * den, den * o.den);
}

Rational Rational::operator*(const Rational& o) const {
  return Rational(num * o.num, den * o.den);
}

bool Rational::operator==(const Rational& o) const {
  return num == o.num && den == o.den;
}

double Rational::value() const {
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string Rational::to_string() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

namespace {

// The post-protocol state has three equal-weight branches over the bit
// pattern (d~, m~, d, m): 0000, 1100, 1111, each with amplitude 1/sqrt(3).
// A lab-pair test vector assigns sign +1 to the a,u component and -1
// (success) or +1 (partner) to the b,w component, scaled by 1/sqrt(2), so
// every joint amplitude is an integer times 1/(2 sqrt(3)).
constexpr int kBranches[3][4] = {{0, 0, 0, 0}, {1, 1, 0, 0}, {1, 1, 1, 1}};

int pair_sign(int d, int m, bool success) {
  if (d == 0 && m == 0) return 1;
  if (d == 1 && m == 1) return success ? -1 : 1;
  return 0;
}

Rational joint_exact(bool tilde_success, bool success) {
  int k = 0;
  for (const auto& b : kBranches)
    k += pair_sign(b[0], b[1], tilde_success) * pair_sign(b[2], b[3], success);
  return Rational(static_cast<long long>(k) * k, 12);
}

StateVector protocol_state() {
  StateVector psi(16);
  const double w = 1.0 / std::sqrt(3.0);
  for (const auto& b : kBranches)
    psi.amps[((b[0] * 2 + b[1]) * 2 + b[2]) * 2 + b[3]] = w;
  return psi;
}

StateVector pair_vector(bool success) {
  StateVector v(4);
  v.amps[0] = 1.0 / std::sqrt(2.0);
  v.amps[3] = (success ? -1.0 : 1.0) / std::sqrt(2.0);
  return v;
}

double project_prob(const Operator& p, const StateVector& psi) {
  return std::real(inner(psi, p.apply(psi)));
}

}  // namespace

Rational fr_quantum_probability() { return joint_exact(true, true); }

FrProbabilities fr_probability_report() {
  FrProbabilities out;
  out.both_ok = joint_exact(true, true);
  out.joint = {joint_exact(true, true), joint_exact(true, false),
               joint_exact(false, true), joint_exact(false, false)};
  // Both friends' records agree with the branch count: b in two of three.
  out.friend_b = Rational(2, 3);
  out.partner_both = joint_exact(false, false);

  StateVector psi = protocol_state();
  Operator pc = Operator::outer(pair_vector(true), pair_vector(true));
  Operator qc = Operator::identity(4) - pc;
  std::array<Operator, 4> joint_ops = {
      tensor_product(pc, pc), tensor_product(pc, qc), tensor_product(qc, pc),
      tensor_product(qc, qc)};
  double gap = 0;
  double total = 0;
  for (int i = 0; i < 4; ++i) {
    double v = project_prob(joint_ops[i], psi);
    total += v;
    gap = std::max(gap, std::abs(v - out.joint[i].value()));
  }
  gap = std::max(gap, std::abs(total - 1.0));

  StateVector init(2);
  init.amps[0] = std::sqrt(1.0 / 3.0);
  init.amps[1] = std::sqrt(2.0 / 3.0);
  double b_prob = std::norm(inner(StateVector::basis(2, 1), init));
  gap = std::max(gap, std::abs(b_prob - out.friend_b.value()));

  StateVector partner_pair =
      tensor_product(pair_vector(false), pair_vector(false));
  double partner_prob = std::norm(inner(partner_pair, psi));
  gap = std::max(gap, std::abs(partner_prob - out.partner_both.value()));
  out.numeric_gap = gap;
  return out;
}

double expected_halting_rounds(double p) {
  if (!(p > 0.0) || p > 1.0)
    throw PreconditionViolated("expected_halting_rounds: p must be in (0,1]");
  return 1.0 / p;
}

double expected_halting_rounds() {
  return expected_halting_rounds(fr_quantum_probability().value());
}

double simulate_halting(int trials, std::uint64_t seed) {
  if (trials < 1)
    throw PreconditionViolated("simulate_halting: trials must be >= 1");
  const double p = fr_quantum_probability().value();
  Rng rng(seed);
  double total = 0;
  for (int t = 0; t < trials; ++t) {
    int rounds = 1;
    while (rng.uniform01() >= p) ++rounds;
    total += rounds;
  }
  return total / trials;
}

CheckReport context_commutation_report() {
  CheckReport report;
  Operator pa2 = Operator::outer(StateVector::basis(2, 0),
                                 StateVector::basis(2, 0));
  Operator pb2 = Operator::outer(StateVector::basis(2, 1),
                                 StateVector::basis(2, 1));
  Operator id2 = Operator::identity(2);
  Operator pa = tensor_product(pa2, id2);
  Operator pb = tensor_product(pb2, id2);
  Operator pc = Operator::outer(pair_vector(true), pair_vector(true));
  Operator qc = Operator::identity(4) - pc;

  double cross = (pb * pc - pc * pb).max_abs();
  report.add("cross_context_commutator", std::abs(cross - 0.5) <= 1e-12,
             cross, 0.5, 1e-12);
  double rec = (pa * pb - pb * pa).max_abs();
  report.add("record_basis_pair_commutes", rec <= 1e-14, rec, 0.0, 1e-14);
  double ent = (pc * qc - qc * pc).max_abs();
  report.add("entangled_basis_pair_commutes", ent <= 1e-14, ent, 0.0, 1e-14);
  return report;
}

}  // namespace qfv
