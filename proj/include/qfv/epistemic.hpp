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

#ifndef QFV_EPISTEMIC_HPP_
#define QFV_EPISTEMIC_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qfv/report.hpp"

namespace qfv {

// ---------------------------------------------------------------------------
// Formulas
// ---------------------------------------------------------------------------

enum class FormulaKind { kAtom, kNot, kAnd, kImplies, kKnows };

struct EpistemicFormula;
using FormulaPtr = std::shared_ptr<const EpistemicFormula>;

// Immutable formula tree.  Knows nodes carry the knower's name, its time tag
// (part of the agent's identity, "W@3-4") and, in contextual mode, the label
// of the measurement context the agent operates in.  Formulas compare equal
// iff their canonical renderings match.
struct EpistemicFormula {
  FormulaKind kind = FormulaKind::kAtom;
  std::string label;                   // atom label, or agent name for Knows
  std::string time;                    // Knows only
  std::optional<std::string> context;  // Knows only
  FormulaPtr child;                    // Not body / Knows body
  FormulaPtr left, right;              // And / Implies

  std::string text() const;
};

FormulaPtr atom(const std::string& label);
FormulaPtr f_not(FormulaPtr f);
FormulaPtr f_and(FormulaPtr a, FormulaPtr b);
FormulaPtr implies(FormulaPtr a, FormulaPtr b);
FormulaPtr knows(const std::string& agent, const std::string& time,
                 FormulaPtr body);
FormulaPtr knows(const std::string& agent, const std::string& time,
                 const std::optional<std::string>& context, FormulaPtr body);

bool same_formula(const FormulaPtr& a, const FormulaPtr& b);
bool contains_subformula(const FormulaPtr& f, const FormulaPtr& sub);

// ---------------------------------------------------------------------------
// Scenario declarations
// ---------------------------------------------------------------------------

struct AgentDecl {
  std::string name;
  std::string time;
  std::optional<std::string> context;

  std::string key() const { return name + "@" + time; }
};

enum class TrustMode { kPlain, kContextual };

struct TrustEdge {
  std::string truster, truster_time;
  std::string trusted, trusted_time;

  std::string text() const {
    return truster + "@" + truster_time + " -> " + trusted + "@" + trusted_time;
  }
};

struct TrustRelation {
  std::vector<TrustEdge> edges;
  TrustMode mode = TrustMode::kPlain;
};

struct RuleSet {
  bool distribution = true;
  bool trust = true;
  bool positive_introspection = true;
  bool negative_introspection = true;
  bool generalization = true;
};

struct KnowledgeBase {
  std::vector<std::string> atoms;
  std::vector<AgentDecl> agents;
  std::vector<FormulaPtr> formulas;  // seeds, insertion order
  std::vector<int> tautology_stock;  // indices into formulas
  std::vector<int> announcements;    // indices into formulas
  TrustRelation trust;
  RuleSet rules;

  const AgentDecl* find_agent(const std::string& name,
                              const std::string& time) const;
};

// ---------------------------------------------------------------------------
// Derivation engine
// ---------------------------------------------------------------------------

struct ProofStep {
  std::string rule;           // "seed", "distribution", "trust",
                              // "positive_introspection",
                              // "negative_introspection", "generalization",
                              // "univaluation"
  std::vector<int> premises;  // indices of earlier steps
  FormulaPtr conclusion;
};

struct ProofTrace {
  std::vector<ProofStep> steps;
};

// A trust application the contextual mode refused.  `step` is the premise's
// index in the trace, `reason` says why ("context mismatch (C2 vs C1)" or
// "truster context undefined").
struct BlockedStep {
  int step = -1;
  FormulaPtr formula;
  TrustEdge edge;
  std::string reason;
};

struct ClosureResult {
  std::vector<FormulaPtr> closure;  // one entry per trace step
  ProofTrace trace;
  std::optional<FormulaPtr> contradiction;
  int contradiction_step = -1;
  bool depth_exceeded = false;  // cap hit while the closure was still growing
  int rounds = 0;
  std::vector<BlockedStep> blocked;
};

// Forward chaining to fixpoint or depth cap.  Each round runs the rules in a
// fixed order (distribution, trust, introspections, generalization); within a
// phase premises are drawn from the phase-start snapshot and scanned in
// insertion order, so traces are deterministic.  A same-agent clash
// Knows(i,A) / Knows(i,not A) stops the derivation immediately and is
// reported as Knows(i, A & not A).
ClosureResult derive_closure(const KnowledgeBase& kb, int max_depth);

// Independent re-validation of a trace against the rule set: structural
// matchers per rule, no shared machinery with the engine.  On failure *why
// names the offending step.
bool validate_trace(const KnowledgeBase& kb, const ProofTrace& trace,
                    std::string* why = nullptr);

// ---------------------------------------------------------------------------
// The two-lab nested-observer scenario
// ---------------------------------------------------------------------------

// Agent instances: F~@0-2 and F@1-2 measure in the {a,b} basis (context C1),
// W~@2-3 and W@3-4 in the entangled basis (context C2), F~@4 only hears the
// final report and has no measurement context.
KnowledgeBase fr_build_kb(TrustMode mode);

// The three structural milestones of the plain-mode derivation: W's nested
// knowledge of the friend-level implication chain, the observer-level link
// it collapses to, and the final same-agent clash.
struct FrMilestones {
  FormulaPtr friend_chain;
  FormulaPtr observer_link;
  FormulaPtr clash;
};
FrMilestones fr_milestones();

enum class FrVerdict { kContradiction, kConsistent };

struct FrRunResult {
  FrVerdict verdict = FrVerdict::kConsistent;
  ProofTrace trace;  // pruned to the contradiction's ancestry when found,
                     // full log otherwise
  std::optional<FormulaPtr> contradiction;
  std::optional<BlockedStep> blocked_step;  // first refused trust application
  bool found_friend_chain = false;
  bool found_observer_link = false;
  bool depth_exceeded = false;
  int rounds = 0;
  std::vector<std::string> notes;  // flagged trust edges, audit remarks
};

FrRunResult fr_run(TrustMode mode, int max_depth = 60);
FrRunResult fr_run_kb(const KnowledgeBase& kb, int max_depth = 60);

// Single ablations for the necessity survey.  Removing a tautology also
// removes every seed that carries a copy of it, since the communicated
// liftings embed the statement verbatim.
KnowledgeBase ablate_trust_edge(const KnowledgeBase& kb, int edge_index);
KnowledgeBase ablate_tautology(const KnowledgeBase& kb, int stock_position);
KnowledgeBase ablate_announcements(const KnowledgeBase& kb);

// One line per trust edge: context compatibility under the kb's mode.
std::vector<std::string> trust_context_audit(const KnowledgeBase& kb);

// Scenario file loader; structural problems raise ValidationError with
// "kb line N: ..." messages.  Context tags attach to formulas only in
// contextual mode.
KnowledgeBase load_scenario(const std::string& path, TrustMode mode);

// ---------------------------------------------------------------------------
// Protocol probabilities
// ---------------------------------------------------------------------------

struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n, long long d);
  Rational operator+(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  bool operator==(const Rational& o) const;
  double value() const;
  std::string to_string() const;  // "p/q", plain "p" for integers
};

struct FrProbabilities {
  Rational both_ok;               // joint success of the two entangled tests
  std::array<Rational, 4> joint;  // (ok~,ok), (ok~,fail), (fail,ok),
                                  // (fail,fail)
  Rational friend_b;              // first friend sees b
  Rational partner_both;          // both labs project on the partner vector
  double numeric_gap = 0;         // worst exact-vs-float disagreement
};

// Exact squared amplitude of the double-success branch, 1/12.
Rational fr_quantum_probability();

// Exact outcome table plus the 16-dimensional floating-point cross-check.
FrProbabilities fr_probability_report();

// Geometric halting statistics for the repeat-until-success protocol.
double expected_halting_rounds();
double expected_halting_rounds(double p);
double simulate_halting(int trials, std::uint64_t seed);

// Numerical backing for the context tags: a C1 projector and a C2 projector
// on the friend+memory pair fail to commute, while same-context pairs
// commute exactly.
CheckReport context_commutation_report();

}  // namespace qfv

#endif  // QFV_EPISTEMIC_HPP_
