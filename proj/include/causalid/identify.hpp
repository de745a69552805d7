#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "causalid/admg.hpp"
#include "causalid/symexpr.hpp"

namespace causalid {

/// Rewrite rules the derivation engine searches over. The first five are the
/// graph-licensed do-calculus moves (each needs a d-separation certificate);
/// the rest are probability calculus and need no graph at all.
enum class Rule {
  insert_observation,           // P(A|do(D),C)       -> P(A|do(D),C,z)
  delete_observation,           // P(A|do(D),C,z)     -> P(A|do(D),C)
  exchange_action_observation,  // do(z) <-> z in the conditioning context
  insert_action,                // P(A|do(D),C)       -> P(A|do(D),do(z),C)
  delete_action,                // P(A|do(D),do(z),C) -> P(A|do(D),C)
  marginalize,                  // P(A,z|do(D),C)     -> P(A|do(D),C)
  condition_chain_rule,         // P(A,z|do(D),C)     -> P(A|do(D),C,z)
  product_compose,              // P(A|do(D),C,B) * P(B|do(D),C) -> P(A,B|do(D),C)
  quotient_condition,           // P(A,B|do(D),C) / P(B|do(D),C) -> P(A|do(D),C,B)
};

/// Stable identifier used in traces and JSON, e.g. "docalc-2-exchange-action-observation".
std::string rule_name(Rule r);

/// The d-separation statement licensing a do-calculus step: a and b are
/// d-separated given c in the graph mutilated by `cut`.
struct SideCondition {
  Mutilation cut;
  NameSet a, b, c;

  bool operator==(const SideCondition& o) const;
};

struct DerivationStep {
  Rule rule;
  /// Premise indices: 0..k-1 name the k inputs, k+j names the conclusion of
  /// steps[j]. Always one premise except for the two binary rules.
  std::vector<int> premises;
  /// Variable moved by a single-variable rule; empty for the binary rules.
  std::string moved;
  /// The distribution this step's conclusion denotes.
  DistTerm term;
  /// Formula computing `term` from the inputs. Do-calculus steps preserve the
  /// premise formula (the step asserts equality of two distributions); when
  /// `term` is directly computable from one input the formula collapses to a
  /// single atom.
  Expr conclusion;
  /// Present on do-calculus steps only.
  std::optional<SideCondition> side_condition;
};

struct Derivation {
  std::vector<DistTerm> inputs;
  DistTerm query;
  std::vector<DerivationStep> steps;  // topologically ordered
  Expr result;                        // equals the last step's conclusion
};

struct SearchBudget {
  std::int64_t max_expressions = 1'000'000;  // distinct distributions committed
  int max_depth = 32;                        // rule applications along any path
  double time_limit = 60.0;                  // wall-clock seconds
  /// Expand distributions sharing more variables with the query first. Off by
  /// default: the plain breadth-first order is the reference behaviour.
  bool heuristic = false;
};

struct SearchStats {
  std::int64_t expressions = 0;  // distributions committed, inputs included
  int depth = 0;                 // last fully committed search level
  double seconds = 0.0;
  bool budget_exhausted = false;  // stopped by a limit rather than exhaustion
};

/// Searches for a derivation of `query` from `inputs` over graph `g`.
/// Conditioning variables whose vertex kind is not ordinary are normalized to
/// regime markers on both inputs and query. Returns nullopt when the search
/// space or a budget limit is exhausted first — which says nothing about
/// non-identifiability. If the query equals an input, the derivation has no
/// steps. The result is deterministic for fixed arguments regardless of the
/// OpenMP thread count. Malformed terms (unknown vertices, overlapping roles)
/// throw InputError.
std::optional<Derivation> derive(const Admg& g, const std::vector<DistTerm>& inputs,
                                 const DistTerm& query, const SearchBudget& budget = {},
                                 SearchStats* stats = nullptr);

/// Independent re-check of a derivation: every do-calculus step must carry
/// exactly the certificate its rule demands and the certificate must hold via
/// d_separated on the recorded mutilation; probability steps must carry none;
/// every conclusion must be either the structural composition of its premises'
/// conclusions or an atom covered by an input. Returns false on any violation.
/// Out-of-range premise references throw InputError.
bool verify(const Admg& g, const Derivation& d);

/// An expression together with the distribution term it denotes.
struct TermExpr {
  DistTerm term;
  Expr expr;
};

/// One search frontier step: every distribution reachable from `known` by a
/// single rule application, paired with a formula over the known expressions.
/// Terms already in `known` are not repeated; each new term appears once.
std::vector<TermExpr> expand(const Admg& g, const std::vector<TermExpr>& known);

/// Convenience overload wrapping each expression via denoted_term.
std::vector<Expr> expand(const Admg& g, const std::vector<Expr>& known);

/// The distribution a rule-built expression denotes: atoms denote their term,
/// sums marginalize outcomes, quotients condition, products compose factors
/// with matching contexts. Throws InputError when the shape denotes no single
/// distribution.
DistTerm denoted_term(const Expr& e);

/// Audit-friendly JSON: inputs, query, per-step rule names, moved variables,
/// premise indices, conclusions, and full d-separation certificates.
std::string derivation_json(const Derivation& d);

}  // namespace causalid
