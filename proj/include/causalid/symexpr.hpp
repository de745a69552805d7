#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "causalid/names.hpp"

namespace causalid {

/// One distribution symbol P(outcomes | do(interventions), conditions).
/// `regime` is the subset of `conditions` that names sampling-regime context
/// (domain indicators, selection indicators): such variables render like any
/// other condition but are answered by an oracle's own regime rather than by
/// an assignment, and they do not count as free variables of a formula.
struct DistTerm {
  NameSet outcomes;
  NameSet interventions;
  NameSet conditions;
  NameSet regime;

  bool operator==(const DistTerm& o) const = default;
};

/// Validates invariants (sorted sets handled by make_set; outcomes nonempty;
/// roles pairwise disjoint; regime within conditions). Throws InputError.
DistTerm make_term(NameSet outcomes, NameSet interventions = {},
                   NameSet conditions = {}, NameSet regime = {});

bool term_less(const DistTerm& a, const DistTerm& b);

/// Variables an assignment must cover to evaluate the term.
NameSet needed_vars(const DistTerm& t);

/// True iff `atom` is computable from the single declared distribution
/// `declared` by marginalization and conditioning alone: interventions match
/// exactly, outcomes shrink, and any added conditioning variable was a
/// declared outcome.
bool covers(const DistTerm& declared, const DistTerm& atom);

enum class ExprKind { atom, product, quotient, sum };

class ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

/// Immutable expression tree over DistTerm atoms: products, quotients and
/// finite sums over value assignments of bound variables.
class ExprNode {
 public:
  ExprKind kind() const { return kind_; }
  const DistTerm& term() const { return term_; }             // atom
  const std::vector<Expr>& factors() const { return parts_; }  // product
  const Expr& numerator() const { return parts_[0]; }         // quotient
  const Expr& denominator() const { return parts_[1]; }       // quotient
  const NameSet& bound() const { return bound_; }             // sum
  const Expr& body() const { return parts_[0]; }              // sum

 private:
  friend Expr atom(DistTerm t);
  friend Expr product(std::vector<Expr> factors);
  friend Expr quotient(Expr num, Expr den);
  friend Expr sum(NameSet bound, Expr body);
  ExprNode() = default;

  ExprKind kind_ = ExprKind::atom;
  DistTerm term_;
  std::vector<Expr> parts_;
  NameSet bound_;
};

Expr atom(DistTerm t);
Expr product(std::vector<Expr> factors);   // >= 1 factor
Expr quotient(Expr num, Expr den);
Expr sum(NameSet bound, Expr body);  // bound nonempty, free in body, not rebound

bool expr_equal(const Expr& a, const Expr& b);
int expr_compare(const Expr& a, const Expr& b);  // total structural order

/// Free variables, excluding regime-flagged conditions and sum-bound names.
NameSet free_vars(const Expr& e);
/// As free_vars but counting regime-flagged conditions too.
NameSet free_vars_all(const Expr& e);
/// Union of all bound sets of Sum nodes anywhere in the tree.
NameSet bound_anywhere(const Expr& e);

using Assignment = std::map<std::string, int>;

/// Answers atom probabilities. Implementations hold one table (exact or
/// empirical) per declared input distribution and answer any atom that a
/// declared term covers; regime conditions are resolved internally.
class DistOracle {
 public:
  virtual ~DistOracle() = default;
  virtual int cardinality(const std::string& var) const = 0;
  /// P(t.outcomes = a(...) | do(t.interventions = a(...)), t.conditions = a(...)).
  virtual double atom_probability(const DistTerm& t, const Assignment& a) const = 0;
};

struct EvalDiag {
  int zero_over_zero = 0;  // quotients resolved by the 0/0 := 0 convention
};

/// Evaluates e at assignment a. Sums iterate each bound variable over its
/// cardinality. A zero factor makes a product zero even if a sibling factor
/// hits a degenerate stratum; 0/0 quotients evaluate to 0 (flagged in diag);
/// a nonzero numerator over a zero denominator throws EvalError.
double evaluate(const Expr& e, const DistOracle& oracle, const Assignment& a,
                EvalDiag* diag = nullptr);

/// Normal form: recursively sorted n-ary products, merged directly-nested
/// sums, sum factors hoisted out of products when no capture can occur,
/// sorted bound/variable sets. evaluate() is invariant under canonicalize().
Expr canonicalize(const Expr& e);

enum class Style { text, latex, json };

std::string render(const Expr& e, Style style);
std::string render_term(const DistTerm& t, Style style);

/// Inverse of render for the latex and json styles (text is render-only).
Expr parse_expr(const std::string& s, Style style);

/// Parses one distribution symbol, e.g. "P(Y,Z1 | do(X1,X2), S)".
DistTerm parse_term(const std::string& s);

/// Restates which conditioning variables are regime context: the term's (or
/// every atom's) regime becomes conditions ∩ regime_vars. Parsed text carries
/// no regime information, so this is how vertex-kind declarations reach terms.
DistTerm apply_regime(const DistTerm& t, const NameSet& regime_vars);
Expr apply_regime(const Expr& e, const NameSet& regime_vars);

/// If e has the back-door adjustment shape sum_Z P(out|query.do,Z) P(Z) with
/// Z disjoint from the query variables, returns Z (possibly empty for the
/// degenerate shape P(out|query.do)); otherwise nullopt.
std::optional<NameSet> is_adjustment(const Expr& e, const DistTerm& query);

}  // namespace causalid
