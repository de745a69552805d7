#pragma once

#include <map>
#include <string>
#include <vector>

#include "causalid/admg.hpp"
#include "causalid/identify.hpp"
#include "causalid/symexpr.hpp"

namespace causalid {

/// Free variables of the functional that the query itself does not fix: the
/// knobs a user has to pin to a value before the formula can be estimated.
/// Regime-flagged conditions are not free (the sampling design fixes them).
NameSet candidates(const Expr& e, const DistTerm& query);

/// Outcome of comparing the evaluated functional across one variable's values.
struct IndependenceCheck {
  bool independent = false;
  /// Largest spread across the variable's values, over every assignment of
  /// the remaining free variables.
  double max_deviation = 0;
};

/// Tests whether the value of `v` is irrelevant to the functional under
/// `oracle`: for every assignment of the other free variables, the spread of
/// the evaluated formula over v's values must stay within `tol`. Meaningful
/// only with exact (distribution-level) oracles — sampling noise in fitted
/// tables swamps the comparison. A degenerate stratum (a 0/0 quotient) throws
/// EvalError, since it signals a positivity violation in the oracle.
IndependenceCheck check_functional_independence(const Expr& e, const std::string& v,
                                                const DistOracle& oracle,
                                                double tol = 1e-9);

enum class ProjectionOutcome {
  found,                  // the query is still derivable without v
  unknown_within_budget,  // no derivation found before a limit was hit
};

/// What happened when the derivation search was rerun with `v` projected out.
struct ProjectionCheck {
  ProjectionOutcome outcome = ProjectionOutcome::unknown_within_budget;
  SearchStats stats;
  /// Inputs that could not be restated without v (v conditioned or intervened
  /// on, or the sole outcome) and were left out of the projected problem.
  std::vector<std::string> dropped_inputs;
  std::vector<std::string> warnings;
};

/// Latent-projects `v` out of the graph and reruns the search with the inputs
/// restated over the surviving variables: an input with v among its outcomes
/// is marginalized over v, while one with v in a conditioning or intervention
/// role is dropped (the projected problem cannot express it). `found` proves
/// v is not a trapdoor; `unknown_within_budget` is the strongest claim a
/// bounded search can make in the other direction. Throws InputError when v
/// is not a graph vertex or the query itself mentions v.
ProjectionCheck check_projection(const Admg& g, const std::vector<DistTerm>& inputs,
                                 const DistTerm& query, const std::string& v,
                                 const SearchBudget& budget = {});

struct TrapdoorReport {
  NameSet candidates;
  /// Candidates that passed the independence check and were not re-derivable
  /// in their own latent projection within the recorded budget.
  NameSet confirmed;
  std::map<std::string, IndependenceCheck> independence_evidence;
  std::map<std::string, ProjectionCheck> projection_evidence;
  SearchBudget budget;  // limits the projection searches ran under
  double tol = 1e-9;
  /// False when no exact oracle was supplied; nothing is confirmed then.
  bool independence_checked = false;
};

/// Runs both checks on every candidate of `functional`. `oracle` may be null:
/// independence evidence is then absent and no variable can be confirmed,
/// though the projection evidence is still reported. Candidates are examined
/// independently (concurrently when several are present); the report is
/// deterministic for fixed arguments.
TrapdoorReport analyze_trapdoors(const Admg& g, const std::vector<DistTerm>& inputs,
                                 const DistTerm& query, const Expr& functional,
                                 const DistOracle* oracle,
                                 const SearchBudget& budget = {}, double tol = 1e-9);

std::string trapdoor_report_json(const TrapdoorReport& r);

}  // namespace causalid
