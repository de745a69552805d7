#include "causalid/trapdoor.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalid/errors.hpp"

namespace causalid {

using json = nlohmann::ordered_json;

NameSet candidates(const Expr& e, const DistTerm& query) {
  return set_minus(set_minus(free_vars(e), query.outcomes), query.interventions);
}

namespace {

// Advances a mixed-radix counter; false once every combination has been seen.
bool bump(std::vector<int>& digits, const std::vector<int>& cards) {
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (++digits[i] < cards[i]) return true;
    digits[i] = 0;
  }
  return false;
}

}  // namespace

IndependenceCheck check_functional_independence(const Expr& e, const std::string& v,
                                                const DistOracle& oracle, double tol) {
  const NameSet others = set_minus(free_vars(e), NameSet{v});
  std::vector<int> cards;
  cards.reserve(others.size());
  for (const auto& name : others) cards.push_back(oracle.cardinality(name));
  const int vcard = oracle.cardinality(v);

  IndependenceCheck out;
  std::vector<int> digits(others.size(), 0);
  Assignment a;
  do {
    for (std::size_t i = 0; i < others.size(); ++i) a[others[i]] = digits[i];
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int val = 0; val < vcard; ++val) {
      a[v] = val;
      EvalDiag diag;
      const double p = evaluate(e, oracle, a, &diag);
      if (diag.zero_over_zero > 0)
        throw EvalError("functional-independence check for " + v +
                        " hit an empty stratum: the oracle is not strictly positive");
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    out.max_deviation = std::max(out.max_deviation, hi - lo);
  } while (bump(digits, cards));
  out.independent = out.max_deviation <= tol;
  return out;
}

ProjectionCheck check_projection(const Admg& g, const std::vector<DistTerm>& inputs,
                                 const DistTerm& query, const std::string& v,
                                 const SearchBudget& budget) {
  if (!g.has_vertex(v))
    throw InputError("projection check: " + v + " is not a vertex of the graph");
  const NameSet query_vars =
      set_union(set_union(query.outcomes, query.interventions), query.conditions);
  if (contains(query_vars, v))
    throw InputError("cannot project " + v + " away: the query mentions it");

  const Admg projected = g.latent_project(set_minus(g.vertex_names(), NameSet{v}));

  ProjectionCheck out;
  std::vector<DistTerm> usable;
  for (const auto& d : inputs) {
    if (contains(d.interventions, v) || contains(d.conditions, v)) {
      out.dropped_inputs.push_back(render_term(d, Style::text));
      out.warnings.push_back("dropped input " + out.dropped_inputs.back() + ": " + v +
                             " appears in a conditioning or intervention role, which "
                             "the projected problem cannot express");
      continue;
    }
    if (contains(d.outcomes, v)) {
      NameSet rest = set_minus(d.outcomes, NameSet{v});
      if (rest.empty()) {
        out.dropped_inputs.push_back(render_term(d, Style::text));
        out.warnings.push_back("dropped input " + out.dropped_inputs.back() +
                               ": marginalizing " + v + " leaves no outcome");
        continue;
      }
      usable.push_back(make_term(std::move(rest), d.interventions, d.conditions, d.regime));
      continue;
    }
    usable.push_back(d);
  }

  if (usable.empty()) {
    out.warnings.push_back("no input survives the projection; nothing to derive from");
    return out;  // unknown_within_budget
  }
  const auto found = derive(projected, usable, query, budget, &out.stats);
  out.outcome = found ? ProjectionOutcome::found : ProjectionOutcome::unknown_within_budget;
  return out;
}

TrapdoorReport analyze_trapdoors(const Admg& g, const std::vector<DistTerm>& inputs,
                                 const DistTerm& query, const Expr& functional,
                                 const DistOracle* oracle, const SearchBudget& budget,
                                 double tol) {
  TrapdoorReport r;
  r.budget = budget;
  r.tol = tol;
  r.independence_checked = oracle != nullptr;
  r.candidates = candidates(functional, query);

  const int n = static_cast<int>(r.candidates.size());
  std::vector<ProjectionCheck> proj(n);
  std::vector<char> projectable(n, 1);

#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) {
    const std::string& v = r.candidates[i];
    if (contains(query.conditions, v)) {
      // A conditioning variable of the query is part of the question, not a
      // knob; removing it would change what is being asked.
      projectable[i] = 0;
      proj[i].warnings.push_back("the query conditions on " + v +
                                 "; the projection check does not apply");
      continue;
    }
    try {
      proj[i] = check_projection(g, inputs, query, v, budget);
    } catch (const Error& err) {
      projectable[i] = 0;
      proj[i].warnings.push_back(err.what());
    }
  }

  for (int i = 0; i < n; ++i) {
    const std::string& v = r.candidates[i];
    bool independent = false;
    if (oracle) {
      r.independence_evidence[v] = check_functional_independence(functional, v, *oracle, tol);
      independent = r.independence_evidence.at(v).independent;
    }
    r.projection_evidence[v] = proj[i];
    if (independent && projectable[i] &&
        proj[i].outcome == ProjectionOutcome::unknown_within_budget)
      r.confirmed.push_back(v);
  }
  return r;
}

std::string trapdoor_report_json(const TrapdoorReport& r) {
  json j;
  j["candidates"] = r.candidates;
  j["confirmed"] = r.confirmed;
  j["tolerance"] = r.tol;
  j["independence_checked"] = r.independence_checked;
  j["budget"] = {{"max_expressions", r.budget.max_expressions},
                 {"max_depth", r.budget.max_depth},
                 {"time_limit", r.budget.time_limit},
                 {"heuristic", r.budget.heuristic}};
  json vars = json::object();
  for (const auto& v : r.candidates) {
    json entry = json::object();
    if (auto it = r.independence_evidence.find(v); it != r.independence_evidence.end())
      entry["independence"] = {{"independent", it->second.independent},
                               {"max_deviation", it->second.max_deviation}};
    if (auto it = r.projection_evidence.find(v); it != r.projection_evidence.end()) {
      const auto& p = it->second;
      json pj = {{"outcome", p.outcome == ProjectionOutcome::found
                                 ? "found"
                                 : "unknown-within-budget"},
                 {"expressions", p.stats.expressions},
                 {"depth", p.stats.depth},
                 {"seconds", p.stats.seconds},
                 {"budget_exhausted", p.stats.budget_exhausted}};
      if (!p.dropped_inputs.empty()) pj["dropped_inputs"] = p.dropped_inputs;
      if (!p.warnings.empty()) pj["warnings"] = p.warnings;
      entry["projection"] = pj;
    }
    vars[v] = entry;
  }
  j["variables"] = vars;
  return j.dump(2);
}

}  // namespace causalid
