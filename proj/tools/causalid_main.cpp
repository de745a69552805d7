// Command-line front end: identify a causal query from declared inputs, scan
// the resulting functional for trapdoor variables, plug empirical tables into
// it, or run the bundled simulation study.
//
// Exit codes: 0 success; 2 input that fails to parse; 3 no derivation within
// the search budget (which proves nothing about non-identifiability); 4 an
// estimation failure such as an empty stratum or an unmatched atom; 1 any
// other error.
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "causalid/dsl.hpp"
#include "causalid/errors.hpp"
#include "causalid/estimate.hpp"
#include "causalid/identify.hpp"
#include "causalid/scmsim.hpp"
#include "causalid/symexpr.hpp"
#include "causalid/trapdoor.hpp"

using namespace causalid;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitUnknown = 3;
constexpr int kExitEstimation = 4;

struct SearchFlags {
  SearchBudget budget;
  std::string style_name = "text";

  void attach(CLI::App* cmd) {
    cmd->add_option("--budget-exprs", budget.max_expressions,
                    "Maximum number of distinct distributions to commit");
    cmd->add_option("--budget-depth", budget.max_depth,
                    "Maximum rule applications along any derivation path");
    cmd->add_option("--time-limit", budget.time_limit, "Search wall-clock limit, seconds");
    cmd->add_flag("--heuristic", budget.heuristic,
                  "Expand distributions sharing variables with the query first");
    cmd->add_option("--style", style_name, "Output rendering: text, latex or json")
        ->check(CLI::IsMember({"text", "latex", "json"}));
  }
  Style style() const {
    if (style_name == "latex") return Style::latex;
    if (style_name == "json") return Style::json;
    return Style::text;
  }
};

Assignment parse_assignments(const std::vector<std::string>& pairs, const char* flag) {
  Assignment a;
  for (const auto& p : pairs) {
    auto eq = p.find('=');
    int value = 0;
    std::size_t used = 0;
    if (eq != std::string::npos) {
      try {
        value = std::stoi(p.substr(eq + 1), &used);
      } catch (const std::exception&) {
        used = 0;
      }
    }
    if (eq == std::string::npos || eq == 0 || used != p.size() - eq - 1 || value < 0)
      throw InputError(std::string(flag) + " expects VAR=VALUE with a nonnegative "
                       "integer value, got '" + p + "'");
    a[p.substr(0, eq)] = value;
  }
  return a;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write to '" + path + "'");
  out << text;
}

// Runs the search and reports the budget verdict on stderr; exits with the
// dedicated status when nothing was found, printing no formula at all.
Derivation derive_or_exit(const ProblemSpec& spec, const SearchBudget& budget) {
  SearchStats stats;
  auto d = derive(spec.graph, spec.inputs, spec.query, budget, &stats);
  if (!d) {
    std::fprintf(stderr,
                 "no derivation within budget (%lld expressions, depth %d, %.2fs%s); "
                 "this does not prove the query unidentifiable\n",
                 static_cast<long long>(stats.expressions), stats.depth, stats.seconds,
                 stats.budget_exhausted ? ", budget exhausted" : ", search space exhausted");
    std::exit(kExitUnknown);
  }
  std::fprintf(stderr, "derived in %.2fs: %zu steps, %lld distributions examined\n",
               stats.seconds, d->steps.size(), static_cast<long long>(stats.expressions));
  return *d;
}

int run_identify(const std::string& problem_path, const SearchFlags& flags,
                 const std::string& trace_path) {
  ProblemSpec spec = load_problem(problem_path);
  Derivation d = derive_or_exit(spec, flags.budget);
  if (!trace_path.empty()) write_file(trace_path, derivation_json(d));
  std::printf("%s\n", render(d.result, flags.style()).c_str());
  return 0;
}

int run_trapdoors(const std::string& problem_path, const SearchFlags& flags,
                  std::uint64_t seed) {
  ProblemSpec spec = load_problem(problem_path);
  Derivation d = derive_or_exit(spec, flags.budget);

  // Independence must be judged against an exact distribution; a seeded
  // surrogate model on the problem graph provides one for any problem.
  DiscreteScm surrogate = DiscreteScm::random_from_graph(spec.graph, seed);
  TableOracle oracle = exact_oracle(surrogate, spec.inputs);
  TrapdoorReport report =
      analyze_trapdoors(spec.graph, spec.inputs, spec.query, d.result, &oracle, flags.budget);

  if (flags.style() == Style::json) {
    std::printf("%s\n", trapdoor_report_json(report).c_str());
    return 0;
  }
  std::printf("functional: %s\n", render(d.result, flags.style()).c_str());
  std::printf("candidates: %s\n",
              report.candidates.empty() ? "(none)" : join(report.candidates, ", ").c_str());
  std::printf("confirmed:  %s\n",
              report.confirmed.empty() ? "(none)" : join(report.confirmed, ", ").c_str());
  for (const auto& v : report.candidates) {
    const auto& ind = report.independence_evidence.at(v);
    const auto& proj = report.projection_evidence.at(v);
    std::printf("%s: value-%s (max deviation %.3g); without it the query is %s "
                "(%lld distributions, depth %d)\n",
                v.c_str(), ind.independent ? "independent" : "DEPENDENT",
                ind.max_deviation,
                proj.outcome == ProjectionOutcome::found ? "still derivable"
                                                         : "not derivable within budget",
                static_cast<long long>(proj.stats.expressions), proj.stats.depth);
    for (const auto& w : proj.warnings) std::fprintf(stderr, "note: %s\n", w.c_str());
  }
  return 0;
}

int run_estimate(const std::string& problem_path, const SearchFlags& flags,
                 const std::vector<std::string>& csv_paths,
                 const std::vector<std::string>& trapdoor_flags,
                 const std::vector<std::string>& target_flags,
                 const std::string& trace_path) {
  ProblemSpec spec = load_problem(problem_path);
  if (csv_paths.size() != spec.inputs.size())
    throw InputError("the problem declares " + std::to_string(spec.inputs.size()) +
                     " input distributions but " + std::to_string(csv_paths.size()) +
                     " --csv files were given (order must match the data block)");

  Derivation d = derive_or_exit(spec, flags.budget);
  if (!trace_path.empty()) write_file(trace_path, derivation_json(d));

  std::vector<ContingencyTable> tables;
  tables.reserve(csv_paths.size());
  for (std::size_t i = 0; i < csv_paths.size(); ++i) {
    auto base = csv_paths[i].substr(csv_paths[i].find_last_of("/\\") + 1);
    tables.push_back(fit(read_csv(csv_paths[i], base, spec.inputs[i])));
  }
  TableOracle oracle(spec.inputs, std::move(tables));

  const Assignment trapdoor = parse_assignments(trapdoor_flags, "--trapdoor");
  const Assignment target = parse_assignments(target_flags, "--target");

  const NameSet knobs = candidates(d.result, spec.query);
  NameSet missing;
  for (const auto& v : knobs)
    if (!trapdoor.count(v) && !target.count(v)) missing.push_back(v);
  if (!missing.empty())
    throw InputError("free variables need --trapdoor values: " + join(missing, ", "));
  for (const auto& [v, value] : trapdoor)
    if (!contains(knobs, v))
      std::fprintf(stderr, "note: --trapdoor %s=%d does not match any free variable\n",
                   v.c_str(), value);

  // Report one estimate per assignment of the query variables the user left
  // open, in odometer order.
  NameSet open_vars;
  for (const auto& v : needed_vars(spec.query))
    if (!target.count(v)) open_vars.push_back(v);
  std::vector<int> digits(open_vars.size(), 0);
  bool first = true;
  if (flags.style() == Style::json) std::printf("[");
  for (;;) {
    Assignment point = target;
    for (std::size_t i = 0; i < open_vars.size(); ++i) point[open_vars[i]] = digits[i];
    PlugInResult r = plug_in(d.result, oracle, point, trapdoor);

    auto value_of = [&](const std::string& v) { return point.at(v); };
    std::string where;
    for (const auto& v : spec.query.outcomes)
      where += (where.empty() ? "" : ",") + v + "=" + std::to_string(value_of(v));
    std::string given;
    if (!spec.query.interventions.empty()) {
      std::string iv;
      for (const auto& v : spec.query.interventions)
        iv += (iv.empty() ? "" : ",") + v + "=" + std::to_string(value_of(v));
      given = "do(" + iv + ")";
    }
    for (const auto& v : set_minus(spec.query.conditions, spec.query.regime))
      given += (given.empty() ? "" : ",") + v + "=" + std::to_string(value_of(v));
    std::string shown = "P(" + where + (given.empty() ? "" : " | " + given) + ")";

    if (flags.style() == Style::json) {
      std::printf("%s\n  {\"estimate\": \"%s\", \"value\": %.12g, \"zeroed_strata\": %d}",
                  first ? "" : ",", shown.c_str(), r.value, r.zeroed_strata);
    } else {
      std::printf("%s = %.6f\n", shown.c_str(), r.value);
      if (r.zeroed_strata > 0)
        std::fprintf(stderr, "note: %d conditioning strata were unobserved and "
                     "contributed zero\n", r.zeroed_strata);
    }
    for (const auto& w : r.warnings) std::fprintf(stderr, "note: %s\n", w.c_str());

    first = false;
    std::size_t i = 0;
    for (; i < digits.size(); ++i) {
      if (++digits[i] < oracle.cardinality(open_vars[i])) break;
      digits[i] = 0;
    }
    if (i == digits.size()) break;
  }
  if (flags.style() == Style::json) std::printf("\n]\n");
  return 0;
}

int run_simulate(const std::string& scenario_path, std::uint64_t seed,
                 bool skip_degenerate, const std::string& out_path) {
  std::ifstream in(scenario_path);
  if (!in) throw InputError("cannot read scenario file '" + scenario_path + "'");
  std::stringstream buf;
  buf << in.rdbuf();

  Study study = bundled_study();
  auto scenarios = parse_scenarios(buf.str(), study.trapdoor_var, {1, 0});
  std::fprintf(stderr, "running %zu scenario cells (truth %.6f, seed %llu)\n",
               scenarios.size(), study.truth, static_cast<unsigned long long>(seed));
  auto results = run_scenarios(study, scenarios, seed, skip_degenerate);
  std::string csv = results_csv(results);
  if (out_path.empty())
    std::printf("%s", csv.c_str());
  else
    write_file(out_path, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causal identification toolkit: do-calculus derivation search, "
               "trapdoor-variable analysis, plug-in estimation, simulation"};
  app.require_subcommand(1);

  std::string problem_path, trace_path, scenario_path, out_path;
  std::vector<std::string> csv_paths, trapdoor_flags, target_flags;
  std::uint64_t seed = 1;
  bool skip_degenerate = false;
  SearchFlags identify_flags, trapdoor_search, estimate_flags;

  auto* identify_cmd =
      app.add_subcommand("identify", "Derive a formula for the query from the inputs");
  identify_cmd->add_option("problem", problem_path, "Problem file")->required();
  identify_flags.attach(identify_cmd);
  identify_cmd->add_option("--trace", trace_path,
                           "Write the full derivation as JSON to this file");

  auto* trapdoor_cmd = app.add_subcommand(
      "trapdoors", "Find free variables of the derived formula and test whether "
                   "they are genuine trapdoors");
  trapdoor_cmd->add_option("problem", problem_path, "Problem file")->required();
  trapdoor_search.attach(trapdoor_cmd);
  trapdoor_cmd->add_option("--seed", seed, "Seed for the surrogate-model oracle");

  auto* estimate_cmd = app.add_subcommand(
      "estimate", "Plug fitted contingency tables into the derived formula");
  estimate_cmd->add_option("problem", problem_path, "Problem file")->required();
  estimate_cmd->add_option("--csv", csv_paths,
                           "Dataset per declared input, in data-block order")
      ->required();
  estimate_cmd->add_option("--trapdoor", trapdoor_flags,
                           "Fix a free variable, e.g. --trapdoor Z2=1");
  estimate_cmd->add_option("--target", target_flags,
                           "Pin a query variable, e.g. --target X=1; unpinned "
                           "query variables are enumerated");
  estimate_flags.attach(estimate_cmd);
  estimate_cmd->add_option("--trace", trace_path,
                           "Write the full derivation as JSON to this file");

  auto* simulate_cmd = app.add_subcommand(
      "simulate", "Replicate the bundled two-domain study over a scenario grid");
  simulate_cmd->add_option("--scenarios", scenario_path, "Scenario grid file")->required();
  simulate_cmd->add_option("--seed", seed, "Replication seed");
  simulate_cmd->add_flag("--skip-degenerate", skip_degenerate,
                         "Drop replications that zero any unobserved stratum");
  simulate_cmd->add_option("--out", out_path, "Write the results CSV here "
                           "instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (identify_cmd->parsed()) return run_identify(problem_path, identify_flags, trace_path);
    if (trapdoor_cmd->parsed()) return run_trapdoors(problem_path, trapdoor_search, seed);
    if (estimate_cmd->parsed())
      return run_estimate(problem_path, estimate_flags, csv_paths, trapdoor_flags,
                          target_flags, trace_path);
    if (simulate_cmd->parsed())
      return run_simulate(scenario_path, seed, skip_degenerate, out_path);
  } catch (const causalid::ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitParse;
  } catch (const EstimationError& e) {
    std::fprintf(stderr, "estimation error: %s\n", e.what());
    return kExitEstimation;
  } catch (const MissingInputError& e) {
    std::fprintf(stderr, "estimation error: %s\n", e.what());
    return kExitEstimation;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
