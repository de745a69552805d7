#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "causalid/admg.hpp"
#include "causalid/estimate.hpp"
#include "causalid/symexpr.hpp"

namespace causalid {

/// Counter-based uniform/normal generator (Philox 4x32-10). Every draw is a
/// pure function of (seed, stream, block, counter, slot), so parallel workers
/// produce bit-identical streams regardless of scheduling or worker count.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  /// Uniform in (0,1); never returns exactly 0 or 1.
  double uniform(std::uint32_t block, std::uint64_t counter, std::uint32_t slot) const;
  /// Standard normal via the inverse CDF, safe to feed from `uniform`.
  double normal(std::uint32_t block, std::uint64_t counter, std::uint32_t slot) const;

 private:
  std::uint32_t k0_, k1_;
};

/// Inverse of the standard normal CDF (Wichura's double-precision rational
/// approximation), accurate to ~1e-15 over (0,1).
double norminv(double p);
/// Standard normal CDF via erfc, accurate in both tails.
double norm_cdf(double x);

/// One structural assignment: v = 1[noise_v < intercept + sum coef*parent
/// + sum coef*shared_noise], with a private standard-normal noise per
/// variable and named shared noises for confounding.
struct ThresholdAssignment {
  std::string name;
  double intercept = 0;
  std::vector<std::pair<std::string, double>> parent_terms;
  std::vector<std::pair<std::string, double>> noise_terms;
};

/// Binary structural causal model with Gaussian noises and threshold
/// assignments. Named domain switches replace selected assignments wholesale
/// (e.g. a source population where a covariate has a shifted baseline).
class ThresholdScm {
 public:
  ThresholdScm(std::vector<std::string> shared_noises,
               std::vector<ThresholdAssignment> assignments);

  void add_domain(const std::string& name,
                  std::vector<ThresholdAssignment> overrides);

  const std::vector<std::string>& variables() const { return var_names_; }
  const std::vector<std::string>& shared_noises() const { return noise_names_; }
  bool has_domain(const std::string& name) const;
  int index_of(const std::string& var) const;  // InputError if unknown

  /// Draws one row of all variables. `forced` pins intervened variables by
  /// index; `domains` activates assignment overrides.
  void draw_row(const CounterRng& rng, std::uint32_t block, std::uint64_t row,
                const std::vector<std::optional<int>>& forced,
                const std::vector<std::string>& domains,
                std::vector<std::uint8_t>& out) const;

  std::vector<std::optional<int>> forced_from(const Assignment& do_assign) const;

  /// Exact joint over all variables under an intervention, integrating the
  /// shared noises by Gauss-Legendre quadrature (supports up to 3 of them).
  ContingencyTable exact_joint(const Assignment& do_assign,
                               const std::vector<std::string>& domains) const;

  /// Monte-Carlo joint from `n` counter-keyed draws; thread-parallel with a
  /// serial twin that produces bit-identical counts.
  ContingencyTable mc_joint(const Assignment& do_assign,
                            const std::vector<std::string>& domains,
                            std::uint64_t n, const CounterRng& rng) const;
  ContingencyTable mc_joint_serial(const Assignment& do_assign,
                                   const std::vector<std::string>& domains,
                                   std::uint64_t n, const CounterRng& rng) const;

 private:
  struct Compiled {  // assignment with name references resolved to indices
    double intercept;
    std::vector<std::pair<int, double>> parents;
    std::vector<std::pair<int, double>> noises;
  };
  const Compiled& active(int var, const std::vector<std::string>& domains) const;

  std::vector<std::string> var_names_;
  std::vector<std::string> noise_names_;
  std::vector<Compiled> base_;
  std::vector<std::string> domain_names_;
  std::vector<std::vector<std::optional<Compiled>>> domain_overrides_;
  std::map<std::string, int> var_index_;
};

/// Observational sample of every model variable from the given domain set.
Dataset sample(const ThresholdScm& scm, std::uint64_t n,
               const std::vector<std::string>& domains, const CounterRng& rng,
               std::uint32_t block, const std::string& label);

/// Randomized-trial sample: `treat` is assigned Bernoulli(treat_prob), and
/// only rows with `selection` = 1 are retained. By default `n` counts
/// recruited subjects: exactly `n` rows are drawn and the retained subset is
/// returned (variable realized size). With `recruit_n = false` rows are
/// drawn until `n` retained rows exist (fixed realized size).
Dataset rct_sample(const ThresholdScm& scm, std::uint64_t n,
                   const std::string& treat, double treat_prob,
                   const std::string& selection,
                   const std::vector<std::string>& domains,
                   const CounterRng& rng, std::uint32_t block,
                   const std::string& label, bool recruit_n = true);

/// Restricts a dataset to the named columns (order preserved as given).
Dataset project_columns(const Dataset& d, const std::vector<std::string>& cols,
                        const DistTerm& declared);

/// Builds the per-input table an oracle answers from: for each intervention
/// assignment, take the model's exact joint in the input's sampling regime,
/// condition measured regime variables to `regime_value`, and marginalize
/// onto the input's outcome and condition columns.
ContingencyTable input_table_exact(const ThresholdScm& scm, const DistTerm& declared,
                                   int regime_value = 1);

/// Exact-oracle counterpart of the fitted-table pipeline: one table per
/// declared input, computed by quadrature instead of sampling.
TableOracle exact_oracle(const ThresholdScm& scm, std::vector<DistTerm> declared,
                         int regime_value = 1);

/// Binary Bayesian-network surrogate for an acyclic directed mixed graph:
/// every vertex becomes a binary variable and every bidirected edge a binary
/// latent parent shared by its endpoints. Conditional tables are drawn from
/// a counter RNG, bounded away from 0 and 1.
class DiscreteScm {
 public:
  static DiscreteScm random_from_graph(const Admg& g, std::uint64_t seed);

  const std::vector<std::string>& variables() const { return observed_; }

  /// Exact joint over observed variables under a hard intervention
  /// (intervened factors replaced, latents summed out).
  ContingencyTable exact_joint(const Assignment& do_assign) const;

 private:
  DiscreteScm() = default;
  std::vector<std::string> observed_;
  std::vector<std::vector<int>> parents_;  // indices into node list per node
  std::vector<std::vector<double>> cpt_;   // p(node=1 | parent config)
  int n_latent_ = 0;                       // latents occupy the first indices
};

ContingencyTable input_table_exact(const DiscreteScm& scm, const DistTerm& declared,
                                   int regime_value = 1);
TableOracle exact_oracle(const DiscreteScm& scm, std::vector<DistTerm> declared,
                         int regime_value = 1);

/// The bundled two-domain study: a source-population trial with posttreatment
/// selection plus a target-domain covariate survey, the estimand
/// P(Y=1 | do(X=1)) in the target domain, and the plug-in functional with its
/// free tuning variable Z2.
struct Study {
  ThresholdScm scm;
  std::string domain_name;    // nominal sampling regime of the trial
  std::string selection_var;  // retention indicator
  std::string treat_var;
  /// Domain overrides activated when drawing trial data. The bundled study
  /// draws the trial from the base model: its estimator conditions on the
  /// shifted covariate everywhere, so the shift changes no estimand — it only
  /// thins the rare covariate strata and inflates variance.
  std::vector<std::string> trial_domains;
  DistTerm trial_term;
  DistTerm survey_term;
  std::vector<std::string> trial_columns;
  std::vector<std::string> survey_columns;
  DistTerm query;
  Assignment target;
  Expr estimator;
  std::string trapdoor_var;
  double truth = 0;  // exact target-domain interventional probability
};

Study bundled_study();

struct SimScenario {
  std::uint64_t rct_n = 0;
  std::uint64_t survey_n = 0;
  int replications = 0;
  std::string trapdoor_var;
  int trapdoor_value = 0;
  double treat_prob = 0.5;
  bool recruit_n = true;  // rct_n counts recruited subjects, not retained rows
};

struct SimResult {
  SimScenario scenario;
  double truth = 0;
  double bias = 0;
  double rmse = 0;
  int used = 0;        // replications entering the aggregate
  int dropped = 0;     // replications whose estimate was undefined
  int degenerate = 0;  // kept replications that zeroed >=1 unobserved stratum
  std::vector<double> estimates;  // NaN where dropped
};

/// Replication harness: per scenario, repeatedly draws trial + survey data,
/// fits tables, and plugs the study functional in at the target. Replications
/// run thread-parallel; aggregation order is fixed, so results are
/// bit-identical across worker counts (run_scenarios_serial is the oracle for
/// that). By default a conditioning stratum that never occurs in a draw
/// contributes zero (the replication is kept and counted as degenerate),
/// while a stratum that occurs with an empty treatment arm leaves the
/// estimate undefined and drops the replication; with `skip_degenerate` any
/// empty stratum drops the replication. Drops are counted in `dropped`.
std::vector<SimResult> run_scenarios(const Study& study,
                                     const std::vector<SimScenario>& scenarios,
                                     std::uint64_t seed, bool skip_degenerate);
std::vector<SimResult> run_scenarios_serial(const Study& study,
                                            const std::vector<SimScenario>& scenarios,
                                            std::uint64_t seed, bool skip_degenerate);

/// Scenario-grid config: lines of "rct=N survey=M reps=R", '#' comments.
std::vector<SimScenario> parse_scenarios(const std::string& text,
                                         const std::string& trapdoor_var,
                                         const std::vector<int>& trapdoor_values);

/// Renders results as CSV, one row per (rct, survey) size pair with the
/// trapdoor settings as column groups.
std::string results_csv(const std::vector<SimResult>& results);

}  // namespace causalid
