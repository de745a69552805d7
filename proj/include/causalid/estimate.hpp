#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "causalid/symexpr.hpp"

namespace causalid {

/// Integer-coded rectangular sample. Column order is fixed; `cards` gives the
/// value range {0..card-1} per column. `declared` names the distribution the
/// rows are sampled from (e.g. a trial arm or an observational survey).
struct Dataset {
  std::vector<std::string> columns;
  std::vector<int> cards;
  std::vector<std::uint8_t> values;  // row-major
  std::string label;
  DistTerm declared;

  std::size_t n_rows() const {
    return columns.empty() ? 0 : values.size() / columns.size();
  }
  int value(std::size_t row, std::size_t col) const {
    return values[row * columns.size() + col];
  }
};

Dataset read_csv(const std::string& path, const std::string& label,
                 const DistTerm& declared);
void write_csv(const Dataset& d, const std::string& path);

/// Dense table of cell weights over a fixed column list. Weights are counts
/// for fitted tables and probabilities for exact ones; all probability
/// queries normalize per conditioning stratum, so the distinction never
/// matters to callers.
class ContingencyTable {
 public:
  ContingencyTable(std::vector<std::string> columns, std::vector<int> cards);

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<int>& cards() const { return cards_; }
  int column_index(const std::string& name) const;  // -1 if absent

  double& at(const std::vector<int>& values);
  double at(const std::vector<int>& values) const;
  std::size_t n_cells() const { return cells_.size(); }
  double total() const;

  /// Sum of weights over cells satisfying all (column, value) constraints.
  double sum_matching(const std::vector<std::pair<int, int>>& constraints) const;

 private:
  std::vector<std::string> columns_;
  std::vector<int> cards_;
  std::vector<double> cells_;
};

/// Tabulates a dataset into cell counts over its full column range.
ContingencyTable fit(const Dataset& d);

/// Picks the declared distribution that covers `a` (interventions equal,
/// outcomes a subset, added conditions drawn from declared outcomes). When
/// several cover it, the earliest declaration wins and a warning is emitted;
/// none covering it is a MissingInputError.
struct MatchResult {
  int index;
  std::vector<std::string> warnings;
};
MatchResult match_atom(const DistTerm& a, const std::vector<DistTerm>& declared);

/// What an atom query should do when its conditioning stratum holds no mass.
/// `error` raises EstimationError naming the stratum. `zero_unobserved`
/// mirrors group-and-join estimation pipelines: a stratum whose conditioning
/// values never occur in the data contributes nothing (the group is simply
/// absent, so the answer is 0), but a stratum that does occur while the
/// required intervention arm is empty leaves the estimate undefined and
/// raises EstimationError.
enum class EmptyStratum { error, zero_unobserved };

/// DistOracle backed by one table per declared distribution. Atom queries are
/// routed by match_atom and answered as ratios of stratum weights. Declared
/// regime conditions without a table column are the sampling regime itself
/// and impose no constraint; regime conditions that do have a column (a
/// measured context variable) are pinned to `regime_value`.
class TableOracle : public DistOracle {
 public:
  TableOracle(std::vector<DistTerm> declared, std::vector<ContingencyTable> tables,
              int regime_value = 1, EmptyStratum policy = EmptyStratum::error);

  int cardinality(const std::string& var) const override;
  double atom_probability(const DistTerm& t, const Assignment& a) const override;

  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::vector<DistTerm>& declared() const { return declared_; }
  const ContingencyTable& table(int i) const { return tables_[i]; }
  /// Number of atom queries answered 0 because their stratum was unobserved.
  int zeroed_strata() const { return zeroed_; }

 private:
  std::vector<DistTerm> declared_;
  std::vector<ContingencyTable> tables_;
  int regime_value_;
  EmptyStratum policy_;
  mutable std::vector<std::string> warnings_;
  mutable int zeroed_ = 0;
};

struct PlugInResult {
  double value = 0;
  EvalDiag diag;
  std::vector<std::string> warnings;
  int zeroed_strata = 0;
};

/// Evaluates an identifying functional against fitted tables at the target
/// assignment, with free (trapdoor) variables pinned by `trapdoor`. Empty
/// required strata raise EstimationError naming the stratum.
PlugInResult plug_in(const Expr& e, const TableOracle& oracle,
                     const Assignment& target, const Assignment& trapdoor = {});

}  // namespace causalid
