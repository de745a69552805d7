#include "causalid/estimate.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "causalid/errors.hpp"
#include "causalid/names.hpp"

namespace causalid {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Dataset read_csv(const std::string& path, const std::string& label,
                 const DistTerm& declared) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset file '" + path + "'");
  std::string line;
  int line_no = 0;
  Dataset d;
  d.label = label;
  d.declared = declared;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_commas(line);
    if (d.columns.empty()) {
      for (const auto& f : fields) {
        if (f.empty()) throw ParseError("empty column name in CSV header", line_no);
      }
      d.columns = fields;
      continue;
    }
    if (fields.size() != d.columns.size())
      throw ParseError("row has " + std::to_string(fields.size()) +
                           " fields, header has " + std::to_string(d.columns.size()),
                       line_no);
    for (const auto& f : fields) {
      std::size_t pos = 0;
      int v = 0;
      try {
        v = std::stoi(f, &pos);
      } catch (const std::exception&) {
        throw ParseError("non-integer value '" + f + "'", line_no);
      }
      if (pos != f.size() || v < 0 || v > 255)
        throw ParseError("value '" + f + "' out of range", line_no);
      d.values.push_back(static_cast<std::uint8_t>(v));
    }
  }
  if (d.columns.empty()) throw ParseError("dataset '" + path + "' has no header");
  d.cards.assign(d.columns.size(), 2);
  for (std::size_t r = 0; r < d.n_rows(); ++r)
    for (std::size_t c = 0; c < d.columns.size(); ++c)
      d.cards[c] = std::max(d.cards[c], d.value(r, c) + 1);
  return d;
}

void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write dataset file '" + path + "'");
  out << join(std::vector<std::string>(d.columns.begin(), d.columns.end())) << "\n";
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    for (std::size_t c = 0; c < d.columns.size(); ++c) {
      if (c) out << ",";
      out << d.value(r, c);
    }
    out << "\n";
  }
}

ContingencyTable::ContingencyTable(std::vector<std::string> columns,
                                   std::vector<int> cards)
    : columns_(std::move(columns)), cards_(std::move(cards)) {
  if (columns_.size() != cards_.size())
    throw InputError("table column/cardinality count mismatch");
  std::size_t n = 1;
  for (int c : cards_) {
    if (c < 1) throw InputError("table cardinality must be positive");
    n *= static_cast<std::size_t>(c);
  }
  cells_.assign(n, 0.0);
}

int ContingencyTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {
std::size_t cell_index(const std::vector<int>& cards, const std::vector<int>& values) {
  if (values.size() != cards.size())
    throw InputError("table lookup arity mismatch");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < cards.size(); ++i) {
    if (values[i] < 0 || values[i] >= cards[i])
      throw InputError("table lookup value out of range");
    idx = idx * static_cast<std::size_t>(cards[i]) + static_cast<std::size_t>(values[i]);
  }
  return idx;
}
}  // namespace

double& ContingencyTable::at(const std::vector<int>& values) {
  return cells_[cell_index(cards_, values)];
}

double ContingencyTable::at(const std::vector<int>& values) const {
  return cells_[cell_index(cards_, values)];
}

double ContingencyTable::total() const {
  double t = 0;
  for (double c : cells_) t += c;
  return t;
}

double ContingencyTable::sum_matching(
    const std::vector<std::pair<int, int>>& constraints) const {
  double total = 0;
  std::vector<int> values(cards_.size(), 0);
  for (std::size_t idx = 0; idx < cells_.size(); ++idx) {
    // decode mixed-radix index
    std::size_t rem = idx;
    for (std::size_t i = cards_.size(); i-- > 0;) {
      values[i] = static_cast<int>(rem % static_cast<std::size_t>(cards_[i]));
      rem /= static_cast<std::size_t>(cards_[i]);
    }
    bool ok = true;
    for (const auto& [col, val] : constraints) {
      if (values[static_cast<std::size_t>(col)] != val) {
        ok = false;
        break;
      }
    }
    if (ok) total += cells_[idx];
  }
  return total;
}

ContingencyTable fit(const Dataset& d) {
  ContingencyTable t(d.columns, d.cards);
  std::vector<int> values(d.columns.size());
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    for (std::size_t c = 0; c < d.columns.size(); ++c) values[c] = d.value(r, c);
    t.at(values) += 1.0;
  }
  return t;
}

MatchResult match_atom(const DistTerm& a, const std::vector<DistTerm>& declared) {
  std::vector<int> hits;
  for (std::size_t i = 0; i < declared.size(); ++i)
    if (covers(declared[i], a)) hits.push_back(static_cast<int>(i));
  if (hits.empty())
    throw MissingInputError("no declared input covers " +
                            render_term(a, Style::text));
  MatchResult m{hits[0], {}};
  if (hits.size() > 1) {
    std::ostringstream w;
    w << render_term(a, Style::text) << " is covered by inputs";
    for (int h : hits) w << " " << render_term(declared[static_cast<std::size_t>(h)], Style::text);
    w << "; using the first declared";
    m.warnings.push_back(w.str());
  }
  return m;
}

TableOracle::TableOracle(std::vector<DistTerm> declared,
                         std::vector<ContingencyTable> tables, int regime_value,
                         EmptyStratum policy)
    : declared_(std::move(declared)),
      tables_(std::move(tables)),
      regime_value_(regime_value),
      policy_(policy) {
  if (declared_.size() != tables_.size())
    throw InputError("one table per declared input required");
  for (std::size_t i = 0; i < declared_.size(); ++i) {
    const DistTerm& t = declared_[i];
    for (const auto& v : set_union(set_union(t.outcomes, t.interventions),
                                   set_minus(t.conditions, t.regime)))
      if (tables_[i].column_index(v) < 0)
        throw InputError("table for " + render_term(t, Style::text) +
                         " lacks column '" + v + "'");
  }
}

int TableOracle::cardinality(const std::string& var) const {
  for (const auto& t : tables_) {
    int c = t.column_index(var);
    if (c >= 0) return t.cards()[static_cast<std::size_t>(c)];
  }
  throw MissingInputError("no declared input measures variable '" + var + "'");
}

double TableOracle::atom_probability(const DistTerm& t, const Assignment& a) const {
  MatchResult m = match_atom(t, declared_);
  for (const auto& w : m.warnings)
    if (std::find(warnings_.begin(), warnings_.end(), w) == warnings_.end())
      warnings_.push_back(w);
  const DistTerm& d = declared_[static_cast<std::size_t>(m.index)];
  const ContingencyTable& table = tables_[static_cast<std::size_t>(m.index)];

  auto value_of = [&](const std::string& v) {
    auto it = a.find(v);
    if (it != a.end()) return it->second;
    if (contains(t.regime, v) || contains(d.regime, v)) return regime_value_;
    throw InputError("no value assigned to variable '" + v + "'");
  };

  std::vector<std::pair<int, int>> strata;  // all conditioning constraints
  std::vector<std::pair<int, int>> plain;   // constraints minus interventions
  std::vector<std::pair<int, int>> outcome;
  for (const auto& v : t.outcomes)
    outcome.emplace_back(table.column_index(v), value_of(v));
  for (const auto& v : set_union(t.interventions, t.conditions)) {
    int col = table.column_index(v);
    if (col < 0) continue;  // sampling-regime condition, baked into the table
    strata.emplace_back(col, value_of(v));
    if (!contains(t.interventions, v)) plain.emplace_back(col, value_of(v));
  }

  double den = table.sum_matching(strata);
  if (den == 0.0) {
    std::ostringstream s;
    for (std::size_t i = 0; i < strata.size(); ++i) {
      if (i) s << ",";
      s << table.columns()[static_cast<std::size_t>(strata[i].first)] << "="
        << strata[i].second;
    }
    s << " in " << render_term(d, Style::text);
    if (policy_ == EmptyStratum::zero_unobserved) {
      if (table.sum_matching(plain) == 0.0) {
        ++zeroed_;
        return 0.0;
      }
      throw EstimationError("no rows under the requested intervention arm",
                            s.str());
    }
    throw EstimationError("empty stratum", s.str());
  }
  std::vector<std::pair<int, int>> all = strata;
  all.insert(all.end(), outcome.begin(), outcome.end());
  return table.sum_matching(all) / den;
}

PlugInResult plug_in(const Expr& e, const TableOracle& oracle,
                     const Assignment& target, const Assignment& trapdoor) {
  Assignment a = target;
  for (const auto& [k, v] : trapdoor) {
    auto it = a.find(k);
    if (it != a.end() && it->second != v)
      throw InputError("conflicting assignment for variable '" + k + "'");
    a[k] = v;
  }
  PlugInResult r;
  int zeroed_before = oracle.zeroed_strata();
  r.value = evaluate(e, oracle, a, &r.diag);
  r.warnings = oracle.warnings();
  r.zeroed_strata = oracle.zeroed_strata() - zeroed_before;
  return r;
}

}  // namespace causalid
