#include "causalid/scmsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <sstream>

#include "causalid/errors.hpp"
#include "causalid/names.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace causalid {

namespace {

// ---------------------------------------------------------------- RNG core

struct Ctr4 {
  std::uint32_t v[4];
};

inline Ctr4 philox10(Ctr4 c, std::uint32_t k0, std::uint32_t k1) {
  for (int round = 0; round < 10; ++round) {
    std::uint64_t p0 = 0xD2511F53ull * c.v[0];
    std::uint64_t p1 = 0xCD9E8D57ull * c.v[2];
    Ctr4 n;
    n.v[0] = static_cast<std::uint32_t>(p1 >> 32) ^ c.v[1] ^ k0;
    n.v[1] = static_cast<std::uint32_t>(p1);
    n.v[2] = static_cast<std::uint32_t>(p0 >> 32) ^ c.v[3] ^ k1;
    n.v[3] = static_cast<std::uint32_t>(p0);
    c = n;
    k0 += 0x9E3779B9u;
    k1 += 0xBB67AE85u;
  }
  return c;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

int thread_id() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t k = splitmix64(seed ^ splitmix64(stream));
  k0_ = static_cast<std::uint32_t>(k);
  k1_ = static_cast<std::uint32_t>(k >> 32);
}

double CounterRng::uniform(std::uint32_t block, std::uint64_t counter,
                           std::uint32_t slot) const {
  Ctr4 c{{slot, static_cast<std::uint32_t>(counter),
          static_cast<std::uint32_t>(counter >> 32), block}};
  Ctr4 r = philox10(c, k0_, k1_);
  std::uint64_t bits =
      (static_cast<std::uint64_t>(r.v[0]) << 32) | static_cast<std::uint64_t>(r.v[1]);
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1p-53;
}

double CounterRng::normal(std::uint32_t block, std::uint64_t counter,
                          std::uint32_t slot) const {
  return norminv(uniform(block, counter, slot));
}

double norminv(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw InputError("norminv requires a probability strictly inside (0,1)");
  static const double a[8] = {
      3.3871328727963666080e0,  1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4,  4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4,  2.5090809287301226727e3};
  static const double b[8] = {
      1.0,                      4.2313330701600911252e1, 6.8718700749205790830e2,
      5.3941960214247511077e3,  2.1213794301586595867e4, 3.9307895800092710610e4,
      2.8729085735721942674e4,  5.2264952788528545610e3};
  static const double c[8] = {
      1.42343711074968357734e0, 4.63033784615654529590e0,
      5.76949722146069140550e0, 3.64784832476320460504e0,
      1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static const double d[8] = {
      1.0,                      2.05319162663775882187e0,
      1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static const double e[8] = {
      6.65790464350110377720e0, 5.46378491116411436990e0,
      1.78482653991729133580e0, 2.96560571828504891230e-1,
      2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static const double f[8] = {
      1.0,                      5.99832206555887937690e-1,
      1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5,
      1.42151175831644588870e-7, 2.04426310338993978564e-15};
  auto poly = [](const double* k, double r) {
    double s = k[7];
    for (int i = 6; i >= 0; --i) s = s * r + k[i];
    return s;
  };
  double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    double r = 0.180625 - q * q;
    return q * poly(a, r) / poly(b, r);
  }
  double r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double v;
  if (r <= 5.0) {
    r -= 1.6;
    v = poly(c, r) / poly(d, r);
  } else {
    r -= 5.0;
    v = poly(e, r) / poly(f, r);
  }
  return q < 0 ? -v : v;
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

// ------------------------------------------------------------ ThresholdScm

ThresholdScm::ThresholdScm(std::vector<std::string> shared_noises,
                           std::vector<ThresholdAssignment> assignments)
    : noise_names_(std::move(shared_noises)) {
  for (const auto& n : noise_names_)
    if (n.empty() || std::count(noise_names_.begin(), noise_names_.end(), n) != 1)
      throw InputError("shared noise names must be unique and nonempty");
  for (const auto& asg : assignments) {
    if (asg.name.empty() || var_index_.count(asg.name))
      throw InputError("variable names must be unique and nonempty");
    Compiled c;
    c.intercept = asg.intercept;
    for (const auto& [p, coef] : asg.parent_terms) {
      auto it = var_index_.find(p);
      if (it == var_index_.end())
        throw InputError("assignment for '" + asg.name + "' references '" + p +
                         "' before it is defined");
      c.parents.emplace_back(it->second, coef);
    }
    for (const auto& [u, coef] : asg.noise_terms) {
      auto it = std::find(noise_names_.begin(), noise_names_.end(), u);
      if (it == noise_names_.end())
        throw InputError("assignment for '" + asg.name +
                         "' references unknown shared noise '" + u + "'");
      c.noises.emplace_back(static_cast<int>(it - noise_names_.begin()), coef);
    }
    var_index_[asg.name] = static_cast<int>(var_names_.size());
    var_names_.push_back(asg.name);
    base_.push_back(std::move(c));
  }
  if (var_names_.empty()) throw InputError("model needs at least one variable");
}

void ThresholdScm::add_domain(const std::string& name,
                              std::vector<ThresholdAssignment> overrides) {
  if (name.empty() || has_domain(name) || var_index_.count(name))
    throw InputError("domain name '" + name + "' clashes or is empty");
  std::vector<std::optional<Compiled>> ov(var_names_.size());
  for (const auto& asg : overrides) {
    auto it = var_index_.find(asg.name);
    if (it == var_index_.end())
      throw InputError("domain '" + name + "' overrides unknown variable '" +
                       asg.name + "'");
    Compiled c;
    c.intercept = asg.intercept;
    for (const auto& [p, coef] : asg.parent_terms) {
      auto pit = var_index_.find(p);
      if (pit == var_index_.end() || pit->second >= it->second)
        throw InputError("override for '" + asg.name +
                         "' references '" + p + "' out of order");
      c.parents.emplace_back(pit->second, coef);
    }
    for (const auto& [u, coef] : asg.noise_terms) {
      auto uit = std::find(noise_names_.begin(), noise_names_.end(), u);
      if (uit == noise_names_.end())
        throw InputError("override for '" + asg.name +
                         "' references unknown shared noise '" + u + "'");
      c.noises.emplace_back(static_cast<int>(uit - noise_names_.begin()), coef);
    }
    ov[static_cast<std::size_t>(it->second)] = std::move(c);
  }
  domain_names_.push_back(name);
  domain_overrides_.push_back(std::move(ov));
}

bool ThresholdScm::has_domain(const std::string& name) const {
  return std::find(domain_names_.begin(), domain_names_.end(), name) !=
         domain_names_.end();
}

int ThresholdScm::index_of(const std::string& var) const {
  auto it = var_index_.find(var);
  if (it == var_index_.end())
    throw InputError("unknown model variable '" + var + "'");
  return it->second;
}

const ThresholdScm::Compiled& ThresholdScm::active(
    int var, const std::vector<std::string>& domains) const {
  const Compiled* c = &base_[static_cast<std::size_t>(var)];
  for (const auto& dn : domains) {
    auto it = std::find(domain_names_.begin(), domain_names_.end(), dn);
    if (it == domain_names_.end())
      throw InputError("unknown domain '" + dn + "'");
    const auto& ov =
        domain_overrides_[static_cast<std::size_t>(it - domain_names_.begin())]
                         [static_cast<std::size_t>(var)];
    if (ov) c = &*ov;
  }
  return *c;
}

void ThresholdScm::draw_row(const CounterRng& rng, std::uint32_t block,
                            std::uint64_t row,
                            const std::vector<std::optional<int>>& forced,
                            const std::vector<std::string>& domains,
                            std::vector<std::uint8_t>& out) const {
  const int n = static_cast<int>(var_names_.size());
  if (forced.size() != var_names_.size())
    throw InputError("forced-value vector must cover every variable");
  out.resize(var_names_.size());
  double u[16];
  if (noise_names_.size() > 16) throw InputError("too many shared noises");
  for (std::size_t j = 0; j < noise_names_.size(); ++j)
    u[j] = rng.normal(block, row, static_cast<std::uint32_t>(n + static_cast<int>(j)));
  for (int i = 0; i < n; ++i) {
    if (forced[static_cast<std::size_t>(i)]) {
      out[static_cast<std::size_t>(i)] =
          static_cast<std::uint8_t>(*forced[static_cast<std::size_t>(i)]);
      continue;
    }
    const Compiled& c = active(i, domains);
    double m = c.intercept;
    for (const auto& [p, coef] : c.parents) m += coef * out[static_cast<std::size_t>(p)];
    for (const auto& [j, coef] : c.noises) m += coef * u[j];
    double z = rng.normal(block, row, static_cast<std::uint32_t>(i));
    out[static_cast<std::size_t>(i)] = z < m ? 1 : 0;
  }
}

std::vector<std::optional<int>> ThresholdScm::forced_from(
    const Assignment& do_assign) const {
  std::vector<std::optional<int>> forced(var_names_.size());
  for (const auto& [v, val] : do_assign) {
    if (val != 0 && val != 1)
      throw InputError("intervention value for '" + v + "' must be 0 or 1");
    forced[static_cast<std::size_t>(index_of(v))] = val;
  }
  return forced;
}

namespace {

/// Gauss-Legendre nodes and weights on [-1,1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  const double pi = 3.14159265358979323846;
  x.assign(static_cast<std::size_t>(n), 0.0);
  w.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(pi * (i + 0.75) / (n + 0.5));
    double p0 = 0, dp = 0;
    for (int it = 0; it < 100; ++it) {
      p0 = 1;
      double p1 = 0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2 * j + 1) * t * p1 - j * p2) / (j + 1);
      }
      dp = n * (t * p0 - p1) / (t * t - 1);
      double dt = p0 / dp;
      t -= dt;
      if (std::fabs(dt) < 1e-15) break;
    }
    x[static_cast<std::size_t>(i)] = -t;
    x[static_cast<std::size_t>(n - 1 - i)] = t;
    w[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(n - 1 - i)] =
        2.0 / ((1 - t * t) * dp * dp);
  }
}

bool advance_odometer(std::vector<int>& v, int card) {
  for (std::size_t i = v.size(); i-- > 0;) {
    if (++v[i] < card) return true;
    v[i] = 0;
  }
  return false;
}

}  // namespace

ContingencyTable ThresholdScm::exact_joint(
    const Assignment& do_assign, const std::vector<std::string>& domains) const {
  const int n = static_cast<int>(var_names_.size());
  if (n > 20) throw InputError("too many variables for exact enumeration");
  const int nd = static_cast<int>(noise_names_.size());
  if (nd > 3)
    throw InputError("exact joint supports at most 3 shared noises");
  auto forced = forced_from(do_assign);

  // resolve the active assignment of every variable once
  std::vector<const Compiled*> eff;
  for (int i = 0; i < n; ++i) eff.push_back(&active(i, domains));

  // quadrature grid for the shared noises, with the Gaussian density folded
  // into the weights
  const double span = 8.5;
  int points = nd <= 1 ? 400 : (nd == 2 ? 200 : 80);
  std::vector<double> gx, gw;
  gauss_legendre(points, gx, gw);
  std::vector<double> nodes, weights;
  const double inv_sqrt_2pi = 0.39894228040143267794;
  for (int k = 0; k < points; ++k) {
    double xk = span * gx[static_cast<std::size_t>(k)];
    nodes.push_back(xk);
    weights.push_back(span * gw[static_cast<std::size_t>(k)] * inv_sqrt_2pi *
                      std::exp(-0.5 * xk * xk));
  }

  ContingencyTable table(var_names_, std::vector<int>(var_names_.size(), 2));

  std::uint32_t forced_mask = 0, forced_bits = 0;
  for (int i = 0; i < n; ++i)
    if (forced[static_cast<std::size_t>(i)]) {
      forced_mask |= 1u << i;
      if (*forced[static_cast<std::size_t>(i)]) forced_bits |= 1u << i;
    }

  std::vector<int> grid(static_cast<std::size_t>(nd), 0);
  std::vector<std::vector<double>> p1(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    p1[static_cast<std::size_t>(i)].assign(
        std::size_t{1} << eff[static_cast<std::size_t>(i)]->parents.size(), 0.0);
  std::vector<int> cell(static_cast<std::size_t>(n), 0);

  bool more = true;
  if (nd == 0) grid.clear();
  while (more) {
    double wgt = 1.0;
    for (int j = 0; j < nd; ++j)
      wgt *= weights[static_cast<std::size_t>(grid[static_cast<std::size_t>(j)])];
    // per-variable success probabilities for every parent configuration
    for (int i = 0; i < n; ++i) {
      if (forced[static_cast<std::size_t>(i)]) continue;
      const Compiled& c = *eff[static_cast<std::size_t>(i)];
      std::size_t npc = std::size_t{1} << c.parents.size();
      for (std::size_t pc = 0; pc < npc; ++pc) {
        double m = c.intercept;
        for (std::size_t pj = 0; pj < c.parents.size(); ++pj)
          if (pc & (std::size_t{1} << pj)) m += c.parents[pj].second;
        for (const auto& [j, coef] : c.noises)
          m += coef * nodes[static_cast<std::size_t>(grid[static_cast<std::size_t>(j)])];
        p1[static_cast<std::size_t>(i)][pc] = norm_cdf(m);
      }
    }
    for (std::uint32_t cfg = 0; cfg < (1u << n); ++cfg) {
      if ((cfg & forced_mask) != forced_bits) continue;
      double prod = wgt;
      for (int i = 0; i < n && prod != 0.0; ++i) {
        if (forced[static_cast<std::size_t>(i)]) continue;
        const Compiled& c = *eff[static_cast<std::size_t>(i)];
        std::size_t pc = 0;
        for (std::size_t pj = 0; pj < c.parents.size(); ++pj)
          if (cfg & (1u << c.parents[pj].first)) pc |= std::size_t{1} << pj;
        double q = p1[static_cast<std::size_t>(i)][pc];
        prod *= (cfg & (1u << i)) ? q : 1.0 - q;
      }
      if (prod == 0.0) continue;
      for (int i = 0; i < n; ++i) cell[static_cast<std::size_t>(i)] = (cfg >> i) & 1u;
      table.at(cell) += prod;
    }
    more = nd > 0 && advance_odometer(grid, points);
  }
  return table;
}

namespace {

ContingencyTable mc_joint_impl(const ThresholdScm& scm, const Assignment& do_assign,
                               const std::vector<std::string>& domains,
                               std::uint64_t n, const CounterRng& rng,
                               bool parallel) {
  const auto& vars = scm.variables();
  ContingencyTable table(vars, std::vector<int>(vars.size(), 2));
  auto forced = scm.forced_from(do_assign);
  const int nv = static_cast<int>(vars.size());

  int nt = parallel ? max_threads() : 1;
  std::size_t ncells = std::size_t{1} << nv;
  std::vector<std::vector<double>> locals(
      static_cast<std::size_t>(nt), std::vector<double>(ncells, 0.0));

#pragma omp parallel if (parallel)
  {
    std::vector<std::uint8_t> row;
    std::vector<double>& local =
        locals[static_cast<std::size_t>(parallel ? thread_id() : 0)];
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
      scm.draw_row(rng, 0, static_cast<std::uint64_t>(i), forced, domains, row);
      std::size_t idx = 0;
      for (int v = 0; v < nv; ++v)
        idx = (idx << 1) | row[static_cast<std::size_t>(v)];
      local[idx] += 1.0;
    }
  }

  std::vector<int> cell(vars.size(), 0);
  for (std::size_t idx = 0; idx < ncells; ++idx) {
    double total = 0;
    for (int t = 0; t < nt; ++t) total += locals[static_cast<std::size_t>(t)][idx];
    if (total == 0) continue;
    for (int v = 0; v < nv; ++v)
      cell[static_cast<std::size_t>(v)] =
          static_cast<int>((idx >> (nv - 1 - v)) & 1u);
    table.at(cell) = total;
  }
  return table;
}

}  // namespace

ContingencyTable ThresholdScm::mc_joint(const Assignment& do_assign,
                                        const std::vector<std::string>& domains,
                                        std::uint64_t n,
                                        const CounterRng& rng) const {
  return mc_joint_impl(*this, do_assign, domains, n, rng, true);
}

ContingencyTable ThresholdScm::mc_joint_serial(
    const Assignment& do_assign, const std::vector<std::string>& domains,
    std::uint64_t n, const CounterRng& rng) const {
  return mc_joint_impl(*this, do_assign, domains, n, rng, false);
}

// ------------------------------------------------------------- data draws

Dataset sample(const ThresholdScm& scm, std::uint64_t n,
               const std::vector<std::string>& domains, const CounterRng& rng,
               std::uint32_t block, const std::string& label) {
  Dataset d;
  d.columns = scm.variables();
  d.cards.assign(d.columns.size(), 2);
  d.label = label;
  d.declared = make_term(NameSet(d.columns.begin(), d.columns.end()));
  std::vector<std::optional<int>> forced(scm.variables().size());
  std::vector<std::uint8_t> row;
  d.values.reserve(n * d.columns.size());
  for (std::uint64_t i = 0; i < n; ++i) {
    scm.draw_row(rng, block, i, forced, domains, row);
    d.values.insert(d.values.end(), row.begin(), row.end());
  }
  return d;
}

Dataset rct_sample(const ThresholdScm& scm, std::uint64_t n,
                   const std::string& treat, double treat_prob,
                   const std::string& selection,
                   const std::vector<std::string>& domains,
                   const CounterRng& rng, std::uint32_t block,
                   const std::string& label, bool recruit_n) {
  Dataset d;
  d.columns = scm.variables();
  d.cards.assign(d.columns.size(), 2);
  d.label = label;
  const int ti = scm.index_of(treat);
  const int si = scm.index_of(selection);
  std::vector<std::optional<int>> forced(scm.variables().size());
  std::vector<std::uint8_t> row;
  d.values.reserve(n * d.columns.size());
  std::uint64_t kept = 0;
  std::uint64_t max_attempts = recruit_n ? n : 200 * n + 10000;
  for (std::uint64_t attempt = 0; recruit_n ? attempt < n : kept < n; ++attempt) {
    if (attempt >= max_attempts)
      throw Error("selection retained too few rows for the requested trial size");
    int x = rng.uniform(block, attempt, static_cast<std::uint32_t>(ti)) < treat_prob
                ? 1
                : 0;
    forced[static_cast<std::size_t>(ti)] = x;
    scm.draw_row(rng, block, attempt, forced, domains, row);
    if (row[static_cast<std::size_t>(si)] != 1) continue;
    d.values.insert(d.values.end(), row.begin(), row.end());
    ++kept;
  }
  return d;
}

Dataset project_columns(const Dataset& d, const std::vector<std::string>& cols,
                        const DistTerm& declared) {
  Dataset out;
  out.columns = cols;
  out.label = d.label;
  out.declared = declared;
  std::vector<std::size_t> src;
  for (const auto& c : cols) {
    auto it = std::find(d.columns.begin(), d.columns.end(), c);
    if (it == d.columns.end())
      throw InputError("dataset has no column '" + c + "'");
    src.push_back(static_cast<std::size_t>(it - d.columns.begin()));
    out.cards.push_back(d.cards[static_cast<std::size_t>(it - d.columns.begin())]);
  }
  out.values.reserve(d.n_rows() * cols.size());
  for (std::size_t r = 0; r < d.n_rows(); ++r)
    for (std::size_t c : src)
      out.values.push_back(static_cast<std::uint8_t>(d.value(r, c)));
  return out;
}

// ----------------------------------------------------- exact input tables

namespace {

/// Shared assembly for exact per-input tables: for every intervention
/// configuration ask the model for a joint in the input's sampling regime,
/// pin measured regime columns to regime_value, and marginalize onto the
/// declared outcome and condition columns.
ContingencyTable build_input_table(
    const DistTerm& declared, const std::vector<std::string>& model_vars,
    const std::function<ContingencyTable(const Assignment&)>& joint_in_regime,
    int regime_value) {
  NameSet plain = set_minus(declared.conditions, declared.regime);
  NameSet outcols = set_union(declared.outcomes, plain);
  for (const auto& v : set_union(outcols, declared.interventions))
    if (std::find(model_vars.begin(), model_vars.end(), v) == model_vars.end())
      throw InputError("declared input references unknown model variable '" + v +
                       "'");
  std::vector<std::string> cols(declared.interventions.begin(),
                                declared.interventions.end());
  cols.insert(cols.end(), outcols.begin(), outcols.end());
  ContingencyTable out(cols, std::vector<int>(cols.size(), 2));

  std::vector<int> docfg(declared.interventions.size(), 0);
  bool more_do = true;
  while (more_do) {
    Assignment doa;
    for (std::size_t i = 0; i < declared.interventions.size(); ++i)
      doa[declared.interventions[i]] = docfg[i];
    ContingencyTable joint = joint_in_regime(doa);

    std::vector<std::pair<int, int>> regime;
    for (const auto& v : declared.regime) {
      int c = joint.column_index(v);
      if (c >= 0) regime.emplace_back(c, regime_value);
    }
    for (const auto& [v, val] : doa) regime.emplace_back(joint.column_index(v), val);
    double den = joint.sum_matching(regime);
    if (den <= 0.0)
      throw EvalError("sampling regime of " + render_term(declared, Style::text) +
                      " has zero probability");

    std::vector<int> ocfg(outcols.size(), 0);
    bool more_out = true;
    while (more_out) {
      auto cons = regime;
      for (std::size_t j = 0; j < outcols.size(); ++j)
        cons.emplace_back(joint.column_index(outcols[j]), ocfg[j]);
      std::vector<int> cell = docfg;
      cell.insert(cell.end(), ocfg.begin(), ocfg.end());
      out.at(cell) = joint.sum_matching(cons) / den;
      more_out = !ocfg.empty() && advance_odometer(ocfg, 2);
      if (ocfg.empty()) break;
    }
    more_do = !docfg.empty() && advance_odometer(docfg, 2);
    if (docfg.empty()) break;
  }
  return out;
}

}  // namespace

ContingencyTable input_table_exact(const ThresholdScm& scm,
                                   const DistTerm& declared, int regime_value) {
  std::vector<std::string> domains;
  for (const auto& v : declared.regime) {
    if (scm.has_domain(v)) {
      domains.push_back(v);
    } else if (std::find(scm.variables().begin(), scm.variables().end(), v) ==
               scm.variables().end()) {
      throw InputError("regime condition '" + v +
                       "' is neither a domain nor a model variable");
    }
  }
  return build_input_table(
      declared, scm.variables(),
      [&](const Assignment& doa) { return scm.exact_joint(doa, domains); },
      regime_value);
}

TableOracle exact_oracle(const ThresholdScm& scm, std::vector<DistTerm> declared,
                         int regime_value) {
  std::vector<ContingencyTable> tables;
  for (const auto& t : declared)
    tables.push_back(input_table_exact(scm, t, regime_value));
  return TableOracle(std::move(declared), std::move(tables), regime_value);
}

// --------------------------------------------------------------- discrete

DiscreteScm DiscreteScm::random_from_graph(const Admg& g, std::uint64_t seed) {
  DiscreteScm scm;
  const int nl = static_cast<int>(g.bidirected_edges().size());
  const int nv = static_cast<int>(g.size());
  if (nl + nv > 24) throw InputError("too many variables for exact enumeration");
  scm.n_latent_ = nl;
  scm.observed_ = g.vertex_names();
  // observed_ is sorted by name while graph indices follow declaration order,
  // so map every graph index to its slot in the node list before wiring.
  std::vector<int> node_of(static_cast<std::size_t>(nv));
  for (int i = 0; i < nv; ++i) {
    auto it = std::find(scm.observed_.begin(), scm.observed_.end(),
                        g.vertex(i).name);
    node_of[static_cast<std::size_t>(i)] =
        nl + static_cast<int>(it - scm.observed_.begin());
  }
  scm.parents_.resize(static_cast<std::size_t>(nl + nv));
  for (int i = 0; i < nv; ++i) {
    auto& par =
        scm.parents_[static_cast<std::size_t>(node_of[static_cast<std::size_t>(i)])];
    for (const auto& [a, b] : g.directed_edges())
      if (b == i) par.push_back(node_of[static_cast<std::size_t>(a)]);
    for (int j = 0; j < nl; ++j) {
      const auto& [a, b] = g.bidirected_edges()[static_cast<std::size_t>(j)];
      if (a == i || b == i) par.push_back(j);
    }
    std::sort(par.begin(), par.end());
  }
  CounterRng rng(seed, 0xC9717AB1Eull);
  scm.cpt_.resize(static_cast<std::size_t>(nl + nv));
  for (int node = 0; node < nl + nv; ++node) {
    std::size_t rows = std::size_t{1}
                       << scm.parents_[static_cast<std::size_t>(node)].size();
    auto& cpt = scm.cpt_[static_cast<std::size_t>(node)];
    cpt.resize(rows);
    for (std::size_t r = 0; r < rows; ++r)
      cpt[r] = 0.15 + 0.7 * rng.uniform(static_cast<std::uint32_t>(node), r, 0);
  }
  return scm;
}

ContingencyTable DiscreteScm::exact_joint(const Assignment& do_assign) const {
  const int nl = n_latent_;
  const int nv = static_cast<int>(observed_.size());
  const int nn = nl + nv;
  ContingencyTable table(observed_, std::vector<int>(observed_.size(), 2));

  std::uint32_t forced_mask = 0, forced_bits = 0;
  for (const auto& [v, val] : do_assign) {
    auto it = std::find(observed_.begin(), observed_.end(), v);
    if (it == observed_.end())
      throw InputError("unknown model variable '" + v + "'");
    if (val != 0 && val != 1)
      throw InputError("intervention value for '" + v + "' must be 0 or 1");
    int node = nl + static_cast<int>(it - observed_.begin());
    forced_mask |= 1u << node;
    if (val) forced_bits |= 1u << node;
  }

  std::vector<int> cell(observed_.size(), 0);
  for (std::uint32_t cfg = 0; cfg < (1u << nn); ++cfg) {
    if ((cfg & forced_mask) != forced_bits) continue;
    double prod = 1.0;
    for (int node = 0; node < nn && prod != 0.0; ++node) {
      if (forced_mask & (1u << node)) continue;
      std::size_t pc = 0;
      const auto& par = parents_[static_cast<std::size_t>(node)];
      for (std::size_t pj = 0; pj < par.size(); ++pj)
        if (cfg & (1u << par[pj])) pc |= std::size_t{1} << pj;
      double q = cpt_[static_cast<std::size_t>(node)][pc];
      prod *= (cfg & (1u << node)) ? q : 1.0 - q;
    }
    if (prod == 0.0) continue;
    for (int i = 0; i < nv; ++i)
      cell[static_cast<std::size_t>(i)] = (cfg >> (nl + i)) & 1u;
    table.at(cell) += prod;
  }
  return table;
}

ContingencyTable input_table_exact(const DiscreteScm& scm,
                                   const DistTerm& declared, int regime_value) {
  for (const auto& v : declared.regime)
    if (std::find(scm.variables().begin(), scm.variables().end(), v) ==
        scm.variables().end())
      throw InputError("regime condition '" + v + "' is not a model variable");
  return build_input_table(
      declared, scm.variables(),
      [&](const Assignment& doa) { return scm.exact_joint(doa); }, regime_value);
}

TableOracle exact_oracle(const DiscreteScm& scm, std::vector<DistTerm> declared,
                         int regime_value) {
  std::vector<ContingencyTable> tables;
  for (const auto& t : declared)
    tables.push_back(input_table_exact(scm, t, regime_value));
  return TableOracle(std::move(declared), std::move(tables), regime_value);
}

// ------------------------------------------------------------------ study

Study bundled_study() {
  Study s{ThresholdScm(
              {"UXZ3", "UYZ3"},
              {
                  {"Z1", 0.0, {}, {}},
                  {"X", 0.0, {{"Z1", 1.0}}, {{"UXZ3", 1.0}}},
                  {"Z2", 0.0, {{"X", 1.0}}, {}},
                  {"Z3", 0.0, {{"Z1", 1.0}, {"Z2", 1.0}}, {{"UXZ3", 1.0}, {"UYZ3", 1.0}}},
                  {"Y", -1.0, {{"Z1", 2.0}, {"X", 1.0}}, {{"UYZ3", 1.0}}},
                  {"S", 0.0, {{"Z3", 1.0}}, {}},
              }),
          "", "", "", {}, DistTerm{}, DistTerm{}, {}, {}, DistTerm{}, {}, nullptr,
          "", 0.0};
  s.scm.add_domain("T", {{"Z1", 1.0, {}, {}}});
  s.domain_name = "T";
  s.selection_var = "S";
  s.treat_var = "X";
  s.trial_term =
      make_term({"Y", "Z1", "Z2", "Z3"}, {"X"}, {"T", "S"}, {"T", "S"});
  s.survey_term = make_term({"X", "Z1", "Z2", "Z3"});
  s.trial_columns = {"Z1", "X", "Z2", "Z3", "Y"};
  s.survey_columns = {"Z1", "X", "Z2", "Z3"};
  s.query = make_term({"Y"}, {"X"});
  s.target = {{"Y", 1}, {"X", 1}};
  Expr arm = atom(make_term({"Y"}, {"X"}, {"Z1", "Z2", "Z3", "T", "S"}, {"T", "S"}));
  Expr joint = atom(make_term({"X", "Z1"}));
  Expr z3given = atom(make_term({"Z3"}, {}, {"X", "Z1", "Z2"}));
  Expr inner = sum({"X"}, product({joint, z3given}));
  s.estimator = sum({"Z1", "Z3"}, product({arm, inner}));
  s.trapdoor_var = "Z2";

  ContingencyTable t = s.scm.exact_joint({{"X", 1}}, {});
  double num = t.sum_matching({{t.column_index("Y"), 1}});
  s.truth = num / t.total();
  return s;
}

// ---------------------------------------------------------------- harness

namespace {

std::vector<SimResult> run_scenarios_impl(const Study& study,
                                          const std::vector<SimScenario>& scenarios,
                                          std::uint64_t seed, bool skip_degenerate,
                                          bool parallel) {
  std::vector<SimResult> results(scenarios.size());
  for (std::size_t si = 0; si < scenarios.size(); ++si) {
    const SimScenario& sc = scenarios[si];
    SimResult& res = results[si];
    res.scenario = sc;
    res.truth = study.truth;
    if (sc.replications <= 0)
      throw InputError("scenario needs a positive replication count");
    res.estimates.assign(static_cast<std::size_t>(sc.replications),
                         std::numeric_limits<double>::quiet_NaN());
    std::vector<std::uint8_t> dropped(static_cast<std::size_t>(sc.replications), 0);
    std::vector<std::exception_ptr> errors(
        static_cast<std::size_t>(sc.replications));

    std::vector<std::uint8_t> degenerate(static_cast<std::size_t>(sc.replications),
                                         0);
    CounterRng rng_survey(seed, 2 * si);
    CounterRng rng_trial(seed, 2 * si + 1);
    Assignment trapdoor{{sc.trapdoor_var, sc.trapdoor_value}};
    EmptyStratum policy =
        skip_degenerate ? EmptyStratum::error : EmptyStratum::zero_unobserved;

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int r = 0; r < sc.replications; ++r) {
      try {
        Dataset survey = project_columns(
            sample(study.scm, sc.survey_n, {}, rng_survey,
                   static_cast<std::uint32_t>(r), "survey"),
            study.survey_columns, study.survey_term);
        Dataset trial = project_columns(
            rct_sample(study.scm, sc.rct_n, study.treat_var, sc.treat_prob,
                       study.selection_var, study.trial_domains, rng_trial,
                       static_cast<std::uint32_t>(r), "trial", sc.recruit_n),
            study.trial_columns, study.trial_term);
        TableOracle oracle({study.trial_term, study.survey_term},
                           {fit(trial), fit(survey)}, 1, policy);
        PlugInResult pr = plug_in(study.estimator, oracle, study.target, trapdoor);
        res.estimates[static_cast<std::size_t>(r)] = pr.value;
        if (pr.zeroed_strata > 0) degenerate[static_cast<std::size_t>(r)] = 1;
      } catch (const EstimationError&) {
        // Undefined estimate for this draw; the replication is excluded.
        dropped[static_cast<std::size_t>(r)] = 1;
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }

    for (int r = 0; r < sc.replications; ++r)
      if (errors[static_cast<std::size_t>(r)])
        std::rethrow_exception(errors[static_cast<std::size_t>(r)]);

    double sum = 0, sumsq = 0;
    for (int r = 0; r < sc.replications; ++r) {
      if (dropped[static_cast<std::size_t>(r)]) {
        ++res.dropped;
        continue;
      }
      if (degenerate[static_cast<std::size_t>(r)]) ++res.degenerate;
      double e = res.estimates[static_cast<std::size_t>(r)];
      sum += e - study.truth;
      sumsq += (e - study.truth) * (e - study.truth);
      ++res.used;
    }
    if (res.used > 0) {
      res.bias = sum / res.used;
      res.rmse = std::sqrt(sumsq / res.used);
    } else {
      res.bias = std::numeric_limits<double>::quiet_NaN();
      res.rmse = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return results;
}

}  // namespace

std::vector<SimResult> run_scenarios(const Study& study,
                                     const std::vector<SimScenario>& scenarios,
                                     std::uint64_t seed, bool skip_degenerate) {
  return run_scenarios_impl(study, scenarios, seed, skip_degenerate, true);
}

std::vector<SimResult> run_scenarios_serial(
    const Study& study, const std::vector<SimScenario>& scenarios,
    std::uint64_t seed, bool skip_degenerate) {
  return run_scenarios_impl(study, scenarios, seed, skip_degenerate, false);
}

std::vector<SimScenario> parse_scenarios(const std::string& text,
                                         const std::string& trapdoor_var,
                                         const std::vector<int>& trapdoor_values) {
  std::vector<SimScenario> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped;
    for (char c : line) stripped += (c == ',') ? ' ' : c;
    std::istringstream ls(stripped);
    std::string tok;
    std::uint64_t rct = 0, survey = 0;
    int reps = 2000;
    bool any = false;
    bool comment = false;
    while (ls >> tok) {
      if (tok[0] == '#') {
        comment = true;
        break;
      }
      auto eq = tok.find('=');
      if (eq == std::string::npos)
        throw ParseError("expected key=value, got '" + tok + "'", line_no);
      std::string key = tok.substr(0, eq);
      long long val = 0;
      try {
        val = std::stoll(tok.substr(eq + 1));
      } catch (const std::exception&) {
        throw ParseError("non-numeric value in '" + tok + "'", line_no);
      }
      if (val <= 0) throw ParseError("value must be positive in '" + tok + "'", line_no);
      if (key == "rct")
        rct = static_cast<std::uint64_t>(val);
      else if (key == "survey")
        survey = static_cast<std::uint64_t>(val);
      else if (key == "reps")
        reps = static_cast<int>(val);
      else
        throw ParseError("unknown scenario key '" + key + "'", line_no);
      any = true;
    }
    if (!any) continue;
    if (comment && !any) continue;
    if (rct == 0 || survey == 0)
      throw ParseError("scenario needs rct= and survey=", line_no);
    for (int v : trapdoor_values) {
      SimScenario sc;
      sc.rct_n = rct;
      sc.survey_n = survey;
      sc.replications = reps;
      sc.trapdoor_var = trapdoor_var;
      sc.trapdoor_value = v;
      out.push_back(sc);
    }
  }
  if (out.empty()) throw ParseError("no scenarios found");
  return out;
}

std::string results_csv(const std::vector<SimResult>& results) {
  std::vector<std::pair<std::string, int>> groups;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> sizes;
  for (const auto& r : results) {
    std::pair<std::string, int> g{r.scenario.trapdoor_var, r.scenario.trapdoor_value};
    if (std::find(groups.begin(), groups.end(), g) == groups.end())
      groups.push_back(g);
    std::pair<std::uint64_t, std::uint64_t> s{r.scenario.rct_n, r.scenario.survey_n};
    if (std::find(sizes.begin(), sizes.end(), s) == sizes.end()) sizes.push_back(s);
  }
  auto cell = [&](const std::pair<std::uint64_t, std::uint64_t>& s,
                  const std::pair<std::string, int>& g) -> const SimResult* {
    for (const auto& r : results)
      if (r.scenario.rct_n == s.first && r.scenario.survey_n == s.second &&
          r.scenario.trapdoor_var == g.first && r.scenario.trapdoor_value == g.second)
        return &r;
    return nullptr;
  };
  std::ostringstream out;
  out << "RCT,Survey";
  for (const auto& g : groups) out << ",bias " << g.first << "=" << g.second;
  for (const auto& g : groups) out << ",rmse " << g.first << "=" << g.second;
  out << "\n";
  char buf[64];
  for (const auto& s : sizes) {
    out << s.first << "," << s.second;
    for (int metric = 0; metric < 2; ++metric) {
      for (const auto& g : groups) {
        const SimResult* r = cell(s, g);
        out << ",";
        if (!r) continue;
        double v = metric == 0 ? r->bias : r->rmse;
        std::snprintf(buf, sizeof buf, "%.6f", v);
        out << buf;
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace causalid
