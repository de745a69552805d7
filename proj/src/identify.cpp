#include "causalid/identify.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "causalid/errors.hpp"

namespace causalid {

using json = nlohmann::ordered_json;

std::string rule_name(Rule r) {
  switch (r) {
    case Rule::insert_observation: return "docalc-1-insert-observation";
    case Rule::delete_observation: return "docalc-1-delete-observation";
    case Rule::exchange_action_observation: return "docalc-2-exchange-action-observation";
    case Rule::insert_action: return "docalc-3-insert-action";
    case Rule::delete_action: return "docalc-3-delete-action";
    case Rule::marginalize: return "marginalize";
    case Rule::condition_chain_rule: return "condition-chain-rule";
    case Rule::product_compose: return "product-compose";
    case Rule::quotient_condition: return "quotient-condition";
  }
  return "unknown-rule";
}

bool SideCondition::operator==(const SideCondition& o) const {
  return cut.cut_incoming == o.cut.cut_incoming &&
         cut.cut_outgoing == o.cut.cut_outgoing && a == o.a && b == o.b && c == o.c;
}

namespace {

using Clock = std::chrono::steady_clock;

bool is_do_rule(Rule r) {
  switch (r) {
    case Rule::insert_observation:
    case Rule::delete_observation:
    case Rule::exchange_action_observation:
    case Rule::insert_action:
    case Rule::delete_action:
      return true;
    default:
      return false;
  }
}

bool is_binary_rule(Rule r) {
  return r == Rule::product_compose || r == Rule::quotient_condition;
}

// --------------------------------------------------------- packed states --

// A search state is one distribution P(out | do(act), cond) packed as vertex
// masks. Regime markers are a rendering/evaluation concern; the graph rules
// treat every conditioning vertex alike, so states do not carry them.
struct Packed {
  VertexMask out = 0, act = 0, cond = 0;
  bool operator==(const Packed&) const = default;
};

struct PackedHash {
  size_t operator()(const Packed& p) const {
    std::uint64_t h = (std::uint64_t(p.out) << 32) | p.act;
    h ^= std::uint64_t(p.cond) * 0x9E3779B97F4A7C15ull;
    h ^= h >> 29;
    h *= 0xBF58476D1CE4E5B9ull;
    h ^= h >> 32;
    return static_cast<size_t>(h);
  }
};

std::uint64_t mask_pair(VertexMask a, VertexMask b) {
  return (std::uint64_t(a) << 32) | b;
}

Packed packed_of(const Admg& g, const DistTerm& t) {
  return {g.mask_of(t.outcomes), g.mask_of(t.interventions), g.mask_of(t.conditions)};
}

DistTerm term_of(const Admg& g, VertexMask regime_mask, const Packed& p) {
  return make_term(g.names_of(p.out), g.names_of(p.act), g.names_of(p.cond),
                   g.names_of(p.cond & regime_mask));
}

// Re-validates a term against the graph and restates its regime markers from
// the vertex kinds, so that equal mask states always carry equal terms.
DistTerm normalize_term(const Admg& g, VertexMask regime_mask, const DistTerm& t) {
  Packed p = packed_of(g, t);  // throws InputError on unknown names
  if (std::popcount(p.out) != int(t.outcomes.size()) ||
      std::popcount(p.act) != int(t.interventions.size()) ||
      std::popcount(p.cond) != int(t.conditions.size()))
    throw InputError("duplicate variable within a distribution term");
  return term_of(g, regime_mask, p);
}

// The d-separation statement demanded by one do-calculus move: a and b are
// separated given c in the graph cut by (cut_in, cut_out).
struct Cert {
  VertexMask cut_in = 0, cut_out = 0, a = 0, b = 0, c = 0;
  bool operator==(const Cert&) const = default;
};

struct CertKeyHash {
  size_t operator()(const std::array<VertexMask, 5>& k) const {
    std::uint64_t h = 0x243F6A8885A308D3ull;
    for (VertexMask m : k) {
      h ^= m;
      h *= 0x100000001B3ull;
      h ^= h >> 31;
    }
    return static_cast<size_t>(h);
  }
};

// Memoizes mutilated graphs, ancestor closures and separation queries. One
// instance per worker thread; every answer is a pure function of its key, so
// caching cannot change results.
struct SepCache {
  const Admg* base = nullptr;
  std::unordered_map<std::uint64_t, Admg> graphs;
  std::unordered_map<std::uint64_t, VertexMask> anc;
  std::unordered_map<std::array<VertexMask, 5>, bool, CertKeyHash> tests;

  const Admg& graph(VertexMask cut_in, VertexMask cut_out) {
    std::uint64_t key = mask_pair(cut_in, cut_out);
    auto it = graphs.find(key);
    if (it == graphs.end())
      it = graphs.emplace(key, base->mutilate_masks(cut_in, cut_out)).first;
    return it->second;
  }

  // Reflexive ancestors of `cond` after cutting edges into `cut_in`.
  VertexMask ancestors_cut(VertexMask cut_in, VertexMask cond) {
    std::uint64_t key = mask_pair(cut_in, cond);
    auto it = anc.find(key);
    if (it == anc.end()) it = anc.emplace(key, graph(cut_in, 0).ancestors(cond)).first;
    return it->second;
  }

  bool separated(const Cert& c) {
    std::array<VertexMask, 5> key{c.cut_in, c.cut_out, c.a, c.b, c.c};
    auto it = tests.find(key);
    if (it == tests.end())
      it = tests.emplace(key, graph(c.cut_in, c.cut_out).d_separated(c.a, c.b, c.c)).first;
    return it->second;
  }
};

// The certificate licensing `rule` moving variable `z` on premise `p`.
// Membership preconditions (where z currently sits) are the caller's job.
Cert certificate_for(Rule rule, const Packed& p, VertexMask z, SepCache& cache) {
  Cert c;
  c.a = p.out;
  c.b = z;
  switch (rule) {
    case Rule::insert_observation:
      c.cut_in = p.act;
      c.c = p.act | p.cond;
      break;
    case Rule::delete_observation:
      c.cut_in = p.act;
      c.c = p.act | (p.cond & ~z);
      break;
    case Rule::exchange_action_observation:
      if (p.cond & z) {  // observation -> action
        c.cut_in = p.act;
        c.cut_out = z;
        c.c = p.act | (p.cond & ~z);
      } else {  // action -> observation
        c.cut_in = p.act & ~z;
        c.cut_out = z;
        c.c = (p.act & ~z) | p.cond;
      }
      break;
    case Rule::insert_action: {
      VertexMask reach = cache.ancestors_cut(p.act, p.cond);
      c.cut_in = p.act | ((reach & z) ? 0 : z);
      c.c = p.act | p.cond;
      break;
    }
    case Rule::delete_action: {
      VertexMask rest = p.act & ~z;
      VertexMask reach = cache.ancestors_cut(rest, p.cond);
      c.cut_in = rest | ((reach & z) ? 0 : z);
      c.c = rest | p.cond;
      break;
    }
    default:
      break;
  }
  return c;
}

// The conclusion state of applying `rule` moving `z` to premise `p`.
Packed transition(Rule rule, const Packed& p, VertexMask z) {
  switch (rule) {
    case Rule::insert_observation: return {p.out, p.act, p.cond | z};
    case Rule::delete_observation: return {p.out, p.act, p.cond & ~z};
    case Rule::exchange_action_observation:
      if (p.cond & z) return {p.out, p.act | z, p.cond & ~z};
      return {p.out, p.act & ~z, p.cond | z};
    case Rule::insert_action: return {p.out, p.act | z, p.cond};
    case Rule::delete_action: return {p.out, p.act & ~z, p.cond};
    case Rule::marginalize: return {p.out & ~z, p.act, p.cond};
    case Rule::condition_chain_rule: return {p.out & ~z, p.act, p.cond | z};
    default: return p;
  }
}

// ---------------------------------------------------------- search engine --

struct StateRec {
  Packed t;
  Rule rule = Rule::marginalize;  // meaningless for level-0 states
  std::int32_t prem1 = -1, prem2 = -1;
  std::int32_t level = 0;
  std::int32_t moved = -1;        // vertex index for single-variable rules
  std::int32_t covered_by = -1;   // first input whose declaration covers t
  bool has_cert = false;
  Cert cert;
  // Over the formula this state reconstructs to: variables still free, and
  // variables bound by some inner sum. Used to refuse moves that would bind
  // a variable twice (the sum builder rejects shadowing).
  VertexMask free = 0, bound = 0;
  std::uint8_t q = 0;  // quotient nodes in the formula, saturating
};

struct Core {
  const Admg& g;
  int n;
  VertexMask regime_mask = 0;
  std::vector<Packed> declared;  // atom-collapse targets (the declared inputs)
  std::vector<StateRec> states;
  std::unordered_map<Packed, std::int32_t, PackedHash> seen;
  // Committed states bucketed by (act, cond) and by (act, out|cond): the two
  // partner shapes the binary rules need. Bucket vectors grow in commit order.
  std::unordered_map<std::uint64_t, std::vector<std::int32_t>> by_dc, by_du;
  std::vector<SepCache> caches;

  explicit Core(const Admg& graph) : g(graph), n(graph.size()) {
    regime_mask = g.mask_of(g.vertices_of_kind(VertexKind::transportability)) |
                  g.mask_of(g.vertices_of_kind(VertexKind::selection));
    int workers = 1;
#ifdef _OPENMP
    workers = std::max(1, omp_get_max_threads());
#endif
    caches.assign(workers, SepCache{&g, {}, {}, {}});
  }

  bool mask_covers(const Packed& d, const Packed& t) const {
    return t.act == d.act && t.out != 0 && (t.out & ~d.out) == 0 &&
           (d.cond & ~t.cond) == 0 && ((t.cond & ~d.cond) & ~d.out) == 0;
  }

  // Prospective formula bookkeeping of a candidate from its premise records.
  void fill_masks(StateRec& rec) const {
    auto sat = [](int a, int b) { return std::uint8_t(std::min(a + b, 255)); };
    if (rec.prem1 < 0) {
      rec.free = rec.t.out | rec.t.act | rec.t.cond;
      rec.bound = 0;
      rec.q = 0;
      return;
    }
    const StateRec& p1 = states[rec.prem1];
    switch (rec.rule) {
      case Rule::marginalize: {
        VertexMask z = VertexMask(1) << rec.moved;
        rec.free = p1.free & ~z;
        rec.bound = p1.bound | z;
        rec.q = p1.q;
        break;
      }
      case Rule::condition_chain_rule: {
        VertexMask kept = p1.t.out & ~(VertexMask(1) << rec.moved);
        rec.free = p1.free;
        rec.bound = p1.bound | kept;
        rec.q = sat(p1.q, 1);
        break;
      }
      case Rule::product_compose:
      case Rule::quotient_condition: {
        const StateRec& p2 = states[rec.prem2];
        rec.free = p1.free | p2.free;
        rec.bound = p1.bound | p2.bound;
        rec.q = sat(p1.q, p2.q + (rec.rule == Rule::quotient_condition ? 1 : 0));
        break;
      }
      default:  // do-calculus step: the formula is carried over unchanged
        rec.free = p1.free;
        rec.bound = p1.bound;
        rec.q = p1.q;
        break;
    }
  }

  std::int32_t commit(StateRec rec, int level) {
    rec.level = level;
    rec.covered_by = -1;
    for (size_t i = 0; i < declared.size(); ++i)
      if (mask_covers(declared[i], rec.t)) {
        rec.covered_by = static_cast<std::int32_t>(i);
        break;
      }
    if (rec.covered_by >= 0) {
      // Covered states reconstruct to a single atom.
      rec.free = rec.t.out | rec.t.act | rec.t.cond;
      rec.bound = 0;
      rec.q = 0;
    } else {
      fill_masks(rec);
    }
    auto id = static_cast<std::int32_t>(states.size());
    states.push_back(rec);
    seen.emplace(rec.t, id);
    by_dc[mask_pair(rec.t.act, rec.t.cond)].push_back(id);
    by_du[mask_pair(rec.t.act, rec.t.out | rec.t.cond)].push_back(id);
    return id;
  }

  // All one-rule consequences of state `id`, in a fixed generation order.
  std::vector<StateRec> expand_one(std::int32_t id, SepCache& cache) const {
    std::vector<StateRec> out;
    const StateRec& s = states[id];
    const Packed p = s.t;
    const VertexMask F = p.out | p.act | p.cond;

    auto push_do = [&](Rule r, int zi) {
      VertexMask z = VertexMask(1) << zi;
      Cert c = certificate_for(r, p, z, cache);
      if (!cache.separated(c)) return;
      StateRec rec;
      rec.t = transition(r, p, z);
      rec.rule = r;
      rec.prem1 = id;
      rec.moved = zi;
      rec.has_cert = true;
      rec.cert = c;
      fill_masks(rec);
      out.push_back(rec);
    };
    auto push_plain = [&](Rule r, const Packed& t, int moved, std::int32_t prem1,
                          std::int32_t prem2) {
      StateRec rec;
      rec.t = t;
      rec.rule = r;
      rec.prem1 = prem1;
      rec.prem2 = prem2;
      rec.moved = moved;
      fill_masks(rec);
      out.push_back(rec);
    };

    for (int zi = 0; zi < n; ++zi)
      if (!(F & (VertexMask(1) << zi))) push_do(Rule::insert_observation, zi);
    for (int zi = 0; zi < n; ++zi)
      if (p.cond & (VertexMask(1) << zi)) push_do(Rule::delete_observation, zi);
    for (int zi = 0; zi < n; ++zi)
      if ((p.cond | p.act) & (VertexMask(1) << zi))
        push_do(Rule::exchange_action_observation, zi);
    for (int zi = 0; zi < n; ++zi)
      if (!(F & (VertexMask(1) << zi))) push_do(Rule::insert_action, zi);
    for (int zi = 0; zi < n; ++zi)
      if (p.act & (VertexMask(1) << zi)) push_do(Rule::delete_action, zi);

    if (std::popcount(p.out) >= 2) {
      for (int zi = 0; zi < n; ++zi) {
        VertexMask z = VertexMask(1) << zi;
        if (!(p.out & z)) continue;
        if ((s.free & z) && !(s.bound & z))
          push_plain(Rule::marginalize, transition(Rule::marginalize, p, z), zi, id, -1);
        VertexMask kept = p.out & ~z;
        if ((kept & ~s.free) == 0 && (kept & s.bound) == 0)
          push_plain(Rule::condition_chain_rule,
                     transition(Rule::condition_chain_rule, p, z), zi, id, -1);
      }
    }

    // Compose with this state as the conditional factor: partners are the
    // states whose whole variable set equals our conditioning set.
    if (auto it = by_du.find(mask_pair(p.act, p.cond)); it != by_du.end())
      for (std::int32_t tid : it->second) {
        const Packed& t = states[tid].t;
        push_plain(Rule::product_compose, {p.out | t.out, p.act, t.cond}, -1, id, tid);
      }
    // ... and as the marginal factor.
    if (auto it = by_dc.find(mask_pair(p.act, p.out | p.cond)); it != by_dc.end())
      for (std::int32_t sid : it->second) {
        const Packed& q = states[sid].t;
        push_plain(Rule::product_compose, {q.out | p.out, p.act, p.cond}, -1, sid, id);
      }
    // Quotients against states with the identical context.
    if (auto it = by_dc.find(mask_pair(p.act, p.cond)); it != by_dc.end())
      for (std::int32_t vid : it->second) {
        const Packed& v = states[vid].t;
        if (v.out != p.out && (v.out & ~p.out) == 0)
          push_plain(Rule::quotient_condition,
                     {p.out & ~v.out, p.act, p.cond | v.out}, -1, id, vid);
        else if (v.out != p.out && (p.out & ~v.out) == 0)
          push_plain(Rule::quotient_condition,
                     {v.out & ~p.out, p.act, v.cond | p.out}, -1, vid, id);
      }
    return out;
  }
};

// --------------------------------------------------------- reconstruction --

struct Rebuilder {
  const Core& core;
  const std::vector<DistTerm>& inputs;
  const std::unordered_map<std::int32_t, std::int32_t>& input_owner;
  std::unordered_map<std::int32_t, Expr> memo;

  Expr formula(std::int32_t id, bool structural_only) {
    if (!structural_only)
      if (auto it = memo.find(id); it != memo.end()) return it->second;
    const StateRec& r = core.states[id];
    Expr e;
    if (r.level == 0) {
      e = atom(inputs[input_owner.at(id)]);
    } else if (!structural_only && r.covered_by >= 0) {
      e = atom(term_of(core.g, core.regime_mask, r.t));
    } else {
      switch (r.rule) {
        case Rule::marginalize:
          e = sum({core.g.vertex(r.moved).name}, formula(r.prem1, false));
          break;
        case Rule::condition_chain_rule: {
          Expr p = formula(r.prem1, false);
          VertexMask kept = core.states[r.prem1].t.out & ~(VertexMask(1) << r.moved);
          e = quotient(p, sum(core.g.names_of(kept), p));
          break;
        }
        case Rule::product_compose:
          e = product({formula(r.prem1, false), formula(r.prem2, false)});
          break;
        case Rule::quotient_condition:
          e = quotient(formula(r.prem1, false), formula(r.prem2, false));
          break;
        default:  // do-calculus: equality of distributions, same formula
          e = formula(r.prem1, false);
          break;
      }
    }
    if (!structural_only) memo.emplace(id, e);
    return e;
  }
};

SideCondition side_of(const Admg& g, const Cert& c) {
  return SideCondition{Mutilation{g.names_of(c.cut_in), g.names_of(c.cut_out)},
                       g.names_of(c.a), g.names_of(c.b), g.names_of(c.c)};
}

Derivation build_derivation(const Core& core, const std::vector<DistTerm>& norm_inputs,
                            const DistTerm& norm_query, std::int32_t target,
                            const std::unordered_map<std::int32_t, std::int32_t>& owner) {
  // Provenance closure of the target, skipping level-0 states.
  std::vector<std::int32_t> closure;
  std::unordered_set<std::int32_t> visited;
  std::vector<std::int32_t> work{target};
  while (!work.empty()) {
    std::int32_t id = work.back();
    work.pop_back();
    if (!visited.insert(id).second) continue;
    const StateRec& r = core.states[id];
    if (r.level == 0) continue;
    closure.push_back(id);
    work.push_back(r.prem1);
    if (r.prem2 >= 0) work.push_back(r.prem2);
  }
  std::sort(closure.begin(), closure.end());  // premises commit first: topological

  const int k = static_cast<int>(norm_inputs.size());
  std::unordered_map<std::int32_t, int> pos;
  for (size_t j = 0; j < closure.size(); ++j)
    pos.emplace(closure[j], k + static_cast<int>(j));
  auto premise_index = [&](std::int32_t id) {
    return core.states[id].level == 0 ? owner.at(id) : pos.at(id);
  };

  Rebuilder rb{core, norm_inputs, owner, {}};
  Derivation d;
  d.inputs = norm_inputs;
  d.query = norm_query;
  for (std::int32_t id : closure) {
    const StateRec& r = core.states[id];
    DerivationStep st;
    st.rule = r.rule;
    st.premises.push_back(premise_index(r.prem1));
    if (r.prem2 >= 0) st.premises.push_back(premise_index(r.prem2));
    if (r.moved >= 0) st.moved = core.g.vertex(r.moved).name;
    st.term = term_of(core.g, core.regime_mask, r.t);
    st.conclusion = rb.formula(id, id == target);
    if (r.has_cert) st.side_condition = side_of(core.g, r.cert);
    d.steps.push_back(std::move(st));
  }
  d.result = d.steps.back().conclusion;
  return d;
}

}  // namespace

// -------------------------------------------------------------- derive() --

std::optional<Derivation> derive(const Admg& g, const std::vector<DistTerm>& inputs,
                                 const DistTerm& query, const SearchBudget& budget,
                                 SearchStats* stats) {
  const auto t0 = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - t0).count(); };
  if (inputs.empty()) throw InputError("derive needs at least one input distribution");
  if (budget.max_expressions <= 0 || budget.max_depth <= 0 || budget.time_limit <= 0.0)
    throw InputError("search budget limits must be positive");

  Core core(g);
  std::vector<DistTerm> norm_inputs;
  norm_inputs.reserve(inputs.size());
  for (const auto& t : inputs) norm_inputs.push_back(normalize_term(g, core.regime_mask, t));
  const DistTerm norm_query = normalize_term(g, core.regime_mask, query);
  const Packed target = packed_of(g, norm_query);
  const VertexMask query_vars = target.out | target.act | target.cond;

  SearchStats local;
  auto report = [&](bool exhausted, int depth) {
    local.expressions = static_cast<std::int64_t>(core.states.size());
    local.depth = depth;
    local.seconds = elapsed();
    local.budget_exhausted = exhausted;
    if (stats) *stats = local;
  };

  // Seed the frontier with the inputs; duplicates share one state.
  for (const auto& t : norm_inputs) core.declared.push_back(packed_of(g, t));
  std::unordered_map<std::int32_t, std::int32_t> owner;  // state id -> input index
  std::vector<std::int32_t> frontier;
  for (size_t i = 0; i < norm_inputs.size(); ++i) {
    Packed p = core.declared[i];
    auto it = core.seen.find(p);
    if (it != core.seen.end()) continue;
    StateRec rec;
    rec.t = p;
    std::int32_t id = core.commit(std::move(rec), 0);
    owner.emplace(id, static_cast<std::int32_t>(i));
    frontier.push_back(id);
  }

  if (auto it = core.seen.find(target); it != core.seen.end()) {
    // The query is literally one of the inputs: nothing to derive.
    report(false, 0);
    Derivation d;
    d.inputs = norm_inputs;
    d.query = norm_query;
    d.result = atom(norm_query);
    return d;
  }

  for (int level = 1; level <= budget.max_depth; ++level) {
    if (frontier.empty()) {
      report(false, level - 1);  // closure fully explored, query unreachable
      return std::nullopt;
    }
    if (elapsed() > budget.time_limit) {
      report(true, level - 1);
      return std::nullopt;
    }
    if (budget.heuristic) {
      std::stable_sort(frontier.begin(), frontier.end(),
                       [&](std::int32_t a, std::int32_t b) {
                         const Packed &pa = core.states[a].t, &pb = core.states[b].t;
                         int sa = std::popcount((pa.out | pa.act | pa.cond) & query_vars);
                         int sb = std::popcount((pb.out | pb.act | pb.cond) & query_vars);
                         if (sa != sb) return sa > sb;
                         return a < b;
                       });
    }

    std::vector<std::vector<StateRec>> cand(frontier.size());
#ifdef _OPENMP
    if (static_cast<int>(core.caches.size()) < omp_get_max_threads())
      core.caches.resize(omp_get_max_threads(), SepCache{&core.g, {}, {}, {}});
#pragma omp parallel for schedule(dynamic, 4)
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(frontier.size()); ++i) {
      int tid = 0;
#ifdef _OPENMP
      tid = omp_get_thread_num();
#endif
      cand[i] = core.expand_one(frontier[i], core.caches[tid]);
    }

    // Sequential merge: flatten in (frontier order, generation order), then
    // stable-sort so candidates with plainer formulas commit first — fewer
    // quotients, then fewer bound variables. A state reached both by a
    // product-of-atoms route and by one that buries variables under a
    // quotient keeps the plainer route, which also leaves later
    // marginalizations legal. The order is independent of the worker count.
    std::vector<StateRec> flat;
    for (auto& bucket : cand)
      for (auto& c : bucket) flat.push_back(std::move(c));
    std::stable_sort(flat.begin(), flat.end(), [](const StateRec& a, const StateRec& b) {
      if (a.q != b.q) return a.q < b.q;
      return std::popcount(a.bound) < std::popcount(b.bound);
    });

    std::vector<std::int32_t> next;
    for (auto& c : flat) {
      auto it = core.seen.find(c.t);
      if (it != core.seen.end()) {
        // Strictly cleaner route to a known state: swap the provenance in
        // place. Restricted to premises older than the state so ids stay
        // topological; covered and input states are already canonical.
        StateRec& e = core.states[it->second];
        if (e.level == 0 || e.covered_by >= 0) continue;
        if (c.prem1 >= it->second || c.prem2 >= it->second) continue;
        StateRec probe = c;
        core.fill_masks(probe);
        bool cleaner = probe.q <= e.q && (probe.bound & ~e.bound) == 0 &&
                       (e.free & ~probe.free) == 0 &&
                       (probe.q < e.q || probe.bound != e.bound || probe.free != e.free);
        if (cleaner) {
          e.rule = probe.rule;
          e.prem1 = probe.prem1;
          e.prem2 = probe.prem2;
          e.moved = probe.moved;
          e.has_cert = probe.has_cert;
          e.cert = probe.cert;
          e.free = probe.free;
          e.bound = probe.bound;
        }
        continue;
      }
      std::int32_t id = core.commit(std::move(c), level);
      next.push_back(id);
      if (core.states[id].t == target) {
        report(false, level);
        return build_derivation(core, norm_inputs, norm_query, id, owner);
      }
      if (static_cast<std::int64_t>(core.states.size()) >= budget.max_expressions) {
        report(true, level);
        return std::nullopt;
      }
    }
    frontier = std::move(next);
  }
  report(!frontier.empty(), budget.max_depth);
  return std::nullopt;
}

// -------------------------------------------------------------- verify() --

bool verify(const Admg& g, const Derivation& d) {
  Core core(g);
  SepCache& cache = core.caches[0];
  const int k = static_cast<int>(d.inputs.size());
  if (k == 0) return false;

  std::vector<Packed> at(k + d.steps.size());
  for (int i = 0; i < k; ++i) at[i] = packed_of(g, d.inputs[i]);
  const Packed target = packed_of(g, d.query);

  if (d.steps.empty()) {
    if (!d.result || d.result->kind() != ExprKind::atom) return false;
    if (!(packed_of(g, d.result->term()) == target)) return false;
    for (int i = 0; i < k; ++i)
      if (at[i] == target) return true;
    return false;
  }

  auto conclusion_of = [&](int idx) -> Expr {
    return idx < k ? atom(d.inputs[idx]) : d.steps[idx - k].conclusion;
  };

  for (size_t j = 0; j < d.steps.size(); ++j) {
    const DerivationStep& st = d.steps[j];
    const int limit = k + static_cast<int>(j);
    for (int p : st.premises)
      if (p < 0 || p >= limit)
        throw InputError("derivation step references a missing premise");
    const size_t arity = is_binary_rule(st.rule) ? 2 : 1;
    if (st.premises.size() != arity) return false;
    const Packed p1 = at[st.premises[0]];

    Packed expected;
    Cert want;
    if (!is_binary_rule(st.rule)) {
      if (st.moved.empty() || !g.has_vertex(st.moved)) return false;
      const int zi = g.index_of(st.moved);
      const VertexMask z = VertexMask(1) << zi;
      const VertexMask F = p1.out | p1.act | p1.cond;
      bool ok = false;
      switch (st.rule) {
        case Rule::insert_observation:
        case Rule::insert_action: ok = !(F & z); break;
        case Rule::delete_observation: ok = (p1.cond & z) != 0; break;
        case Rule::exchange_action_observation: ok = ((p1.cond | p1.act) & z) != 0; break;
        case Rule::delete_action: ok = (p1.act & z) != 0; break;
        case Rule::marginalize:
        case Rule::condition_chain_rule:
          ok = (p1.out & z) != 0 && std::popcount(p1.out) >= 2;
          break;
        default: break;
      }
      if (!ok) return false;
      expected = transition(st.rule, p1, z);
      if (is_do_rule(st.rule)) want = certificate_for(st.rule, p1, z, cache);
    } else {
      if (!st.moved.empty()) return false;
      const Packed p2 = at[st.premises[1]];
      if (st.rule == Rule::product_compose) {
        if (p2.act != p1.act || (p2.out | p2.cond) != p1.cond) return false;
        expected = {p1.out | p2.out, p1.act, p2.cond};
      } else {
        if (p2.act != p1.act || p2.cond != p1.cond) return false;
        if (p2.out == p1.out || (p2.out & ~p1.out) != 0) return false;
        expected = {p1.out & ~p2.out, p1.act, p1.cond | p2.out};
      }
    }

    if (!(packed_of(g, st.term) == expected)) return false;
    if (g.mask_of(st.term.regime) != (expected.cond & core.regime_mask)) return false;
    at[k + j] = expected;

    if (is_do_rule(st.rule)) {
      if (!st.side_condition) return false;
      const SideCondition& side = *st.side_condition;
      Cert got{g.mask_of(side.cut.cut_incoming), g.mask_of(side.cut.cut_outgoing),
               g.mask_of(side.a), g.mask_of(side.b), g.mask_of(side.c)};
      if (!(got == want)) return false;
      if (!cache.separated(got)) return false;
    } else if (st.side_condition) {
      return false;
    }

    if (!st.conclusion) return false;
    const bool collapsed =
        st.conclusion->kind() == ExprKind::atom && st.conclusion->term() == st.term &&
        std::any_of(d.inputs.begin(), d.inputs.end(),
                    [&](const DistTerm& in) { return covers(in, st.term); });
    if (!collapsed) {
      Expr expect_expr;
      try {
        switch (st.rule) {
          case Rule::marginalize:
            expect_expr = sum({st.moved}, conclusion_of(st.premises[0]));
            break;
          case Rule::condition_chain_rule: {
            Expr p = conclusion_of(st.premises[0]);
            expect_expr = quotient(p, sum(g.names_of(expected.out), p));
            break;
          }
          case Rule::product_compose:
            expect_expr = product(
                {conclusion_of(st.premises[0]), conclusion_of(st.premises[1])});
            break;
          case Rule::quotient_condition:
            expect_expr = quotient(conclusion_of(st.premises[0]),
                                   conclusion_of(st.premises[1]));
            break;
          default:
            expect_expr = conclusion_of(st.premises[0]);
            break;
        }
      } catch (const Error&) {
        return false;  // a builder refused the recorded composition
      }
      if (!expr_equal(st.conclusion, expect_expr)) return false;
    }
  }

  if (!d.result || !expr_equal(d.result, d.steps.back().conclusion)) return false;
  return at[k + d.steps.size() - 1] == target;
}

// --------------------------------------------------------------- expand() --

std::vector<TermExpr> expand(const Admg& g, const std::vector<TermExpr>& known) {
  if (known.empty()) throw InputError("expand needs a nonempty known set");
  Core core(g);
  std::vector<Expr> expr_of;
  for (const auto& kx : known) {
    if (!kx.expr) throw InputError("null expression in known set");
    DistTerm t = normalize_term(g, core.regime_mask, kx.term);
    Packed p = packed_of(g, t);
    if (core.seen.count(p)) continue;
    StateRec rec;
    rec.t = p;
    std::int32_t id = core.commit(std::move(rec), 0);
    // Guards reflect the actual expression, not the atom assumption.
    auto graph_mask = [&](const NameSet& names) {
      VertexMask m = 0;
      for (const auto& name : names)
        if (g.has_vertex(name)) m |= VertexMask(1) << g.index_of(name);
      return m;
    };
    core.states[id].free = graph_mask(free_vars_all(kx.expr));
    core.states[id].bound = graph_mask(bound_anywhere(kx.expr));
    expr_of.push_back(kx.expr);
  }

  std::vector<TermExpr> out;
  std::unordered_set<Packed, PackedHash> emitted;
  const auto n_known = static_cast<std::int32_t>(core.states.size());
  for (std::int32_t id = 0; id < n_known; ++id) {
    for (const StateRec& c : core.expand_one(id, core.caches[0])) {
      if (core.seen.count(c.t) || !emitted.insert(c.t).second) continue;
      Expr e;
      switch (c.rule) {
        case Rule::marginalize:
          e = sum({g.vertex(c.moved).name}, expr_of[c.prem1]);
          break;
        case Rule::condition_chain_rule: {
          const Expr& p = expr_of[c.prem1];
          VertexMask kept = core.states[c.prem1].t.out & ~(VertexMask(1) << c.moved);
          e = quotient(p, sum(g.names_of(kept), p));
          break;
        }
        case Rule::product_compose:
          e = product({expr_of[c.prem1], expr_of[c.prem2]});
          break;
        case Rule::quotient_condition:
          e = quotient(expr_of[c.prem1], expr_of[c.prem2]);
          break;
        default:
          e = expr_of[c.prem1];
          break;
      }
      out.push_back(TermExpr{term_of(g, core.regime_mask, c.t), e});
    }
  }
  return out;
}

std::vector<Expr> expand(const Admg& g, const std::vector<Expr>& known) {
  std::vector<TermExpr> wrapped;
  wrapped.reserve(known.size());
  for (const auto& e : known) wrapped.push_back(TermExpr{denoted_term(e), e});
  std::vector<Expr> out;
  auto is_new = [&](const Expr& e) {
    for (const auto& kx : known)
      if (expr_equal(kx, e)) return false;
    for (const auto& r : out)
      if (expr_equal(r, e)) return false;
    return true;
  };
  for (auto& te : expand(g, wrapped))
    if (is_new(te.expr)) out.push_back(te.expr);
  return out;
}

DistTerm denoted_term(const Expr& e) {
  if (!e) throw InputError("null expression");
  switch (e->kind()) {
    case ExprKind::atom:
      return e->term();
    case ExprKind::sum: {
      DistTerm b = denoted_term(e->body());
      if (!is_subset(e->bound(), b.outcomes) || e->bound().size() >= b.outcomes.size())
        throw InputError("sum does not marginalize a strict subset of outcomes");
      return make_term(set_minus(b.outcomes, e->bound()), b.interventions, b.conditions,
                       b.regime);
    }
    case ExprKind::quotient: {
      DistTerm num = denoted_term(e->numerator());
      DistTerm den = denoted_term(e->denominator());
      if (num.interventions != den.interventions || num.conditions != den.conditions ||
          !is_subset(den.outcomes, num.outcomes) || den.outcomes == num.outcomes)
        throw InputError("quotient does not condition a joint on part of its outcomes");
      return make_term(set_minus(num.outcomes, den.outcomes), num.interventions,
                       set_union(num.conditions, den.outcomes),
                       set_union(num.regime, den.regime));
    }
    case ExprKind::product: {
      std::vector<DistTerm> parts;
      for (const auto& f : e->factors()) parts.push_back(denoted_term(f));
      while (parts.size() > 1) {
        bool merged = false;
        for (size_t i = 0; !merged && i < parts.size(); ++i)
          for (size_t j = 0; !merged && j < parts.size(); ++j) {
            if (i == j) continue;
            const DistTerm &a = parts[i], &b = parts[j];
            if (a.interventions != b.interventions) continue;
            if (set_union(b.outcomes, b.conditions) != a.conditions) continue;
            DistTerm joined = make_term(set_union(a.outcomes, b.outcomes),
                                        a.interventions, b.conditions, b.regime);
            parts[std::min(i, j)] = joined;
            parts.erase(parts.begin() + static_cast<long>(std::max(i, j)));
            merged = true;
          }
        if (!merged) throw InputError("product factors do not chain into one distribution");
      }
      return parts.front();
    }
  }
  throw InputError("unrecognised expression kind");
}

// -------------------------------------------------------------- JSON dump --

std::string derivation_json(const Derivation& d) {
  auto term_j = [](const DistTerm& t) { return json::parse(render_term(t, Style::json)); };
  auto expr_j = [](const Expr& e) { return json::parse(render(e, Style::json)); };
  json j;
  j["inputs"] = json::array();
  for (const auto& t : d.inputs) j["inputs"].push_back(term_j(t));
  j["query"] = term_j(d.query);
  j["steps"] = json::array();
  for (const auto& st : d.steps) {
    json s;
    s["rule"] = rule_name(st.rule);
    s["premises"] = st.premises;
    if (!st.moved.empty()) s["moved"] = st.moved;
    s["term"] = term_j(st.term);
    s["conclusion"] = expr_j(st.conclusion);
    if (st.side_condition) {
      const SideCondition& c = *st.side_condition;
      json sc;
      sc["cut_incoming"] = c.cut.cut_incoming;
      sc["cut_outgoing"] = c.cut.cut_outgoing;
      sc["separated"] = c.a;
      sc["from"] = c.b;
      sc["given"] = c.c;
      s["side_condition"] = sc;
    }
    j["steps"].push_back(s);
  }
  j["result"] = expr_j(d.result);
  j["result_text"] = render(d.result, Style::text);
  return j.dump(2);
}

}  // namespace causalid
