#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "causalid/errors.hpp"
#include "causalid/scmsim.hpp"
#include "testutil.hpp"

using namespace causalid;
using testutil::TinyRng;

namespace {

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

double prob(const ContingencyTable& t, std::vector<std::pair<int, int>> cons) {
  return t.sum_matching(cons) / t.total();
}

double marginal1(const ContingencyTable& t, const std::string& v) {
  return prob(t, {{t.column_index(v), 1}});
}

bool tables_equal_bits(const ContingencyTable& a, const ContingencyTable& b) {
  if (a.columns() != b.columns() || a.cards() != b.cards()) return false;
  std::vector<int> idx(a.columns().size(), 0);
  while (true) {
    if (!same_bits(a.at(idx), b.at(idx))) return false;
    std::size_t k = 0;
    for (; k < idx.size(); ++k) {
      if (++idx[k] < a.cards()[k]) break;
      idx[k] = 0;
    }
    if (k == idx.size()) return true;
  }
}

/// |P(A,B|c) - P(A|c)P(B|c)| maximized over binary values within every
/// positive-probability stratum of C.
double ci_gap(const ContingencyTable& t, const std::string& A,
              const std::string& B, const NameSet& C) {
  const int ia = t.column_index(A), ib = t.column_index(B);
  std::vector<int> ic;
  for (const auto& v : C) ic.push_back(t.column_index(v));
  double worst = 0;
  std::vector<int> cvals(C.size(), 0);
  while (true) {
    std::vector<std::pair<int, int>> stratum;
    for (std::size_t k = 0; k < C.size(); ++k) stratum.emplace_back(ic[k], cvals[k]);
    double pc = prob(t, stratum);
    if (pc > 1e-12) {
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          auto ab = stratum;
          ab.emplace_back(ia, a);
          ab.emplace_back(ib, b);
          auto ac = stratum;
          ac.emplace_back(ia, a);
          auto bc = stratum;
          bc.emplace_back(ib, b);
          double gap =
              std::fabs(prob(t, ab) / pc - (prob(t, ac) / pc) * (prob(t, bc) / pc));
          worst = std::max(worst, gap);
        }
    }
    std::size_t k = 0;
    for (; k < cvals.size(); ++k) {
      if (++cvals[k] < 2) break;
      cvals[k] = 0;
    }
    if (k == cvals.size()) return worst;
  }
}

}  // namespace

TEST_CASE("counter rng is a pure function of its coordinates") {
  CounterRng r(42, 7);
  CHECK(same_bits(r.uniform(1, 2, 3), CounterRng(42, 7).uniform(1, 2, 3)));
  CHECK(same_bits(r.normal(1, 2, 3), CounterRng(42, 7).normal(1, 2, 3)));
  // every coordinate matters
  double u = r.uniform(1, 2, 3);
  CHECK(u != CounterRng(43, 7).uniform(1, 2, 3));
  CHECK(u != CounterRng(42, 8).uniform(1, 2, 3));
  CHECK(u != r.uniform(2, 2, 3));
  CHECK(u != r.uniform(1, 3, 3));
  CHECK(u != r.uniform(1, 2, 4));

  double lo = 1, hi = 0, mean = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double x = r.uniform(0, static_cast<std::uint64_t>(i), 0);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    mean += x;
  }
  mean /= n;
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  CHECK(std::fabs(mean - 0.5) < 0.02);  // ~5 sigma for 20k uniforms
}

TEST_CASE("norminv and norm_cdf invert each other") {
  for (double p : {1e-9, 1e-4, 0.01, 0.3, 0.5, 0.7, 0.99, 1 - 1e-4}) {
    CHECK(norm_cdf(norminv(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(norminv(0.5) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(norm_cdf(0.0) == doctest::Approx(0.5));
  CHECK(norm_cdf(-6.0) == doctest::Approx(9.865876e-10).epsilon(1e-4));
}

TEST_CASE("threshold model without shared noise has closed-form cells") {
  // A = 1[nA < 0.4]; B = 1[nB < -0.3 + 1.2 A]
  ThresholdScm scm({}, {{"A", 0.4, {}, {}}, {"B", -0.3, {{"A", 1.2}}, {}}});
  ContingencyTable j = scm.exact_joint({}, {});
  double pa = norm_cdf(0.4);
  CHECK(marginal1(j, "A") == doctest::Approx(pa).epsilon(1e-12));
  CHECK(prob(j, {{j.column_index("A"), 1}, {j.column_index("B"), 1}}) ==
        doctest::Approx(pa * norm_cdf(0.9)).epsilon(1e-12));
  CHECK(prob(j, {{j.column_index("A"), 0}, {j.column_index("B"), 1}}) ==
        doctest::Approx((1 - pa) * norm_cdf(-0.3)).epsilon(1e-12));

  // forcing A decouples it from its mechanism
  ContingencyTable d = scm.exact_joint({{"A", 0}}, {});
  CHECK(marginal1(d, "A") == doctest::Approx(0.0));
  CHECK(marginal1(d, "B") == doctest::Approx(norm_cdf(-0.3)).epsilon(1e-12));
}

TEST_CASE("shared-noise integration matches probability-integral-transform facts") {
  // A = 1[nA < U], B = 1[nB < -U]: Phi(U) is uniform, so
  // P(A=1,B=1) = E[Phi(U)(1-Phi(U))] = 1/2 - 1/3 = 1/6 exactly.
  ThresholdScm opposed({"U"}, {{"A", 0.0, {}, {{"U", 1.0}}},
                              {"B", 0.0, {}, {{"U", -1.0}}}});
  ContingencyTable j = opposed.exact_joint({}, {});
  CHECK(prob(j, {{0, 1}, {1, 1}}) == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(marginal1(j, "A") == doctest::Approx(0.5).epsilon(1e-12));

  // same-sign loading: P(A=1,B=1) = E[Phi(U)^2] = 1/3 exactly.
  ThresholdScm aligned({"U"}, {{"A", 0.0, {}, {{"U", 1.0}}},
                              {"B", 0.0, {}, {{"U", 1.0}}}});
  CHECK(prob(aligned.exact_joint({}, {}), {{0, 1}, {1, 1}}) ==
        doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("domain overrides swap assignments wholesale") {
  ThresholdScm scm({}, {{"A", 0.0, {}, {}}, {"B", 0.0, {{"A", 2.0}}, {}}});
  scm.add_domain("shift", {{"A", 1.0, {}, {}}});
  CHECK(scm.has_domain("shift"));
  CHECK_FALSE(scm.has_domain("other"));
  CHECK(marginal1(scm.exact_joint({}, {}), "A") == doctest::Approx(0.5));
  CHECK(marginal1(scm.exact_joint({}, {"shift"}), "A") ==
        doctest::Approx(norm_cdf(1.0)).epsilon(1e-12));
  // B's mechanism is untouched by the domain
  CHECK(marginal1(scm.exact_joint({{"A", 1}}, {"shift"}), "B") ==
        doctest::Approx(norm_cdf(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(scm.exact_joint({}, {"missing"}), Error);
  CHECK_THROWS_AS(scm.index_of("Q"), InputError);
}

TEST_CASE("monte carlo joint agrees with quadrature and its serial twin") {
  Study s = bundled_study();
  CounterRng rng(2024, 7);
  const std::uint64_t n = 400000;
  ContingencyTable mc = s.scm.mc_joint({{"X", 1}}, {}, n, rng);
  ContingencyTable serial = s.scm.mc_joint_serial({{"X", 1}}, {}, n, rng);
  CHECK(tables_equal_bits(mc, serial));

  ContingencyTable exact = s.scm.exact_joint({{"X", 1}}, {});
  for (const char* v : {"Y", "Z1", "Z2", "Z3", "S"}) {
    double p = marginal1(exact, v);
    double tol = 5 * std::sqrt(p * (1 - p) / static_cast<double>(n));
    CHECK(std::fabs(marginal1(mc, v) - p) < tol);
  }

#ifdef _OPENMP
  int saved = omp_get_max_threads();
  omp_set_num_threads(3);
  ContingencyTable mc3 = s.scm.mc_joint({{"X", 1}}, {}, n, rng);
  omp_set_num_threads(saved);
  CHECK(tables_equal_bits(mc, mc3));
#endif
}

TEST_CASE("bundled study pins its exact operating characteristics") {
  Study s = bundled_study();
  CHECK(s.trapdoor_var == "Z2");
  CHECK(s.treat_var == "X");
  CHECK(s.selection_var == "S");
  CHECK(s.query == make_term({"Y"}, {"X"}));
  CHECK(s.target.at("Y") == 1);
  CHECK(s.target.at("X") == 1);
  CHECK(s.truth == doctest::Approx(0.710675198237).epsilon(1e-9));
  CHECK(same_bits(s.truth, bundled_study().truth));  // fully deterministic

  ContingencyTable dox1 = s.scm.exact_joint({{"X", 1}}, {});
  ContingencyTable dox0 = s.scm.exact_joint({{"X", 0}}, {});
  ContingencyTable base = s.scm.exact_joint({}, {});
  // hand-exact: the tuning covariate responds only to treatment
  CHECK(marginal1(dox1, "Z2") == doctest::Approx(norm_cdf(1.0)).epsilon(1e-12));
  CHECK(marginal1(dox0, "Z2") == doctest::Approx(0.5).epsilon(1e-12));
  // hand-exact by symmetry of the outcome threshold at X=0
  CHECK(marginal1(dox0, "Y") == doctest::Approx(0.5).epsilon(1e-10));
  // pinned by quadrature, cross-checked against sampling elsewhere
  CHECK(marginal1(base, "Z2") == doctest::Approx(0.715089847689).epsilon(1e-9));
  // the covariate-shifted domain moves Z1's baseline and nothing else
  CHECK(marginal1(s.scm.exact_joint({}, {"T"}), "Z1") ==
        doctest::Approx(norm_cdf(1.0)).epsilon(1e-12));
}

TEST_CASE("sampling datasets carry every variable and honor the design") {
  Study s = bundled_study();
  CounterRng rng(5, 1);
  Dataset obs = sample(s.scm, 3000, {}, rng, 0, "survey");
  CHECK(obs.columns == s.scm.variables());
  CHECK(obs.n_rows() == 3000);
  CHECK(obs.label == "survey");
  double z2 = 0;
  for (std::size_t r = 0; r < obs.n_rows(); ++r) {
    for (std::size_t c = 0; c < obs.columns.size(); ++c)
      CHECK(obs.value(r, c) <= 1);
    z2 += obs.value(r, static_cast<std::size_t>(
                           s.scm.index_of("Z2")));
  }
  CHECK(std::fabs(z2 / 3000 - 0.715089847689) < 0.05);

  // recruit-count design: n draws, selected subset returned
  Dataset recruited = rct_sample(s.scm, 2000, "X", 0.5, "S", {}, rng, 1, "t", true);
  CHECK(recruited.n_rows() < 2000);
  CHECK(recruited.n_rows() > 500);
  // fixed-size design: exactly n retained rows
  Dataset fixed = rct_sample(s.scm, 700, "X", 0.9, "S", {}, rng, 2, "t", false);
  CHECK(fixed.n_rows() == 700);
  std::size_t si = static_cast<std::size_t>(s.scm.index_of("S"));
  std::size_t xi = static_cast<std::size_t>(s.scm.index_of("X"));
  double x1 = 0;
  for (std::size_t r = 0; r < fixed.n_rows(); ++r) {
    CHECK(fixed.value(r, si) == 1);
    x1 += fixed.value(r, xi);
  }
  CHECK(std::fabs(x1 / 700 - 0.9) < 0.06);  // randomization probability held

  // identical coordinates reproduce the identical dataset
  Dataset again = rct_sample(s.scm, 700, "X", 0.9, "S", {}, rng, 2, "t", false);
  CHECK(again.values == fixed.values);
}

TEST_CASE("project_columns keeps order, values, and the declared term") {
  Study s = bundled_study();
  CounterRng rng(5, 2);
  Dataset full = sample(s.scm, 50, {}, rng, 0, "survey");
  DistTerm declared = make_term({"X", "Z1"});
  Dataset p = project_columns(full, {"Z1", "X"}, declared);
  CHECK(p.columns == std::vector<std::string>{"Z1", "X"});
  CHECK(p.n_rows() == 50);
  CHECK(p.declared == declared);
  std::size_t z1 = static_cast<std::size_t>(s.scm.index_of("Z1"));
  std::size_t x = static_cast<std::size_t>(s.scm.index_of("X"));
  for (std::size_t r = 0; r < 50; ++r) {
    CHECK(p.value(r, 0) == full.value(r, z1));
    CHECK(p.value(r, 1) == full.value(r, x));
  }
  CHECK_THROWS_AS(project_columns(full, {"Missing"}, declared), InputError);
}

TEST_CASE("exact input tables reproduce conditional closed forms") {
  ThresholdScm scm({}, {{"A", 0.4, {}, {}}, {"B", -0.3, {{"A", 1.2}}, {}}});
  // joint-style input
  ContingencyTable tj = input_table_exact(scm, make_term({"A", "B"}));
  CHECK(prob(tj, {{tj.column_index("A"), 1}, {tj.column_index("B"), 1}}) ==
        doctest::Approx(norm_cdf(0.4) * norm_cdf(0.9)).epsilon(1e-12));
  // interventional input: each do-slice is a normalized joint of the rest
  ContingencyTable td = input_table_exact(scm, make_term({"B"}, {"A"}));
  double b_do1 = td.sum_matching({{td.column_index("A"), 1},
                                  {td.column_index("B"), 1}});
  CHECK(b_do1 == doctest::Approx(norm_cdf(0.9)).epsilon(1e-12));
  CHECK(td.total() == doctest::Approx(2.0).epsilon(1e-12));

  // oracle wrapper answers the conditional directly
  TableOracle oracle = exact_oracle(scm, {make_term({"B"}, {}, {"A"})});
  CHECK(oracle.atom_probability(make_term({"B"}, {}, {"A"}),
                                {{"A", 0}, {"B", 1}}) ==
        doctest::Approx(norm_cdf(-0.3)).epsilon(1e-12));

  CHECK_THROWS_AS(input_table_exact(scm, make_term({"Q"})), InputError);
}

TEST_CASE("regime conditions select domains and pin measured indicators") {
  Study s = bundled_study();
  // P(Y,Z1,Z2,Z3 | do(X), T, S): T is a domain switch, S is measured-and-pinned
  ContingencyTable t = input_table_exact(s.scm, s.trial_term);
  ContingencyTable j = s.scm.exact_joint({{"X", 1}}, {"T"});
  std::vector<std::pair<int, int>> sel{{j.column_index("S"), 1}};
  double den = j.sum_matching(sel);
  sel.emplace_back(j.column_index("Y"), 1);
  sel.emplace_back(j.column_index("Z1"), 0);
  sel.emplace_back(j.column_index("Z2"), 1);
  sel.emplace_back(j.column_index("Z3"), 0);
  double want = j.sum_matching(sel) / den;
  std::vector<std::pair<int, int>> cell{
      {t.column_index("X"), 1}, {t.column_index("Y"), 1}, {t.column_index("Z1"), 0},
      {t.column_index("Z2"), 1}, {t.column_index("Z3"), 0}};
  CHECK(t.sum_matching(cell) == doctest::Approx(want).epsilon(1e-12));

  CHECK_THROWS_AS(
      input_table_exact(s.scm, make_term({"Y"}, {}, {"Q"}, {"Q"})), InputError);
}

TEST_CASE("discrete surrogate is deterministic in the seed") {
  Admg g(testutil::verts({"X", "Z", "Y"}), {{"X", "Z"}, {"Y", "Z"}}, {{"X", "Y"}});
  DiscreteScm a = DiscreteScm::random_from_graph(g, 11);
  DiscreteScm b = DiscreteScm::random_from_graph(g, 11);
  CHECK(tables_equal_bits(a.exact_joint({}), b.exact_joint({})));
  DiscreteScm c = DiscreteScm::random_from_graph(g, 12);
  bool all_same = tables_equal_bits(a.exact_joint({}), c.exact_joint({}));
  CHECK_FALSE(all_same);
  CHECK(a.variables() == std::vector<std::string>{"X", "Y", "Z"});
}

TEST_CASE("discrete surrogate respects the graph with scrambled declarations") {
  // Declaration order differs from name order in every case here; the joint
  // must still factorize the way the graph says.

  // collider: X -> Z <- Y leaves X and Y marginally independent
  Admg collider(testutil::verts({"X", "Z", "Y"}), {{"X", "Z"}, {"Y", "Z"}}, {});
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    ContingencyTable j = DiscreteScm::random_from_graph(collider, seed).exact_joint({});
    CHECK(ci_gap(j, "X", "Y", {}) < 1e-12);
  }

  // chain declared sink-first: A -> M -> Z gives A _||_ Z | M
  Admg chain(testutil::verts({"Z", "M", "A"}), {{"A", "M"}, {"M", "Z"}}, {});
  ContingencyTable cj = DiscreteScm::random_from_graph(chain, 9).exact_joint({});
  CHECK(ci_gap(cj, "A", "Z", {"M"}) < 1e-12);
  CHECK(ci_gap(cj, "A", "Z", {}) > 1e-4);  // dependence flows when unblocked

  // confounding comes only from the bidirected edge
  Admg bidir(testutil::verts({"W", "Q", "E"}), {}, {{"W", "Q"}});
  ContingencyTable bj = DiscreteScm::random_from_graph(bidir, 21).exact_joint({});
  CHECK(ci_gap(bj, "E", "W", {}) < 1e-12);
  CHECK(ci_gap(bj, "E", "Q", {"W"}) < 1e-12);
  CHECK(ci_gap(bj, "W", "Q", {}) > 1e-4);
}

TEST_CASE("discrete interventions cut mechanisms, not descendants") {
  Admg chain(testutil::verts({"Z", "M", "A"}), {{"A", "M"}, {"M", "Z"}}, {});
  DiscreteScm scm = DiscreteScm::random_from_graph(chain, 31);
  ContingencyTable obs = scm.exact_joint({});
  ContingencyTable dom1 = scm.exact_joint({{"M", 1}});
  CHECK(marginal1(dom1, "M") == doctest::Approx(1.0));
  // ancestors are untouched
  CHECK(marginal1(dom1, "A") == doctest::Approx(marginal1(obs, "A")).epsilon(1e-12));
  // no confounding on M -> Z, so do() equals conditioning
  double z_given_m1 = prob(obs, {{obs.column_index("Z"), 1},
                                 {obs.column_index("M"), 1}}) /
                      prob(obs, {{obs.column_index("M"), 1}});
  CHECK(marginal1(dom1, "Z") == doctest::Approx(z_given_m1).epsilon(1e-12));

  std::vector<Vertex> many;
  std::vector<std::pair<std::string, std::string>> wide;
  for (int i = 0; i < 22; ++i) many.push_back({"V" + std::to_string(i)});
  for (int i = 0; i < 4; ++i)
    wide.push_back({"V" + std::to_string(i), "V" + std::to_string(i + 10)});
  CHECK_THROWS_AS(DiscreteScm::random_from_graph(Admg(many, {}, wide), 1),
                  InputError);
}

TEST_CASE("every d-separation shows up as conditional independence") {
  TinyRng rng(2026);
  int separations = 0;
  for (int trial = 0; trial < 80; ++trial) {
    Admg base = testutil::random_admg(rng, 6);
    // reverse the declaration order so node indices disagree with name order
    std::vector<Vertex> rv;
    for (int i = base.size() - 1; i >= 0; --i) rv.push_back(base.vertex(i));
    std::vector<std::pair<std::string, std::string>> de, be;
    for (const auto& [a, b] : base.directed_edges())
      de.emplace_back(base.vertex(a).name, base.vertex(b).name);
    for (const auto& [a, b] : base.bidirected_edges())
      be.emplace_back(base.vertex(a).name, base.vertex(b).name);
    Admg g(rv, de, be);

    ContingencyTable joint =
        DiscreteScm::random_from_graph(g, 1000 + static_cast<std::uint64_t>(trial))
            .exact_joint({});
    NameSet names = g.vertex_names();
    for (std::size_t i = 0; i < names.size(); ++i)
      for (std::size_t j = i + 1; j < names.size(); ++j) {
        NameSet rest;
        for (std::size_t k = 0; k < names.size(); ++k)
          if (k != i && k != j) rest.push_back(names[k]);
        for (int pick = 0; pick < 3; ++pick) {
          NameSet c;
          for (const auto& v : rest)
            if (rng.chance(0.4)) c.push_back(v);
          if (!g.d_separated({names[i]}, {names[j]}, c)) continue;
          ++separations;
          REQUIRE(ci_gap(joint, names[i], names[j], c) < 1e-10);
        }
      }
  }
  CHECK(separations >= 200);
}

TEST_CASE("discrete exact oracle answers atoms from the joint") {
  Admg g(testutil::verts({"X", "Z", "Y"}), {{"X", "Z"}, {"Z", "Y"}}, {{"X", "Y"}});
  DiscreteScm scm = DiscreteScm::random_from_graph(g, 77);
  ContingencyTable j = scm.exact_joint({});
  TableOracle oracle = exact_oracle(scm, {make_term({"X", "Y", "Z"})});
  Assignment a{{"X", 1}, {"Y", 0}, {"Z", 1}};
  double want = prob(j, {{j.column_index("X"), 1},
                         {j.column_index("Y"), 0},
                         {j.column_index("Z"), 1}});
  CHECK(oracle.atom_probability(make_term({"X", "Y", "Z"}), a) ==
        doctest::Approx(want).epsilon(1e-12));
  // conditional answered by the same fitted table
  double cond = oracle.atom_probability(make_term({"Y"}, {}, {"X", "Z"}), a);
  double wantc = want / prob(j, {{j.column_index("X"), 1}, {j.column_index("Z"), 1}});
  CHECK(cond == doctest::Approx(wantc).epsilon(1e-12));
}

TEST_CASE("scenario grids parse with defaults and fail loudly") {
  std::string text =
      "# replication grid\n"
      "rct=100 survey=50 reps=3\n"
      "\n"
      "rct=1000, survey=10000\n";
  auto sc = parse_scenarios(text, "Z2", {1, 0});
  REQUIRE(sc.size() == 4);
  CHECK(sc[0].rct_n == 100);
  CHECK(sc[0].survey_n == 50);
  CHECK(sc[0].replications == 3);
  CHECK(sc[0].trapdoor_var == "Z2");
  CHECK(sc[0].trapdoor_value == 1);
  CHECK(sc[1].trapdoor_value == 0);
  CHECK(sc[2].rct_n == 1000);
  CHECK(sc[2].replications == 2000);  // default
  CHECK(sc[0].treat_prob == 0.5);
  CHECK(sc[0].recruit_n);

  CHECK_THROWS_AS(parse_scenarios("", "Z2", {1}), ParseError);
  CHECK_THROWS_AS(parse_scenarios("# only comments\n", "Z2", {1}), ParseError);
  CHECK_THROWS_AS(parse_scenarios("rct=10\n", "Z2", {1}), ParseError);
  CHECK_THROWS_AS(parse_scenarios("rct=10 survey=abc\n", "Z2", {1}), ParseError);
  CHECK_THROWS_AS(parse_scenarios("rct=10 survey=-4\n", "Z2", {1}), ParseError);
  CHECK_THROWS_AS(parse_scenarios("rct=10 survey=5 bogus=1\n", "Z2", {1}), ParseError);
  CHECK_THROWS_AS(parse_scenarios("rct 10 survey=5\n", "Z2", {1}), ParseError);
}

TEST_CASE("replication harness matches its serial oracle bit for bit") {
  Study s = bundled_study();
  auto sc = parse_scenarios("rct=120 survey=80 reps=30\n", "Z2", {1, 0});
  auto par = run_scenarios(s, sc, 314, false);
  auto ser = run_scenarios_serial(s, sc, 314, false);
  REQUIRE(par.size() == ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK(same_bits(par[i].bias, ser[i].bias));
    CHECK(same_bits(par[i].rmse, ser[i].rmse));
    CHECK(par[i].used == ser[i].used);
    CHECK(par[i].dropped == ser[i].dropped);
    CHECK(par[i].degenerate == ser[i].degenerate);
    REQUIRE(par[i].estimates.size() == ser[i].estimates.size());
    for (std::size_t r = 0; r < par[i].estimates.size(); ++r)
      CHECK(same_bits(par[i].estimates[r], ser[i].estimates[r]));
    CHECK(par[i].used + par[i].dropped == 30);
    CHECK(same_bits(par[i].truth, s.truth));
  }

#ifdef _OPENMP
  int saved = omp_get_max_threads();
  omp_set_num_threads(3);
  auto par3 = run_scenarios(s, sc, 314, false);
  omp_set_num_threads(saved);
  for (std::size_t i = 0; i < par.size(); ++i)
    for (std::size_t r = 0; r < par[i].estimates.size(); ++r)
      CHECK(same_bits(par[i].estimates[r], par3[i].estimates[r]));
#endif

  // strict mode can only drop more replications, never fewer
  auto strict = run_scenarios(s, sc, 314, true);
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK(strict[i].dropped >= par[i].dropped + par[i].degenerate);
    CHECK(strict[i].degenerate == 0);
  }
}

TEST_CASE("results render as one csv row per size pair") {
  Study s = bundled_study();
  auto sc = parse_scenarios("rct=150 survey=120 reps=10\nrct=300 survey=200 reps=10\n",
                            "Z2", {1, 0});
  std::string csv = results_csv(run_scenarios(s, sc, 8, false));
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "RCT,Survey,bias Z2=1,bias Z2=0,rmse Z2=1,rmse Z2=0");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
  CHECK(csv.find("150,120,") != std::string::npos);
  CHECK(csv.find("300,200,") != std::string::npos);
}
