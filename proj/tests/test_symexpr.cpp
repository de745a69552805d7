#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "causalid/errors.hpp"
#include "causalid/symexpr.hpp"
#include "testutil.hpp"

using namespace causalid;
using testutil::TinyRng;

namespace {

/// Oracle whose atom answers come from a user-supplied function; cardinality
/// is 2 everywhere. Handy for exact arithmetic checks.
struct FnOracle : DistOracle {
  std::function<double(const DistTerm&, const Assignment&)> fn;
  int cardinality(const std::string&) const override { return 2; }
  double atom_probability(const DistTerm& t, const Assignment& a) const override {
    return fn(t, a);
  }
};

}  // namespace

TEST_CASE("make_term validates roles") {
  CHECK_THROWS_AS(make_term({}), InputError);                       // no outcome
  CHECK_THROWS_AS(make_term({"Y"}, {"Y"}), InputError);             // overlap
  CHECK_THROWS_AS(make_term({"Y"}, {}, {"Y"}), InputError);         // overlap
  CHECK_THROWS_AS(make_term({"Y"}, {"X"}, {"Z"}, {"X"}), InputError);  // regime not in cond
  DistTerm t = make_term({"B", "A"}, {}, {"D", "C"}, {"C"});
  CHECK(t.outcomes == NameSet{"A", "B"});  // sets are sorted
  CHECK(t.conditions == NameSet{"C", "D"});
  CHECK(t.regime == NameSet{"C"});
}

TEST_CASE("needed_vars skips regime conditions") {
  DistTerm t = make_term({"Y"}, {"X"}, {"S", "Z"}, {"S"});
  CHECK(needed_vars(t) == NameSet{"X", "Y", "Z"});
}

TEST_CASE("covers captures marginalize-and-condition reachability") {
  DistTerm declared = make_term({"A", "B", "C"}, {"X"});
  CHECK(covers(declared, make_term({"A"}, {"X"})));
  CHECK(covers(declared, make_term({"A"}, {"X"}, {"B"})));
  CHECK(covers(declared, declared));
  CHECK_FALSE(covers(declared, make_term({"A"})));            // interventions differ
  CHECK_FALSE(covers(declared, make_term({"A"}, {"X"}, {"Q"})));  // foreign condition
  CHECK_FALSE(covers(declared, make_term({"Q"}, {"X"})));     // foreign outcome
}

TEST_CASE("builders enforce shape invariants") {
  Expr a = atom(make_term({"A"}));
  CHECK_THROWS_AS(product({}), InputError);
  CHECK_THROWS_AS(sum({}, a), InputError);             // nothing bound
  CHECK_THROWS_AS(sum({"Q"}, a), InputError);          // not free in body
  Expr s = sum({"A"}, atom(make_term({"A"}, {}, {"B"})));
  CHECK_THROWS_AS(sum({"A"}, s), InputError);          // rebinding
  CHECK(s->kind() == ExprKind::sum);
  CHECK(s->bound() == NameSet{"A"});
}

TEST_CASE("free and bound variable accounting") {
  // sum_A p(A|B,S) with S flagged as regime
  Expr e = sum({"A"}, atom(make_term({"A"}, {}, {"B", "S"}, {"S"})));
  CHECK(free_vars(e) == NameSet{"B"});
  CHECK(free_vars_all(e) == NameSet{"B", "S"});
  CHECK(bound_anywhere(e) == NameSet{"A"});

  Expr q = quotient(atom(make_term({"A", "B"})), atom(make_term({"B"})));
  CHECK(free_vars(q) == NameSet{"A", "B"});
}

TEST_CASE("evaluate computes the obvious arithmetic") {
  // p(A) = 0.3/0.7; p(B|A) table
  FnOracle o;
  o.fn = [](const DistTerm& t, const Assignment& a) {
    if (t.outcomes == NameSet{"A"} && t.conditions.empty())
      return a.at("A") ? 0.3 : 0.7;
    if (t.outcomes == NameSet{"B"} && t.conditions == NameSet{"A"}) {
      double p1 = a.at("A") ? 0.9 : 0.2;
      return a.at("B") ? p1 : 1.0 - p1;
    }
    throw InputError("unexpected atom");
  };
  // sum_A p(B|A) p(A) at B=1: 0.2*0.7 + 0.9*0.3 = 0.41
  Expr e = sum({"A"}, product({atom(make_term({"B"}, {}, {"A"})),
                               atom(make_term({"A"}))}));
  CHECK(evaluate(e, o, {{"B", 1}}) == doctest::Approx(0.41).epsilon(1e-12));

  // quotient: p(A)/p(A) = 1
  Expr one = quotient(atom(make_term({"A"})), atom(make_term({"A"})));
  CHECK(evaluate(one, o, {{"A", 1}}) == doctest::Approx(1.0));
}

TEST_CASE("evaluate quotient edge cases") {
  FnOracle zero;
  zero.fn = [](const DistTerm& t, const Assignment&) -> double {
    return t.outcomes == NameSet{"A"} ? 0.0 : 0.5;
  };
  Expr q00 = quotient(atom(make_term({"A"})), atom(make_term({"A"})));
  EvalDiag diag;
  CHECK(evaluate(q00, zero, {{"A", 0}}, &diag) == 0.0);
  CHECK(diag.zero_over_zero == 1);

  Expr bad = quotient(atom(make_term({"B"})), atom(make_term({"A"})));
  CHECK_THROWS_AS(evaluate(bad, zero, {{"A", 0}, {"B", 0}}), EvalError);

  // a zero sibling factor wins before the bad quotient is touched
  Expr guarded = product({atom(make_term({"A"})), bad});
  CHECK(evaluate(guarded, zero, {{"A", 0}, {"B", 0}}) == 0.0);
}

TEST_CASE("canonicalize merges sums and hoists safe factors") {
  Expr inner = atom(make_term({"A", "B"}));
  Expr nested = sum({"A"}, sum({"B"}, inner));
  Expr merged = canonicalize(nested);
  CHECK(merged->kind() == ExprKind::sum);
  CHECK(merged->bound() == NameSet{"A", "B"});
  CHECK(merged->body()->kind() == ExprKind::atom);

  // product factor order is normalized
  Expr p1 = product({atom(make_term({"B"})), atom(make_term({"A"}))});
  Expr p2 = product({atom(make_term({"A"})), atom(make_term({"B"}))});
  CHECK_FALSE(expr_equal(p1, p2));
  CHECK(expr_equal(canonicalize(p1), canonicalize(p2)));

  // a sum factor floats above the product when nothing can be captured
  Expr lifted = canonicalize(
      product({atom(make_term({"A"})),
               sum({"C"}, atom(make_term({"C"}, {}, {"B"})))}));
  CHECK(lifted->kind() == ExprKind::sum);
  CHECK(expr_equal(
      lifted,
      canonicalize(sum({"C"}, product({atom(make_term({"A"})),
                                       atom(make_term({"C"}, {}, {"B"}))})))));

  // ...but stays put when a sibling factor mentions the bound variable
  Expr stuck = canonicalize(
      product({atom(make_term({"C"})),
               sum({"C"}, atom(make_term({"B"}, {}, {"C"})))}));
  CHECK(stuck->kind() == ExprKind::product);
}

TEST_CASE("expr_compare is a total order consistent with expr_equal") {
  std::vector<Expr> pool{
      atom(make_term({"A"})),
      atom(make_term({"B"}, {}, {"A"})),
      sum({"A"}, atom(make_term({"A", "B"}))),
      quotient(atom(make_term({"A", "B"})), atom(make_term({"B"}))),
      product({atom(make_term({"A"})), atom(make_term({"B"}))}),
  };
  for (const auto& x : pool)
    for (const auto& y : pool) {
      CHECK(expr_compare(x, y) == -expr_compare(y, x));
      CHECK((expr_compare(x, y) == 0) == expr_equal(x, y));
    }
}

TEST_CASE("rendering round-trips through latex and json") {
  Expr e = sum({"Z"}, product({atom(make_term({"Y"}, {"X"}, {"S", "Z"}, {"S"})),
                               atom(make_term({"Z"}))}));
  for (Style style : {Style::latex, Style::json}) {
    Expr back = parse_expr(render(e, style), style);
    // regime flags are not part of the textual form
    CHECK(expr_equal(apply_regime(back, {"S"}), e));
  }
  CHECK_THROWS_AS(parse_expr(render(e, Style::text), Style::text), Error);
}

TEST_CASE("random expressions survive render/parse and canonicalize") {
  TinyRng rng(99);
  Admg g = Admg(testutil::verts({"A", "B", "C", "D"}),
                {{"A", "B"}, {"B", "C"}, {"C", "D"}}, {{"A", "C"}});
  testutil::BruteOracle oracle(g, 5);
  const NameSet all{"A", "B", "C", "D"};

  auto random_atom = [&](NameSet avoid) -> Expr {
    NameSet pool = set_minus(all, avoid);
    if (pool.empty()) pool = all;
    NameSet out{pool[static_cast<std::size_t>(rng.below(static_cast<int>(pool.size())))]};
    NameSet rest = set_minus(all, out);
    NameSet doset, cond;
    for (const auto& v : rest) {
      int roll = rng.below(4);
      if (roll == 0) doset.push_back(v);
      else if (roll == 1) cond.push_back(v);
    }
    return atom(make_term(out, doset, cond));
  };

  int built = 0;
  for (int trial = 0; trial < 400; ++trial) {
    Expr e = random_atom({});
    for (int step = 0; step < 3; ++step) {
      int op = rng.below(3);
      if (op == 0) {
        e = product({e, random_atom({})});
      } else if (op == 1) {
        e = quotient(e, random_atom({}));
      } else {
        NameSet fv = set_minus(free_vars(e), bound_anywhere(e));
        if (fv.empty()) continue;
        e = sum({fv[static_cast<std::size_t>(rng.below(static_cast<int>(fv.size())))]}, e);
      }
    }
    ++built;

    for (Style style : {Style::latex, Style::json}) {
      Expr back = parse_expr(render(e, style), style);
      REQUIRE(expr_equal(canonicalize(back), canonicalize(e)));
    }

    // canonicalize must not change the value
    Assignment a;
    for (const auto& v : all) a[v] = rng.below(2);
    double before = evaluate(e, oracle, a);
    double after = evaluate(canonicalize(e), oracle, a);
    REQUIRE(std::fabs(before - after) <= 1e-12);
  }
  CHECK(built >= 390);
}

TEST_CASE("parse_term reads the symbol grammar") {
  DistTerm t = parse_term("P(Y,Z1 | do(X1,X2), S)");
  CHECK(t.outcomes == NameSet{"Y", "Z1"});
  CHECK(t.interventions == NameSet{"X1", "X2"});
  CHECK(t.conditions == NameSet{"S"});
  CHECK(t.regime.empty());  // plain text carries no regime information

  CHECK(parse_term("p(A)") == make_term({"A"}));
  CHECK_THROWS_AS(parse_term("P()"), Error);
  CHECK_THROWS_AS(parse_term("P(A|do(A))"), Error);
  CHECK_THROWS_AS(parse_term("Q(A)"), Error);
}

TEST_CASE("apply_regime restamps conditioning variables") {
  DistTerm t = apply_regime(parse_term("P(Y|do(X),S,T,Z)"), {"S", "T"});
  CHECK(t.regime == NameSet{"S", "T"});
  CHECK(needed_vars(t) == NameSet{"X", "Y", "Z"});

  // only conditions are eligible; outcomes and do() are untouched
  DistTerm u = apply_regime(parse_term("P(S|do(T))"), {"S", "T"});
  CHECK(u.regime.empty());

  Expr e = apply_regime(parse_expr(R"(\sum_{Z}p(Y|Z,S)p(Z|S))", Style::latex), {"S"});
  CHECK(free_vars(e) == NameSet{"Y"});
}

TEST_CASE("is_adjustment recognizes the back-door shape") {
  // the formula is observational: sum_Z p(Y|X,Z) p(Z) answers P(Y|do(X))
  DistTerm query = make_term({"Y"}, {"X"});
  Expr adj = sum({"Z"}, product({atom(make_term({"Y"}, {}, {"X", "Z"})),
                                 atom(make_term({"Z"}))}));
  auto z = is_adjustment(adj, query);
  REQUIRE(z.has_value());
  CHECK(*z == NameSet{"Z"});

  // degenerate set: plain conditioning already identifies the effect
  auto none = is_adjustment(atom(make_term({"Y"}, {}, {"X"})), query);
  REQUIRE(none.has_value());
  CHECK(none->empty());

  // still-interventional factors are not an adjustment formula
  CHECK_FALSE(is_adjustment(atom(make_term({"Y"}, {"X"})), query).has_value());
  // summing over a query variable disqualifies the shape
  Expr over_x = sum({"X"}, product({atom(make_term({"Y"}, {}, {"X"})),
                                    atom(make_term({"X"}))}));
  CHECK_FALSE(is_adjustment(over_x, query).has_value());
  // the weight factor must be an unconditional marginal
  Expr cond_weight =
      sum({"Z"}, product({atom(make_term({"Y"}, {}, {"X", "Z"})),
                          atom(make_term({"Z"}, {}, {"X"}))}));
  CHECK_FALSE(is_adjustment(cond_weight, query).has_value());
  // conditional queries are out of scope entirely
  CHECK_FALSE(is_adjustment(adj, make_term({"Y"}, {"X"}, {"W"})).has_value());
}

TEST_CASE("published-style formulas parse into the expected structure") {
  Expr frac = parse_expr(
      R"(\frac{\sum_{W}p(W)p(X,Y|Z,W)}{\sum_{Y}\sum_{W}p(W)p(X,Y|Z,W)})",
      Style::latex);
  CHECK(frac->kind() == ExprKind::quotient);
  CHECK(free_vars(frac) == NameSet{"X", "Y", "Z"});

  // a trailing \sum without braces scopes to the end of the enclosing group
  Expr loose = parse_expr(R"(\sum_{A}p(B|A)\sum_{C}p(A|C)p(C))", Style::latex);
  Expr strict = parse_expr(
      R"(\sum_{A}\left(p(B|A)\left(\sum_{C}\left(p(A|C)p(C)\right)\right)\right))",
      Style::latex);
  CHECK(expr_equal(canonicalize(loose), canonicalize(strict)));
}
