#include "causalid/symexpr.hpp"

#include <cctype>
#include <json.hpp>

#include "causalid/errors.hpp"

namespace causalid {

using json = nlohmann::ordered_json;

// ------------------------------------------------------------------ terms --

DistTerm make_term(NameSet outcomes, NameSet interventions, NameSet conditions,
                   NameSet regime) {
  DistTerm t;
  t.outcomes = make_set(std::move(outcomes));
  t.interventions = make_set(std::move(interventions));
  t.conditions = make_set(std::move(conditions));
  t.regime = make_set(std::move(regime));
  if (t.outcomes.empty()) throw InputError("distribution term has no outcomes");
  if (!disjoint(t.outcomes, t.interventions) || !disjoint(t.outcomes, t.conditions) ||
      !disjoint(t.interventions, t.conditions))
    throw InputError("distribution term roles overlap: " + render_term(t, Style::text));
  if (!is_subset(t.regime, t.conditions))
    throw InputError("regime variables must be conditioning variables");
  for (const auto& set : {t.outcomes, t.interventions, t.conditions})
    for (const auto& v : set) {
      if (v.empty()) throw InputError("empty variable name in distribution term");
      for (char c : v)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
          throw InputError("invalid variable name '" + v + "'");
    }
  return t;
}

bool term_less(const DistTerm& a, const DistTerm& b) {
  if (a.outcomes != b.outcomes) return a.outcomes < b.outcomes;
  if (a.interventions != b.interventions) return a.interventions < b.interventions;
  if (a.conditions != b.conditions) return a.conditions < b.conditions;
  return a.regime < b.regime;
}

NameSet needed_vars(const DistTerm& t) {
  return set_union(set_union(t.outcomes, t.interventions), set_minus(t.conditions, t.regime));
}

bool covers(const DistTerm& declared, const DistTerm& atom) {
  if (atom.interventions != declared.interventions) return false;
  if (atom.outcomes.empty() || !is_subset(atom.outcomes, declared.outcomes)) return false;
  if (!is_subset(declared.conditions, atom.conditions)) return false;
  return is_subset(set_minus(atom.conditions, declared.conditions), declared.outcomes);
}

// --------------------------------------------------------------- builders --

Expr atom(DistTerm t) {
  auto node = std::shared_ptr<ExprNode>(new ExprNode());
  node->kind_ = ExprKind::atom;
  node->term_ = make_term(t.outcomes, t.interventions, t.conditions, t.regime);
  return node;
}

Expr product(std::vector<Expr> factors) {
  if (factors.empty()) throw InputError("product needs at least one factor");
  for (const auto& f : factors)
    if (!f) throw InputError("null factor in product");
  if (factors.size() == 1) return factors[0];
  auto node = std::shared_ptr<ExprNode>(new ExprNode());
  node->kind_ = ExprKind::product;
  node->parts_ = std::move(factors);
  return node;
}

Expr quotient(Expr num, Expr den) {
  if (!num || !den) throw InputError("null operand in quotient");
  auto node = std::shared_ptr<ExprNode>(new ExprNode());
  node->kind_ = ExprKind::quotient;
  node->parts_ = {std::move(num), std::move(den)};
  return node;
}

Expr sum(NameSet bound, Expr body) {
  bound = make_set(std::move(bound));
  if (bound.empty()) throw InputError("sum binds no variables");
  if (!body) throw InputError("null sum body");
  if (!is_subset(bound, free_vars_all(body)))
    throw InputError("sum binds variables not free in its body: " + join(bound));
  if (!disjoint(bound, bound_anywhere(body)))
    throw InputError("variable bound twice on a path: " + join(bound));
  auto node = std::shared_ptr<ExprNode>(new ExprNode());
  node->kind_ = ExprKind::sum;
  node->bound_ = std::move(bound);
  node->parts_ = {std::move(body)};
  return node;
}

// ------------------------------------------------------- structural order --

namespace {

int rank_of(ExprKind k) {
  switch (k) {
    case ExprKind::atom: return 0;
    case ExprKind::sum: return 1;
    case ExprKind::product: return 2;
    case ExprKind::quotient: return 3;
  }
  return 4;
}

int compare_sets(const NameSet& a, const NameSet& b) {
  if (a < b) return -1;
  if (b < a) return 1;
  return 0;
}

}  // namespace

int expr_compare(const Expr& a, const Expr& b) {
  if (rank_of(a->kind()) != rank_of(b->kind()))
    return rank_of(a->kind()) < rank_of(b->kind()) ? -1 : 1;
  switch (a->kind()) {
    case ExprKind::atom: {
      const DistTerm &x = a->term(), &y = b->term();
      if (int c = compare_sets(x.outcomes, y.outcomes)) return c;
      if (int c = compare_sets(x.interventions, y.interventions)) return c;
      if (int c = compare_sets(x.conditions, y.conditions)) return c;
      return compare_sets(x.regime, y.regime);
    }
    case ExprKind::sum: {
      if (int c = compare_sets(a->bound(), b->bound())) return c;
      return expr_compare(a->body(), b->body());
    }
    case ExprKind::product: {
      if (a->factors().size() != b->factors().size())
        return a->factors().size() < b->factors().size() ? -1 : 1;
      for (size_t i = 0; i < a->factors().size(); ++i)
        if (int c = expr_compare(a->factors()[i], b->factors()[i])) return c;
      return 0;
    }
    case ExprKind::quotient: {
      if (int c = expr_compare(a->numerator(), b->numerator())) return c;
      return expr_compare(a->denominator(), b->denominator());
    }
  }
  return 0;
}

bool expr_equal(const Expr& a, const Expr& b) { return expr_compare(a, b) == 0; }

// ----------------------------------------------------------- free / bound --

namespace {

void collect_free(const Expr& e, bool include_regime, NameSet& acc) {
  switch (e->kind()) {
    case ExprKind::atom: {
      const DistTerm& t = e->term();
      acc = set_union(acc, t.outcomes);
      acc = set_union(acc, t.interventions);
      acc = set_union(acc, include_regime ? t.conditions : set_minus(t.conditions, t.regime));
      return;
    }
    case ExprKind::product:
    case ExprKind::quotient:
      for (const auto& f : e->factors()) collect_free(f, include_regime, acc);
      return;
    case ExprKind::sum: {
      NameSet inner;
      collect_free(e->body(), include_regime, inner);
      acc = set_union(acc, set_minus(inner, e->bound()));
      return;
    }
  }
}

}  // namespace

NameSet free_vars(const Expr& e) {
  NameSet acc;
  collect_free(e, false, acc);
  return acc;
}

NameSet free_vars_all(const Expr& e) {
  NameSet acc;
  collect_free(e, true, acc);
  return acc;
}

NameSet bound_anywhere(const Expr& e) {
  NameSet acc;
  switch (e->kind()) {
    case ExprKind::atom:
      return acc;
    case ExprKind::product:
    case ExprKind::quotient:
      for (const auto& f : e->factors()) acc = set_union(acc, bound_anywhere(f));
      return acc;
    case ExprKind::sum:
      return set_union(e->bound(), bound_anywhere(e->body()));
  }
  return acc;
}

// -------------------------------------------------------------- evaluation --

namespace {

double eval_rec(const Expr& e, const DistOracle& oracle, const Assignment& a,
                EvalDiag* diag) {
  switch (e->kind()) {
    case ExprKind::atom: {
      for (const auto& v : needed_vars(e->term()))
        if (!a.count(v))
          throw EvalError("no assignment for variable '" + v + "' in atom " +
                          render_term(e->term(), Style::text));
      return oracle.atom_probability(e->term(), a);
    }
    case ExprKind::product: {
      double prod = 1.0;
      bool saw_zero = false;
      std::exception_ptr first_error;
      for (const auto& f : e->factors()) {
        try {
          double v = eval_rec(f, oracle, a, diag);
          if (v == 0.0) saw_zero = true;
          prod *= v;
        } catch (const MissingInputError&) {
          throw;  // a structurally unanswerable atom is never rescued by a zero
        } catch (const Error&) {
          if (!first_error) first_error = std::current_exception();
        }
      }
      if (saw_zero) return 0.0;
      if (first_error) std::rethrow_exception(first_error);
      return prod;
    }
    case ExprKind::quotient: {
      double num = eval_rec(e->numerator(), oracle, a, diag);
      double den = eval_rec(e->denominator(), oracle, a, diag);
      if (den == 0.0) {
        if (num == 0.0) {
          if (diag) ++diag->zero_over_zero;
          return 0.0;
        }
        throw EvalError("nonzero numerator over zero denominator");
      }
      return num / den;
    }
    case ExprKind::sum: {
      const NameSet& bs = e->bound();
      std::vector<int> cards;
      cards.reserve(bs.size());
      for (const auto& v : bs) cards.push_back(oracle.cardinality(v));
      Assignment local = a;
      std::vector<int> idx(bs.size(), 0);
      double total = 0.0;
      for (;;) {
        for (size_t i = 0; i < bs.size(); ++i) local[bs[i]] = idx[i];
        total += eval_rec(e->body(), oracle, local, diag);
        size_t i = 0;
        while (i < bs.size() && ++idx[i] == cards[i]) idx[i++] = 0;
        if (i == bs.size()) break;
      }
      return total;
    }
  }
  throw EvalError("corrupt expression node");
}

}  // namespace

double evaluate(const Expr& e, const DistOracle& oracle, const Assignment& a,
                EvalDiag* diag) {
  if (!e) throw InputError("null expression");
  return eval_rec(e, oracle, a, diag);
}

// ---------------------------------------------------------- canonical form --

Expr canonicalize(const Expr& e) {
  switch (e->kind()) {
    case ExprKind::atom:
      return e;
    case ExprKind::quotient:
      return quotient(canonicalize(e->numerator()), canonicalize(e->denominator()));
    case ExprKind::sum: {
      Expr body = canonicalize(e->body());
      NameSet bound = e->bound();
      while (body->kind() == ExprKind::sum) {  // merge directly nested sums
        bound = set_union(bound, body->bound());
        body = body->body();
      }
      return sum(std::move(bound), std::move(body));
    }
    case ExprKind::product: {
      std::vector<Expr> fs;
      for (const auto& f : e->factors()) {
        Expr cf = canonicalize(f);
        if (cf->kind() == ExprKind::product)
          fs.insert(fs.end(), cf->factors().begin(), cf->factors().end());
        else
          fs.push_back(cf);
      }
      // Hoist a sum factor above the product when its bound variables cannot
      // capture anything in the sibling factors. This makes canonical forms
      // agree across the different orders in which a derivation interleaves
      // composition and marginalization.
      for (size_t i = 0; i < fs.size(); ++i) {
        if (fs[i]->kind() != ExprKind::sum) continue;
        NameSet others_free, others_bound;
        for (size_t j = 0; j < fs.size(); ++j) {
          if (j == i) continue;
          others_free = set_union(others_free, free_vars_all(fs[j]));
          others_bound = set_union(others_bound, bound_anywhere(fs[j]));
        }
        if (disjoint(fs[i]->bound(), others_free) &&
            disjoint(fs[i]->bound(), others_bound)) {
          std::vector<Expr> inner;
          for (size_t j = 0; j < fs.size(); ++j)
            if (j != i) inner.push_back(fs[j]);
          inner.push_back(fs[i]->body());
          return canonicalize(sum(fs[i]->bound(), product(std::move(inner))));
        }
      }
      std::sort(fs.begin(), fs.end(),
                [](const Expr& x, const Expr& y) { return expr_compare(x, y) < 0; });
      return product(std::move(fs));
    }
  }
  throw InputError("corrupt expression node");
}

// ---------------------------------------------------------------- rendering --

namespace {

std::string term_body(const DistTerm& t, const char* do_open) {
  // Outcomes, then a bar with do(...) first and conditions after; regime
  // conditions render last so context indicators trail the list.
  std::string s = join(t.outcomes);
  NameSet plain = set_minus(t.conditions, t.regime);
  if (!t.interventions.empty() || !t.conditions.empty()) {
    s += "|";
    bool first = true;
    if (!t.interventions.empty()) {
      s += std::string(do_open) + join(t.interventions) + ")";
      first = false;
    }
    for (const auto& part : {plain, t.regime})
      for (const auto& v : part) {
        if (!first) s += ",";
        s += v;
        first = false;
      }
  }
  return s;
}

std::string render_latex(const Expr& e) {
  switch (e->kind()) {
    case ExprKind::atom:
      return "p(" + term_body(e->term(), "do(") + ")";
    case ExprKind::sum:
      return "\\sum_{" + join(e->bound()) + "}\\left(" + render_latex(e->body()) +
             "\\right)";
    case ExprKind::product: {
      std::string s;
      for (const auto& f : e->factors()) {
        if (f->kind() == ExprKind::product)
          s += "\\left(" + render_latex(f) + "\\right)";
        else
          s += render_latex(f);
      }
      return s;
    }
    case ExprKind::quotient:
      return "\\frac{" + render_latex(e->numerator()) + "}{" +
             render_latex(e->denominator()) + "}";
  }
  return "";
}

std::string render_text(const Expr& e) {
  switch (e->kind()) {
    case ExprKind::atom:
      return "p(" + term_body(e->term(), "do(") + ")";
    case ExprKind::sum:
      return "sum_{" + join(e->bound()) + "}(" + render_text(e->body()) + ")";
    case ExprKind::product: {
      std::string s;
      for (const auto& f : e->factors()) {
        if (!s.empty()) s += " ";
        if (f->kind() == ExprKind::product)
          s += "(" + render_text(f) + ")";
        else
          s += render_text(f);
      }
      return s;
    }
    case ExprKind::quotient:
      return "(" + render_text(e->numerator()) + ") / (" +
             render_text(e->denominator()) + ")";
  }
  return "";
}

json term_json(const DistTerm& t) {
  json j;
  j["out"] = t.outcomes;
  j["do"] = t.interventions;
  j["cond"] = t.conditions;
  j["regime"] = t.regime;
  return j;
}

json expr_json(const Expr& e) {
  json j;
  switch (e->kind()) {
    case ExprKind::atom:
      j["kind"] = "atom";
      j["p"] = term_json(e->term());
      return j;
    case ExprKind::product: {
      j["kind"] = "product";
      json arr = json::array();
      for (const auto& f : e->factors()) arr.push_back(expr_json(f));
      j["factors"] = arr;
      return j;
    }
    case ExprKind::quotient:
      j["kind"] = "quotient";
      j["num"] = expr_json(e->numerator());
      j["den"] = expr_json(e->denominator());
      return j;
    case ExprKind::sum:
      j["kind"] = "sum";
      j["over"] = e->bound();
      j["body"] = expr_json(e->body());
      return j;
  }
  return j;
}

}  // namespace

std::string render(const Expr& e, Style style) {
  if (!e) throw InputError("null expression");
  switch (style) {
    case Style::text: return render_text(e);
    case Style::latex: return render_latex(e);
    case Style::json: return expr_json(e).dump();
  }
  return "";
}

std::string render_term(const DistTerm& t, Style style) {
  switch (style) {
    case Style::text:
    case Style::latex: return "P(" + term_body(t, "do(") + ")";
    case Style::json: return term_json(t).dump();
  }
  return "";
}

// ------------------------------------------------------------------ parsing --

namespace {

NameSet parse_name_list(const std::string& s, const char* what) {
  NameSet out;
  std::string cur;
  auto flush = [&] {
    // trim
    size_t b = cur.find_first_not_of(" \t");
    size_t e = cur.find_last_not_of(" \t");
    if (b == std::string::npos) throw ParseError(std::string("empty name in ") + what);
    out.push_back(cur.substr(b, e - b + 1));
    cur.clear();
  };
  for (char c : s) {
    if (c == ',')
      flush();
    else
      cur += c;
  }
  flush();
  return out;  // caller sorts via make_term / make_set
}

// Splits "Y,Z1 | do(X1,X2), S" into a term; '|' and ',' are only significant
// at parenthesis depth zero.
DistTerm parse_term_body(const std::string& body) {
  int depth = 0;
  size_t bar = std::string::npos;
  for (size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '(') ++depth;
    if (body[i] == ')') --depth;
    if (body[i] == '|' && depth == 0) {
      if (bar != std::string::npos) throw ParseError("multiple '|' in distribution term");
      bar = i;
    }
  }
  std::string left = bar == std::string::npos ? body : body.substr(0, bar);
  NameSet outcomes = parse_name_list(left, "outcomes");
  NameSet interventions, conditions;
  if (bar != std::string::npos) {
    std::string right = body.substr(bar + 1);
    std::vector<std::string> items;
    std::string cur;
    depth = 0;
    for (char c : right) {
      if (c == '(') ++depth;
      if (c == ')') --depth;
      if (c == ',' && depth == 0) {
        items.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    items.push_back(cur);
    bool saw_do = false;
    for (auto& item : items) {
      size_t b = item.find_first_not_of(" \t");
      size_t e = item.find_last_not_of(" \t");
      if (b == std::string::npos) throw ParseError("empty conditioning item");
      std::string it = item.substr(b, e - b + 1);
      if (it.size() >= 3 && (it.substr(0, 3) == "do(" || it.substr(0, 3) == "Do(") &&
          it.back() == ')') {
        if (saw_do) throw ParseError("multiple do(...) groups in one term");
        saw_do = true;
        interventions = parse_name_list(it.substr(3, it.size() - 4), "do()");
      } else {
        conditions.push_back(it);
      }
    }
  }
  try {
    return make_term(std::move(outcomes), std::move(interventions), std::move(conditions));
  } catch (const InputError& err) {
    throw ParseError(err.what());
  }
}

struct Lexer {
  std::string s;
  size_t pos = 0;

  void skip_ws() {
    while (pos < s.size()) {
      if (std::isspace(static_cast<unsigned char>(s[pos]))) {
        ++pos;
      } else if (s.compare(pos, 5, "\\cdot") == 0) {
        pos += 5;  // cosmetic latex product dot
      } else if (s.compare(pos, 2, "\\,") == 0) {
        pos += 2;  // cosmetic latex thin space
      } else {
        break;
      }
    }
  }
  bool eat(const std::string& tok) {
    skip_ws();
    if (s.compare(pos, tok.size(), tok) == 0) {
      pos += tok.size();
      return true;
    }
    return false;
  }
  bool peek(const std::string& tok) {
    skip_ws();
    return s.compare(pos, tok.size(), tok) == 0;
  }
  bool done() {
    skip_ws();
    return pos >= s.size();
  }
  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(msg + " at offset " + std::to_string(pos));
  }
};

Expr parse_expr_rec(Lexer& lx);

// A group is { expr } or \left( expr \right) or ( expr ).
Expr parse_group(Lexer& lx) {
  if (lx.eat("{")) {
    Expr e = parse_expr_rec(lx);
    if (!lx.eat("}")) lx.fail("expected '}'");
    return e;
  }
  if (lx.eat("\\left(")) {
    Expr e = parse_expr_rec(lx);
    if (!lx.eat("\\right)")) lx.fail("expected '\\right)'");
    return e;
  }
  if (lx.eat("(")) {
    Expr e = parse_expr_rec(lx);
    if (!lx.eat(")")) lx.fail("expected ')'");
    return e;
  }
  lx.fail("expected a group");
}

std::optional<Expr> parse_item(Lexer& lx) {
  lx.skip_ws();
  if (lx.eat("\\sum_")) {
    if (!lx.eat("{")) lx.fail("expected '{' after \\sum_");
    size_t close = lx.s.find('}', lx.pos);
    if (close == std::string::npos) lx.fail("unterminated \\sum_{");
    NameSet bound = parse_name_list(lx.s.substr(lx.pos, close - lx.pos), "sum index");
    lx.pos = close + 1;
    // With an explicit group the sum covers exactly that group; otherwise it
    // extends to the end of the enclosing scope, as in conventional notation.
    lx.skip_ws();
    Expr body = (lx.peek("{") || lx.peek("\\left(") || lx.peek("("))
                    ? parse_group(lx)
                    : parse_expr_rec(lx);
    try {
      return sum(std::move(bound), std::move(body));
    } catch (const InputError& err) {
      throw ParseError(err.what());
    }
  }
  if (lx.eat("\\frac")) {
    Expr num = parse_group(lx);
    Expr den = parse_group(lx);
    return quotient(num, den);
  }
  if (lx.peek("\\left(")) return parse_group(lx);
  if (lx.peek("p(") || lx.peek("P(")) {
    lx.pos += 2;
    int depth = 1;
    size_t start = lx.pos;
    while (lx.pos < lx.s.size() && depth > 0) {
      if (lx.s[lx.pos] == '(') ++depth;
      if (lx.s[lx.pos] == ')') --depth;
      ++lx.pos;
    }
    if (depth != 0) lx.fail("unterminated distribution term");
    return atom(parse_term_body(lx.s.substr(start, lx.pos - 1 - start)));
  }
  if (lx.peek("(")) return parse_group(lx);
  return std::nullopt;
}

Expr parse_expr_rec(Lexer& lx) {
  std::vector<Expr> items;
  while (auto item = parse_item(lx)) items.push_back(*item);
  if (items.empty()) lx.fail("expected an expression");
  return items.size() == 1 ? items[0] : product(std::move(items));
}

Expr expr_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw ParseError("expression json must be an object with a 'kind'");
  std::string kind = j.at("kind").get<std::string>();
  auto names = [](const json& a) {
    NameSet out;
    for (const auto& v : a) out.push_back(v.get<std::string>());
    return out;
  };
  try {
    if (kind == "atom") {
      const json& p = j.at("p");
      return atom(make_term(names(p.at("out")), names(p.at("do")), names(p.at("cond")),
                            names(p.at("regime"))));
    }
    if (kind == "product") {
      std::vector<Expr> fs;
      for (const auto& f : j.at("factors")) fs.push_back(expr_from_json(f));
      return product(std::move(fs));
    }
    if (kind == "quotient")
      return quotient(expr_from_json(j.at("num")), expr_from_json(j.at("den")));
    if (kind == "sum")
      return sum(names(j.at("over")), expr_from_json(j.at("body")));
  } catch (const InputError& err) {
    throw ParseError(err.what());
  }
  throw ParseError("unknown expression kind '" + kind + "'");
}

}  // namespace

Expr parse_expr(const std::string& s, Style style) {
  if (style == Style::json) {
    json j;
    try {
      j = json::parse(s);
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad json: ") + e.what());
    }
    return expr_from_json(j);
  }
  if (style == Style::text)
    throw ParseError("text style is render-only; parse latex or json");
  Lexer lx{s};
  Expr e = parse_expr_rec(lx);
  if (!lx.done()) lx.fail("trailing input");
  return e;
}

DistTerm parse_term(const std::string& s) {
  Lexer lx{s};
  lx.skip_ws();
  if (!(lx.eat("P(") || lx.eat("p("))) lx.fail("expected P(...)");
  size_t start = lx.pos;
  int depth = 1;
  while (lx.pos < lx.s.size() && depth > 0) {
    if (lx.s[lx.pos] == '(') ++depth;
    if (lx.s[lx.pos] == ')') --depth;
    ++lx.pos;
  }
  if (depth != 0) lx.fail("unterminated distribution term");
  DistTerm t = parse_term_body(lx.s.substr(start, lx.pos - 1 - start));
  if (!lx.done()) lx.fail("trailing input after distribution term");
  return t;
}

DistTerm apply_regime(const DistTerm& t, const NameSet& regime_vars) {
  return make_term(t.outcomes, t.interventions, t.conditions,
                   set_intersect(t.conditions, regime_vars));
}

Expr apply_regime(const Expr& e, const NameSet& regime_vars) {
  switch (e->kind()) {
    case ExprKind::atom:
      return atom(apply_regime(e->term(), regime_vars));
    case ExprKind::product: {
      std::vector<Expr> parts;
      parts.reserve(e->factors().size());
      for (const auto& f : e->factors()) parts.push_back(apply_regime(f, regime_vars));
      return product(std::move(parts));
    }
    case ExprKind::quotient:
      return quotient(apply_regime(e->numerator(), regime_vars),
                      apply_regime(e->denominator(), regime_vars));
    case ExprKind::sum:
      return sum(e->bound(), apply_regime(e->body(), regime_vars));
  }
  return e;  // unreachable
}

// -------------------------------------------------------------- adjustment --

std::optional<NameSet> is_adjustment(const Expr& e0, const DistTerm& query) {
  if (!query.conditions.empty()) return std::nullopt;
  Expr e = canonicalize(e0);
  NameSet z;
  Expr body = e;
  if (e->kind() == ExprKind::sum) {
    z = e->bound();
    body = e->body();
  }
  std::vector<Expr> factors;
  if (body->kind() == ExprKind::product)
    factors = body->factors();
  else
    factors = {body};
  for (const auto& f : factors)
    if (f->kind() != ExprKind::atom) return std::nullopt;
  if (!disjoint(z, query.outcomes) || !disjoint(z, query.interventions))
    return std::nullopt;

  NameSet want_cond = set_union(query.interventions, z);
  auto is_outcome_factor = [&](const Expr& f) {
    const DistTerm& t = f->term();
    return t.outcomes == query.outcomes && t.interventions.empty() &&
           t.conditions == want_cond;
  };
  auto is_weight_factor = [&](const Expr& f) {
    const DistTerm& t = f->term();
    return t.outcomes == z && t.interventions.empty() && t.conditions.empty();
  };
  if (z.empty())
    return factors.size() == 1 && is_outcome_factor(factors[0])
               ? std::optional<NameSet>(NameSet{})
               : std::nullopt;
  if (factors.size() != 2) return std::nullopt;
  for (int i = 0; i < 2; ++i)
    if (is_outcome_factor(factors[i]) && is_weight_factor(factors[1 - i])) return z;
  return std::nullopt;
}

}  // namespace causalid
