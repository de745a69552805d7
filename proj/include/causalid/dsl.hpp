#pragma once

#include <map>
#include <string>
#include <vector>

#include "causalid/admg.hpp"
#include "causalid/identify.hpp"
#include "causalid/symexpr.hpp"

namespace causalid {

/// Graph text: one item per line — "A -> B" (directed edge), "A <-> B"
/// (bidirected edge), or a bare name (vertex declaration); whitespace is
/// free-form and '#' starts a comment. Vertices are declared implicitly in
/// first-mention order; `kinds` assigns non-ordinary kinds by name (every key
/// must name a vertex). Malformed lines and self loops raise ParseError with
/// their line number; a directed cycle raises InputError.
Admg parse_graph(const std::string& text,
                 const std::map<std::string, VertexKind>& kinds = {});

/// Inverse of parse_graph: every vertex as a bare line in index order, then
/// the directed and bidirected edges in stored order, so that
/// parse_graph(render_graph(g)) reproduces g exactly (kinds aside — those
/// travel in the problem header, not the graph text).
std::string render_graph(const Admg& g);

/// One distribution symbol, e.g. "P(Y,Z1 | do(X1,X2), S)": outcomes before
/// the bar; after it, a do(...) group holds interventions and the remaining
/// names are conditions. ParseError on malformed text or a variable appearing
/// in two roles.
DistTerm parse_dist(const std::string& text);

struct ProblemOptions {
  SearchBudget budget;
  Style style = Style::text;
};

/// A full identification problem. Vertex kinds other than ordinary mark
/// sampling-regime context; such variables are regime-flagged on every input
/// and query term.
struct ProblemSpec {
  Admg graph;
  std::vector<DistTerm> inputs;
  DistTerm query;
  std::map<std::string, VertexKind> kinds;
  ProblemOptions options;
};

/// Problem file grammar — optional kind headers, then three brace blocks,
/// each required exactly once; '#' comments anywhere:
///
///   transportability: T        # comma-separated vertex names
///   selection: S
///   graph {
///     T -> Z1
///     Z1 <-> X
///   }
///   data {
///     P(Y,Z1 | do(X), T, S)    # one distribution per line
///     P(X,Z1)
///   }
///   query {
///     P(Y | do(X))             # exactly one distribution
///   }
///
/// Every variable in data and query lines must be a graph vertex and every
/// kind-header name must, too. Errors carry line numbers where possible.
ProblemSpec parse_problem(const std::string& text);

/// Reads and parses a problem file; the file name is prefixed to errors.
ProblemSpec load_problem(const std::string& path);

}  // namespace causalid
