#include "causalid/dsl.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <utility>

#include "causalid/errors.hpp"

namespace causalid {
namespace {

std::string strip_comment(const std::string& line) {
  auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

std::vector<std::string> split_names(const std::string& s, int line_no) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!valid_name(tok)) throw ParseError("bad variable name '" + tok + "'", line_no);
    out.push_back(tok);
  }
  if (out.empty()) throw ParseError("expected at least one name", line_no);
  return out;
}

using NumberedLines = std::vector<std::pair<int, std::string>>;

NumberedLines numbered(const std::string& text) {
  NumberedLines out;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (!line.empty()) out.emplace_back(line_no, line);
  }
  return out;
}

Admg parse_graph_lines(const NumberedLines& lines,
                       const std::map<std::string, VertexKind>& kinds,
                       const std::map<std::string, int>& kind_lines) {
  std::vector<Vertex> vertices;
  std::map<std::string, int> seen;
  std::vector<std::pair<std::string, std::string>> directed, bidirected;

  auto declare = [&](const std::string& name, int line_no) {
    if (!valid_name(name)) throw ParseError("bad vertex name '" + name + "'", line_no);
    if (seen.emplace(name, static_cast<int>(vertices.size())).second)
      vertices.push_back({name, VertexKind::ordinary});
  };

  for (const auto& [line_no, line] : lines) {
    auto bi = line.find("<->");
    auto di = bi == std::string::npos ? line.find("->") : std::string::npos;
    if (bi == std::string::npos && di == std::string::npos) {
      declare(line, line_no);  // bare vertex declaration
      continue;
    }
    const auto cut = bi != std::string::npos ? bi : di;
    const auto len = bi != std::string::npos ? 3 : 2;
    const std::string a = trim(line.substr(0, cut));
    const std::string b = trim(line.substr(cut + len));
    declare(a, line_no);
    declare(b, line_no);
    if (a == b) throw ParseError("self loop on '" + a + "'", line_no);
    if (bi != std::string::npos)
      bidirected.emplace_back(a, b);
    else
      directed.emplace_back(a, b);
  }

  for (const auto& [name, kind] : kinds) {
    auto it = seen.find(name);
    if (it == seen.end()) {
      auto at = kind_lines.find(name);
      throw ParseError("'" + name + "' has a declared kind but is not a graph vertex",
                       at == kind_lines.end() ? 0 : at->second);
    }
    vertices[it->second].kind = kind;
  }
  return Admg(std::move(vertices), std::move(directed), std::move(bidirected));
}

}  // namespace

Admg parse_graph(const std::string& text, const std::map<std::string, VertexKind>& kinds) {
  return parse_graph_lines(numbered(text), kinds, {});
}

std::string render_graph(const Admg& g) {
  std::string out;
  for (const auto& v : g.vertices()) out += v.name + "\n";
  for (const auto& [f, t] : g.directed_edges())
    out += g.vertex(f).name + " -> " + g.vertex(t).name + "\n";
  for (const auto& [a, b] : g.bidirected_edges())
    out += g.vertex(a).name + " <-> " + g.vertex(b).name + "\n";
  return out;
}

DistTerm parse_dist(const std::string& text) {
  try {
    return parse_term(text);
  } catch (const InputError& e) {
    throw ParseError(e.what());
  }
}

ProblemSpec parse_problem(const std::string& text) {
  std::map<std::string, VertexKind> kinds;
  std::map<std::string, int> kind_lines;
  struct Block {
    NumberedLines lines;
    int declared_at = 0;
  };
  std::map<std::string, Block> blocks;
  std::string open;

  auto open_block = [&](const std::string& name, int line_no) {
    if (name != "graph" && name != "data" && name != "query")
      throw ParseError("unknown block '" + name + "'", line_no);
    if (blocks.count(name)) throw ParseError("duplicate block '" + name + "'", line_no);
    blocks[name].declared_at = line_no;
  };

  for (const auto& [line_no, line] : numbered(text)) {
    if (!open.empty()) {
      if (line == "}") {
        open.clear();
        continue;
      }
      blocks[open].lines.emplace_back(line_no, line);
      continue;
    }
    if (auto brace = line.find('{'); brace != std::string::npos) {
      const std::string name = trim(line.substr(0, brace));
      open_block(name, line_no);
      const std::string rest = trim(line.substr(brace + 1));
      if (rest.empty()) {
        open = name;  // multi-line block
      } else {
        if (rest.back() != '}')
          throw ParseError("inline block '" + name + "' must close on the same line", line_no);
        const std::string body = trim(rest.substr(0, rest.size() - 1));
        if (!body.empty()) blocks[name].lines.emplace_back(line_no, body);
      }
      continue;
    }
    if (auto colon = line.find(':'); colon != std::string::npos) {
      const std::string key = trim(line.substr(0, colon));
      VertexKind kind;
      if (key == "transportability")
        kind = VertexKind::transportability;
      else if (key == "selection")
        kind = VertexKind::selection;
      else
        throw ParseError("unknown header '" + key + "'", line_no);
      for (const auto& name : split_names(line.substr(colon + 1), line_no)) {
        if (!kinds.emplace(name, kind).second)
          throw ParseError("vertex '" + name + "' given two kinds", line_no);
        kind_lines[name] = line_no;
      }
      continue;
    }
    throw ParseError("expected a header or a block, got '" + line + "'", line_no);
  }
  if (!open.empty())
    throw ParseError("block '" + open + "' is never closed", blocks[open].declared_at);
  for (const char* required : {"graph", "data", "query"})
    if (!blocks.count(required))
      throw ParseError(std::string("missing ") + required + " block");

  if (blocks["graph"].lines.empty())
    throw ParseError("graph block is empty", blocks["graph"].declared_at);
  if (blocks["data"].lines.empty())
    throw ParseError("data block is empty", blocks["data"].declared_at);
  if (blocks["query"].lines.size() != 1)
    throw ParseError("query block needs exactly one distribution",
                     blocks["query"].declared_at);

  ProblemSpec spec{parse_graph_lines(blocks["graph"].lines, kinds, kind_lines),
                   {},
                   DistTerm{},
                   kinds,
                   {}};

  NameSet regime_vars;
  regime_vars.reserve(kinds.size());
  for (const auto& [name, kind] : kinds) regime_vars.push_back(name);  // map order = sorted

  auto parse_checked = [&](const std::string& line, int line_no) {
    DistTerm t;
    try {
      t = parse_dist(line);
    } catch (const ParseError& e) {
      if (e.line > 0) throw;
      throw ParseError(e.what(), line_no);
    }
    for (const auto& v : needed_vars(t))
      if (!spec.graph.has_vertex(v))
        throw ParseError("'" + v + "' is not a graph vertex", line_no);
    return apply_regime(t, regime_vars);
  };

  for (const auto& [line_no, line] : blocks["data"].lines)
    spec.inputs.push_back(parse_checked(line, line_no));
  const auto& [qline_no, qline] = blocks["query"].lines.front();
  spec.query = parse_checked(qline, qline_no);
  return spec;
}

ProblemSpec load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read problem file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_problem(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace causalid
