#include "causalid/admg.hpp"

#include <algorithm>
#include <queue>

#include "causalid/errors.hpp"

namespace causalid {

Admg::Admg(std::vector<Vertex> vertices,
           std::vector<std::pair<std::string, std::string>> directed,
           std::vector<std::pair<std::string, std::string>> bidirected)
    : vertices_(std::move(vertices)) {
  if (static_cast<int>(vertices_.size()) > kMaxVertices)
    throw InputError("graph exceeds " + std::to_string(kMaxVertices) + " vertices");
  for (int i = 0; i < size(); ++i) {
    if (vertices_[i].name.empty()) throw InputError("empty vertex name");
    if (!index_.emplace(vertices_[i].name, i).second)
      throw InputError("duplicate vertex '" + vertices_[i].name + "'");
  }
  parents_.assign(size(), 0);
  children_.assign(size(), 0);
  siblings_.assign(size(), 0);
  for (const auto& [from, to] : directed) {
    int f = index_of(from), t = index_of(to);
    if (f == t) throw InputError("self loop on '" + from + "'");
    if (children_[f] & (VertexMask{1} << t)) continue;  // duplicate edge
    directed_.emplace_back(f, t);
    children_[f] |= VertexMask{1} << t;
    parents_[t] |= VertexMask{1} << f;
  }
  for (const auto& [a, b] : bidirected) {
    int x = index_of(a), y = index_of(b);
    if (x == y) throw InputError("bidirected self loop on '" + a + "'");
    if (x > y) std::swap(x, y);
    if (siblings_[x] & (VertexMask{1} << y)) continue;
    bidirected_.emplace_back(x, y);
    siblings_[x] |= VertexMask{1} << y;
    siblings_[y] |= VertexMask{1} << x;
  }
  check_acyclic();
}

void Admg::check_acyclic() const {
  // Kahn's algorithm over the directed part.
  std::vector<int> indeg(size(), 0);
  for (const auto& [f, t] : directed_) {
    (void)f;
    ++indeg[t];
  }
  std::queue<int> q;
  for (int i = 0; i < size(); ++i)
    if (indeg[i] == 0) q.push(i);
  int seen = 0;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    ++seen;
    VertexMask ch = children_[v];
    while (ch) {
      int c = __builtin_ctz(ch);
      ch &= ch - 1;
      if (--indeg[c] == 0) q.push(c);
    }
  }
  if (seen != size()) throw InputError("directed part of the graph has a cycle");
}

bool Admg::has_vertex(const std::string& name) const { return index_.count(name) > 0; }

int Admg::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("unknown vertex '" + name + "'");
  return it->second;
}

NameSet Admg::vertex_names() const {
  std::vector<std::string> names;
  names.reserve(vertices_.size());
  for (const auto& v : vertices_) names.push_back(v.name);
  return make_set(std::move(names));
}

NameSet Admg::vertices_of_kind(VertexKind k) const {
  std::vector<std::string> names;
  for (const auto& v : vertices_)
    if (v.kind == k) names.push_back(v.name);
  return make_set(std::move(names));
}

VertexMask Admg::mask_of(const NameSet& names) const {
  VertexMask m = 0;
  for (const auto& n : names) m |= VertexMask{1} << index_of(n);
  return m;
}

NameSet Admg::names_of(VertexMask m) const {
  std::vector<std::string> names;
  while (m) {
    int v = __builtin_ctz(m);
    m &= m - 1;
    names.push_back(vertices_[v].name);
  }
  return make_set(std::move(names));
}

VertexMask Admg::all_mask() const {
  return size() == kMaxVertices ? ~VertexMask{0} : (VertexMask{1} << size()) - 1;
}

VertexMask Admg::ancestors(VertexMask of) const {
  VertexMask anc = of;
  bool grew = true;
  while (grew) {
    grew = false;
    VertexMask m = anc;
    while (m) {
      int v = __builtin_ctz(m);
      m &= m - 1;
      VertexMask np = parents_[v] & ~anc;
      if (np) {
        anc |= np;
        grew = true;
      }
    }
  }
  return anc;
}

NameSet Admg::ancestors(const NameSet& of) const { return names_of(ancestors(mask_of(of))); }

Admg Admg::mutilate(const Mutilation& m) const {
  return mutilate_masks(mask_of(m.cut_incoming), mask_of(m.cut_outgoing));
}

Admg Admg::mutilate_masks(VertexMask cut_incoming, VertexMask cut_outgoing) const {
  std::vector<std::pair<std::string, std::string>> dir, bidir;
  for (const auto& [f, t] : directed_) {
    if (cut_incoming & (VertexMask{1} << t)) continue;
    if (cut_outgoing & (VertexMask{1} << f)) continue;
    dir.emplace_back(vertices_[f].name, vertices_[t].name);
  }
  for (const auto& [a, b] : bidirected_) {
    if (cut_incoming & ((VertexMask{1} << a) | (VertexMask{1} << b))) continue;
    bidir.emplace_back(vertices_[a].name, vertices_[b].name);
  }
  return Admg(vertices_, std::move(dir), std::move(bidir));
}

bool Admg::d_separated(const NameSet& a, const NameSet& b, const NameSet& c) const {
  if (!disjoint(a, b) || !disjoint(a, c) || !disjoint(b, c))
    throw InputError("d-separation query sets must be pairwise disjoint");
  return d_separated(mask_of(a), mask_of(b), mask_of(c));
}

bool Admg::d_separated(VertexMask a, VertexMask b, VertexMask c) const {
  if ((a & b) || (a & c) || (b & c))
    throw InputError("d-separation query sets must be pairwise disjoint");
  if (!a || !b) return true;

  // Work on the latent-parent completion: node ids 0..n-1 are the vertices,
  // node n+j is a fresh parent of both endpoints of bidirected edge j.
  const int n = size();
  const int total = n + static_cast<int>(bidirected_.size());
  std::vector<std::vector<int>> par(total), chi(total);
  for (const auto& [f, t] : directed_) {
    par[t].push_back(f);
    chi[f].push_back(t);
  }
  for (size_t j = 0; j < bidirected_.size(); ++j) {
    int lat = n + static_cast<int>(j);
    for (int end : {bidirected_[j].first, bidirected_[j].second}) {
      par[end].push_back(lat);
      chi[lat].push_back(end);
    }
  }

  auto in_c = [&](int v) { return v < n && (c & (VertexMask{1} << v)); };

  // Nodes that are in c or have a descendant in c: these open colliders.
  std::vector<char> anc_c(total, 0);
  {
    std::queue<int> q;
    for (int v = 0; v < n; ++v)
      if (in_c(v)) {
        anc_c[v] = 1;
        q.push(v);
      }
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      for (int p : par[v])
        if (!anc_c[p]) {
          anc_c[p] = 1;
          q.push(p);
        }
    }
  }

  // Reachability over active trails; state = (node, entered-from-parent?).
  std::vector<char> seen_up(total, 0), seen_down(total, 0);
  std::queue<std::pair<int, bool>> q;  // bool: true = entered via edge into node
  VertexMask am = a;
  while (am) {
    int v = __builtin_ctz(am);
    am &= am - 1;
    q.emplace(v, false);
    seen_up[v] = 1;
  }
  while (!q.empty()) {
    auto [v, from_parent] = q.front();
    q.pop();
    if (!from_parent) {
      // Entered against an outgoing edge (or a query start): v is not a
      // collider here, so the trail continues iff v is unconditioned.
      if (in_c(v)) continue;
      if (v < n && (b & (VertexMask{1} << v))) return false;
      for (int p : par[v])
        if (!seen_up[p]) {
          seen_up[p] = 1;
          q.emplace(p, false);
        }
      for (int ch : chi[v])
        if (!seen_down[ch]) {
          seen_down[ch] = 1;
          q.emplace(ch, true);
        }
    } else {
      // Entered along an edge into v.
      if (!in_c(v)) {
        if (v < n && (b & (VertexMask{1} << v))) return false;
        for (int ch : chi[v])
          if (!seen_down[ch]) {
            seen_down[ch] = 1;
            q.emplace(ch, true);
          }
      }
      if (anc_c[v]) {
        // v is a collider with an observed descendant (or is observed):
        // the trail may turn back up towards another parent.
        for (int p : par[v])
          if (!seen_up[p]) {
            seen_up[p] = 1;
            q.emplace(p, false);
          }
      }
    }
  }
  return true;
}

Admg Admg::latent_project(const NameSet& keep) const {
  VertexMask keep_mask = mask_of(keep);
  const int n = size();
  const int nb = static_cast<int>(bidirected_.size());

  std::vector<Vertex> kept;
  for (int v = 0; v < n; ++v)
    if (keep_mask & (VertexMask{1} << v)) kept.push_back(vertices_[v]);

  // Directed u->w iff w is reachable from u along directed edges whose
  // interior vertices are all dropped.
  std::vector<std::pair<std::string, std::string>> dir;
  for (int u = 0; u < n; ++u) {
    if (!(keep_mask & (VertexMask{1} << u))) continue;
    VertexMask reached = 0, frontier = children_[u];
    while (frontier) {
      reached |= frontier;
      VertexMask next = 0;
      VertexMask expand = frontier & ~keep_mask;  // only pass through dropped
      while (expand) {
        int v = __builtin_ctz(expand);
        expand &= expand - 1;
        next |= children_[v];
      }
      frontier = next & ~reached;
    }
    VertexMask hits = reached & keep_mask & ~(VertexMask{1} << u);
    while (hits) {
      int w = __builtin_ctz(hits);
      hits &= hits - 1;
      dir.emplace_back(vertices_[u].name, vertices_[w].name);
    }
  }

  // Bidirected u<->w iff some dropped vertex or latent (one per bidirected
  // edge) reaches both u and w by directed paths through dropped vertices.
  // asc[v] holds, for kept v, that set of hidden sources; intersecting any
  // two nonadjacent kept vertices' sets decides the edge.
  auto hidden_sources = [&](int v) {
    // bits 0..n-1: dropped vertices; bits n..n+nb-1: per-edge latents
    std::vector<char> src(n + nb, 0);
    std::queue<int> q;
    auto push_parents = [&](int w) {
      VertexMask pm = parents_[w];
      while (pm) {
        int p = __builtin_ctz(pm);
        pm &= pm - 1;
        if (!(keep_mask & (VertexMask{1} << p)) && !src[p]) {
          src[p] = 1;
          q.push(p);
        }
      }
    };
    push_parents(v);
    for (int j = 0; j < nb; ++j)
      if (bidirected_[j].first == v || bidirected_[j].second == v) src[n + j] = 1;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      push_parents(u);
      for (int j = 0; j < nb; ++j)
        if (bidirected_[j].first == u || bidirected_[j].second == u) src[n + j] = 1;
    }
    return src;
  };

  std::vector<std::vector<char>> asc(n);
  for (int v = 0; v < n; ++v)
    if (keep_mask & (VertexMask{1} << v)) asc[v] = hidden_sources(v);

  std::vector<std::pair<std::string, std::string>> bidir;
  for (int u = 0; u < n; ++u) {
    if (!(keep_mask & (VertexMask{1} << u))) continue;
    for (int w = u + 1; w < n; ++w) {
      if (!(keep_mask & (VertexMask{1} << w))) continue;
      bool hit = false;
      for (int k = 0; k < n + nb && !hit; ++k) hit = asc[u][k] && asc[w][k];
      if (hit) bidir.emplace_back(vertices_[u].name, vertices_[w].name);
    }
  }
  return Admg(std::move(kept), std::move(dir), std::move(bidir));
}

std::vector<std::string> Admg::validate() const {
  std::vector<std::string> warnings;
  for (int v = 0; v < size(); ++v) {
    if (vertices_[v].kind == VertexKind::selection && children_[v] != 0)
      warnings.push_back("selection vertex '" + vertices_[v].name +
                         "' has outgoing edges");
  }
  return warnings;
}

bool Admg::operator==(const Admg& o) const {
  if (vertices_.size() != o.vertices_.size()) return false;
  for (size_t i = 0; i < vertices_.size(); ++i)
    if (vertices_[i].name != o.vertices_[i].name || vertices_[i].kind != o.vertices_[i].kind)
      return false;
  auto sorted = [](std::vector<std::pair<int, int>> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  return sorted(directed_) == sorted(o.directed_) && sorted(bidirected_) == sorted(o.bidirected_);
}

}  // namespace causalid
