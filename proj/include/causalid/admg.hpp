#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "causalid/names.hpp"

namespace causalid {

/// Vertex kinds only affect validation and reporting; every graph algorithm
/// treats all vertices identically.
enum class VertexKind { ordinary, transportability, selection };

struct Vertex {
  std::string name;
  VertexKind kind = VertexKind::ordinary;
};

/// Bit i of a mask refers to vertex index i. Graphs are capped at 32 vertices,
/// comfortably above anything the search or the bundled problems need.
using VertexMask = std::uint32_t;

constexpr int kMaxVertices = 32;

/// Which edges to delete. cut_incoming removes directed edges into the named
/// vertices and bidirected edges touching them (both carry an arrowhead into
/// the vertex); cut_outgoing removes directed edges leaving them only.
struct Mutilation {
  NameSet cut_incoming;
  NameSet cut_outgoing;
};

/// Acyclic directed mixed graph: directed plus bidirected edges over named
/// vertices. Immutable after construction; all mutating operations return a
/// new graph.
class Admg {
 public:
  Admg(std::vector<Vertex> vertices,
       std::vector<std::pair<std::string, std::string>> directed,
       std::vector<std::pair<std::string, std::string>> bidirected);

  int size() const { return static_cast<int>(vertices_.size()); }
  const Vertex& vertex(int i) const { return vertices_[i]; }
  const std::vector<Vertex>& vertices() const { return vertices_; }
  bool has_vertex(const std::string& name) const;
  int index_of(const std::string& name) const;  // throws InputError if absent
  NameSet vertex_names() const;
  NameSet vertices_of_kind(VertexKind k) const;

  VertexMask mask_of(const NameSet& names) const;  // throws on unknown name
  NameSet names_of(VertexMask m) const;
  VertexMask all_mask() const;

  const std::vector<std::pair<int, int>>& directed_edges() const { return directed_; }
  const std::vector<std::pair<int, int>>& bidirected_edges() const { return bidirected_; }
  VertexMask parents(int v) const { return parents_[v]; }
  VertexMask children(int v) const { return children_[v]; }
  VertexMask siblings(int v) const { return siblings_[v]; }  // bidirected partners

  /// Reflexive ancestor closure over directed edges.
  VertexMask ancestors(VertexMask of) const;
  NameSet ancestors(const NameSet& of) const;

  Admg mutilate(const Mutilation& m) const;
  Admg mutilate_masks(VertexMask cut_incoming, VertexMask cut_outgoing) const;

  /// True iff every path between a and b is blocked given c. Each bidirected
  /// edge acts as a distinct latent common parent of its endpoints.
  /// a, b, c must be pairwise disjoint; empty a or b is trivially separated.
  bool d_separated(const NameSet& a, const NameSet& b, const NameSet& c) const;
  bool d_separated(VertexMask a, VertexMask b, VertexMask c) const;

  /// Latent projection onto `keep`: directed edge u->v iff a directed path
  /// runs from u to v entirely through dropped vertices; bidirected edge
  /// u<->v iff a collider-free path with arrowheads into both u and v runs
  /// entirely through dropped vertices (existing bidirected edges included).
  Admg latent_project(const NameSet& keep) const;

  /// Non-fatal diagnostics, e.g. a selection vertex with outgoing edges.
  std::vector<std::string> validate() const;

  bool operator==(const Admg& o) const;

 private:
  std::vector<Vertex> vertices_;
  std::map<std::string, int> index_;
  std::vector<std::pair<int, int>> directed_;    // (from, to)
  std::vector<std::pair<int, int>> bidirected_;  // (min, max)
  std::vector<VertexMask> parents_, children_, siblings_;

  void check_acyclic() const;
};

}  // namespace causalid
