#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include "causalid/admg.hpp"
#include "causalid/errors.hpp"
#include "testutil.hpp"

using namespace causalid;
using testutil::TinyRng;
using testutil::verts;

TEST_CASE("construction validates its input") {
  CHECK_THROWS_AS(Admg(verts({"A", "A"}), {}, {}), InputError);
  CHECK_THROWS_AS(Admg(verts({"A"}), {{"A", "A"}}, {}), InputError);
  CHECK_THROWS_AS(Admg(verts({"A"}), {}, {{"A", "A"}}), InputError);
  CHECK_THROWS_AS(Admg(verts({"A", "B"}), {{"A", "C"}}, {}), InputError);
  // directed cycle, immediate and longer
  CHECK_THROWS_AS(Admg(verts({"A", "B"}), {{"A", "B"}, {"B", "A"}}, {}), InputError);
  CHECK_THROWS_AS(
      Admg(verts({"A", "B", "C"}), {{"A", "B"}, {"B", "C"}, {"C", "A"}}, {}),
      InputError);

  std::vector<std::string> many;
  for (int i = 0; i < 33; ++i) many.push_back("V" + std::to_string(i));
  CHECK_THROWS_AS(Admg(verts(many), {}, {}), InputError);

  // duplicate edges collapse instead of erroring
  Admg g(verts({"A", "B"}), {{"A", "B"}, {"A", "B"}}, {{"A", "B"}, {"B", "A"}});
  CHECK(g.directed_edges().size() == 1);
  CHECK(g.bidirected_edges().size() == 1);
}

TEST_CASE("indices, masks and kinds") {
  Admg g({{"X", VertexKind::ordinary},
          {"T", VertexKind::transportability},
          {"S", VertexKind::selection}},
         {{"T", "X"}, {"X", "S"}}, {});
  CHECK(g.index_of("T") == 1);
  CHECK_THROWS_AS(g.index_of("Q"), InputError);
  CHECK(g.has_vertex("S"));
  CHECK_FALSE(g.has_vertex("s"));
  CHECK(g.vertex_names() == NameSet{"S", "T", "X"});
  CHECK(g.vertices_of_kind(VertexKind::transportability) == NameSet{"T"});
  CHECK(g.vertices_of_kind(VertexKind::selection) == NameSet{"S"});

  VertexMask m = g.mask_of({"S", "X"});
  CHECK(g.names_of(m) == NameSet{"S", "X"});
  CHECK(g.all_mask() == 7u);
  CHECK_THROWS_AS(g.mask_of({"Q"}), InputError);
}

TEST_CASE("parents, children, siblings, ancestors") {
  Admg g(verts({"A", "B", "C", "D"}),
         {{"A", "B"}, {"B", "C"}}, {{"C", "D"}});
  const int a = g.index_of("A"), b = g.index_of("B"), c = g.index_of("C"),
            d = g.index_of("D");
  CHECK(g.parents(b) == (1u << a));
  CHECK(g.children(b) == (1u << c));
  CHECK(g.siblings(c) == (1u << d));
  CHECK(g.siblings(a) == 0u);
  CHECK(g.ancestors(NameSet{"C"}) == NameSet{"A", "B", "C"});
  // reflexive and monotone under set growth
  CHECK(g.ancestors(NameSet{"A"}) == NameSet{"A"});
  CHECK(g.ancestors(NameSet{"C", "D"}) == NameSet{"A", "B", "C", "D"});
}

TEST_CASE("ancestors agree with brute-force reachability on random graphs") {
  TinyRng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    Admg g = testutil::random_admg(rng);
    const int n = g.size();
    const int target = rng.below(n);
    // edge-by-edge fixpoint, written independently of the library
    std::set<int> anc{target};
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& [u, v] : g.directed_edges())
        if (anc.count(v) && !anc.count(u)) {
          anc.insert(u);
          grew = true;
        }
    }
    VertexMask got = g.ancestors(VertexMask{1u << target});
    VertexMask want = 0;
    for (int v : anc) want |= 1u << v;
    CHECK(got == want);
  }
}

TEST_CASE("mutilation removes exactly the advertised edges") {
  Admg g(verts({"A", "B", "C"}), {{"A", "B"}, {"B", "C"}}, {{"A", "B"}, {"B", "C"}});

  Admg cut_in = g.mutilate({{"B"}, {}});
  // directed into B and bidirected touching B both carry a head into B
  CHECK(cut_in.directed_edges().size() == 1);   // B -> C stays
  CHECK(cut_in.bidirected_edges().empty());
  CHECK(cut_in.parents(cut_in.index_of("B")) == 0u);

  Admg cut_out = g.mutilate({{}, {"B"}});
  CHECK(cut_out.directed_edges().size() == 1);  // A -> B stays
  CHECK(cut_out.bidirected_edges().size() == 2);

  // mask overload agrees
  Admg cut_in2 = g.mutilate_masks(g.mask_of({"B"}), 0);
  CHECK(cut_in == cut_in2);

  CHECK_THROWS_AS(g.mutilate({{"Q"}, {}}), InputError);
}

TEST_CASE("d-separation on hand graphs") {
  // chain: A _||_ C | B, not marginally
  Admg chain(verts({"A", "B", "C"}), {{"A", "B"}, {"B", "C"}}, {});
  CHECK(chain.d_separated(NameSet{"A"}, NameSet{"C"}, NameSet{"B"}));
  CHECK_FALSE(chain.d_separated(NameSet{"A"}, NameSet{"C"}, NameSet{}));

  // collider: marginally separated, conditioning opens it
  Admg coll(verts({"A", "B", "C"}), {{"A", "B"}, {"C", "B"}}, {});
  CHECK(coll.d_separated(NameSet{"A"}, NameSet{"C"}, NameSet{}));
  CHECK_FALSE(coll.d_separated(NameSet{"A"}, NameSet{"C"}, NameSet{"B"}));

  // conditioning on a collider's descendant opens it too
  Admg desc(verts({"A", "B", "C", "D"}), {{"A", "B"}, {"C", "B"}, {"B", "D"}}, {});
  CHECK_FALSE(desc.d_separated(NameSet{"A"}, NameSet{"C"}, NameSet{"D"}));

  // a bidirected edge acts as a latent common parent
  Admg conf(verts({"A", "B"}), {}, {{"A", "B"}});
  CHECK_FALSE(conf.d_separated(NameSet{"A"}, NameSet{"B"}, NameSet{}));

  // empty side is trivially separated
  CHECK(chain.d_separated(NameSet{}, NameSet{"C"}, NameSet{}));
}

TEST_CASE("d-separation matches path enumeration on random graphs") {
  TinyRng rng(7);
  int checked = 0, separated = 0;
  for (int trial = 0; trial < 1100; ++trial) {
    Admg g = testutil::random_admg(rng, 8);
    const NameSet names = g.vertex_names();
    const int n = g.size();

    // one random disjoint (A, B, C) split per graph; two distinct vertices
    // are forced into A and B so every graph yields a real comparison
    const int fa = rng.below(n);
    int fb = rng.below(n - 1);
    if (fb >= fa) ++fb;
    NameSet A{names[fa]}, B{names[fb]}, C;
    for (int i = 0; i < n; ++i) {
      if (i == fa || i == fb) continue;
      switch (rng.below(4)) {
        case 0: A.push_back(names[i]); break;
        case 1: B.push_back(names[i]); break;
        case 2: C.push_back(names[i]); break;
        default: break;
      }
    }
    A = make_set(std::move(A));
    B = make_set(std::move(B));
    bool lib = g.d_separated(A, B, C);
    bool ref = testutil::dsep_by_paths(g, A, B, C);
    if (lib != ref) {
      CAPTURE(trial);
      CAPTURE(join(A));
      CAPTURE(join(B));
      CAPTURE(join(C));
    }
    REQUIRE(lib == ref);
    ++checked;
    separated += lib;
  }
  // both outcomes must actually occur or the comparison proves nothing
  CHECK(checked >= 1000);
  CHECK(separated > 50);
  CHECK(separated < checked - 50);
}

TEST_CASE("latent projection on hand graphs") {
  // dropping a mediator leaves a directed edge
  Admg med(verts({"A", "M", "B"}), {{"A", "M"}, {"M", "B"}}, {});
  Admg pm = med.latent_project({"A", "B"});
  CHECK(pm.directed_edges().size() == 1);
  CHECK(pm.bidirected_edges().empty());
  CHECK_FALSE(pm.d_separated(NameSet{"A"}, NameSet{"B"}, NameSet{}));

  // dropping a common cause leaves a bidirected edge
  Admg cc(verts({"U", "A", "B"}), {{"U", "A"}, {"U", "B"}}, {});
  Admg pc = cc.latent_project({"A", "B"});
  CHECK(pc.directed_edges().empty());
  CHECK(pc.bidirected_edges().size() == 1);

  // dropping a collider leaves the pair separated
  Admg coll(verts({"A", "K", "B"}), {{"A", "K"}, {"B", "K"}}, {});
  Admg pk = coll.latent_project({"A", "B"});
  CHECK(pk.directed_edges().empty());
  CHECK(pk.bidirected_edges().empty());

  // chains of dropped vertices compose: A -> D1 -> D2 -> B
  Admg chain(verts({"A", "D1", "D2", "B"}),
             {{"A", "D1"}, {"D1", "D2"}, {"D2", "B"}}, {});
  CHECK(chain.latent_project({"A", "B"}).directed_edges().size() == 1);

  // existing bidirected edges extend through dropped vertices
  Admg mixed(verts({"A", "D", "B"}), {{"D", "B"}}, {{"A", "D"}});
  Admg pmix = mixed.latent_project({"A", "B"});
  CHECK(pmix.bidirected_edges().size() == 1);

  CHECK_THROWS_AS(med.latent_project({"A", "Q"}), InputError);
}

TEST_CASE("latent projection composes on random graphs") {
  // projecting in two steps equals projecting once: drop(v1) then drop(v2)
  // must equal dropping both at once, for every choice on random graphs.
  TinyRng rng(1234);
  for (int trial = 0; trial < 400; ++trial) {
    Admg g = testutil::random_admg(rng, 7);
    NameSet names = g.vertex_names();
    if (names.size() < 4) continue;
    NameSet keep_small, dropped;
    for (const auto& v : names) {
      if (dropped.size() < 2 && rng.chance(0.4)) dropped.push_back(v);
      else keep_small.push_back(v);
    }
    if (dropped.size() != 2) continue;
    NameSet keep_mid = set_minus(names, NameSet{dropped[0]});
    Admg once = g.latent_project(keep_small);
    Admg twice = g.latent_project(keep_mid).latent_project(keep_small);
    REQUIRE(once == twice);
  }
}

TEST_CASE("latent projection preserves d-separation among kept vertices") {
  TinyRng rng(77);
  for (int trial = 0; trial < 250; ++trial) {
    Admg g = testutil::random_admg(rng, 7);
    NameSet names = g.vertex_names();
    if (names.size() < 3) continue;
    NameSet keep;
    for (const auto& v : names)
      if (keep.size() + 2 >= names.size() || rng.chance(0.7)) keep.push_back(v);
    Admg p = g.latent_project(keep);

    // any single pair given the rest of the kept set
    for (std::size_t i = 0; i < keep.size(); ++i)
      for (std::size_t j = i + 1; j < keep.size(); ++j) {
        NameSet A{keep[i]}, B{keep[j]};
        NameSet C = set_minus(set_minus(keep, A), B);
        REQUIRE(g.d_separated(A, B, C) == p.d_separated(A, B, C));
      }
  }
}

TEST_CASE("validate flags odd selection vertices") {
  Admg ok({{"X", VertexKind::ordinary}, {"S", VertexKind::selection}},
          {{"X", "S"}}, {});
  CHECK(ok.validate().empty());

  Admg odd({{"X", VertexKind::ordinary}, {"S", VertexKind::selection}},
           {{"S", "X"}}, {});
  CHECK_FALSE(odd.validate().empty());
}

TEST_CASE("equality is structural") {
  Admg a(verts({"A", "B"}), {{"A", "B"}}, {});
  Admg b(verts({"A", "B"}), {{"A", "B"}}, {});
  Admg c(verts({"B", "A"}), {{"A", "B"}}, {});
  CHECK(a == b);
  CHECK_FALSE(a == c);  // vertex order is part of the identity
}
