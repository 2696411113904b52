#include <doctest.h>

#include <cmath>
#include <map>

#include "monotree/hst.hpp"
#include "monotree/rng.hpp"

using namespace monotree;

namespace {

Hst three_leaf_tree() {
  // root phi=8 with children: node phi=2 (leaves a=0, b=1) and leaf c=2
  Hst t;
  int root = t.add_node(8, -1);
  int mid = t.add_node(2, root);
  int a = t.add_node(0, mid);
  int b = t.add_node(0, mid);
  int c = t.add_node(0, root);
  t.map_leaf(0, a);
  t.map_leaf(1, b);
  t.map_leaf(2, c);
  return t;
}

// Oracle: smallest scale at which the pair shares a cluster.
double min_cocluster_scale(const PartitionStack& stack, PointId u, PointId v) {
  for (const auto& lv : stack.levels())
    for (const auto& c : lv.clusters) {
      bool hu = false, hv = false;
      for (PointId p : c) {
        hu |= p == u;
        hv |= p == v;
      }
      if (hu && hv) return lv.scale;
    }
  return -1;
}

// Random nested stack over points 0..n-1: start from singletons and merge
// a few clusters per level going up.
PartitionStack random_nested_stack(int n, std::uint64_t seed) {
  RngStream rng(seed, {0xabcd});
  std::vector<std::vector<PointId>> clusters;
  for (PointId p = 0; p < n; ++p) clusters.push_back({p});
  std::vector<PartitionLevel> levels;
  double scale = 1;
  levels.push_back({scale, clusters});
  while (clusters.size() > 1) {
    scale *= 2;
    int merges = 1 + static_cast<int>(rng.uniform_below(2));
    bool any = false;
    for (int m = 0; m < merges && clusters.size() > 1; ++m) {
      std::size_t i = rng.uniform_below(clusters.size());
      std::size_t j = rng.uniform_below(clusters.size());
      if (i == j) continue;
      auto& ci = clusters[std::min(i, j)];
      auto cj = clusters[std::max(i, j)];
      ci.insert(ci.end(), cj.begin(), cj.end());
      clusters.erase(clusters.begin() + std::max(i, j));
      any = true;
    }
    if (!any && clusters.size() > 1) {
      auto cj = clusters[1];
      clusters[0].insert(clusters[0].end(), cj.begin(), cj.end());
      clusters.erase(clusters.begin() + 1);
    }
    levels.push_back({scale, clusters});
  }
  return PartitionStack(levels);
}

}  // namespace

TEST_CASE("hst_distance via lca") {
  Hst t = three_leaf_tree();
  CHECK(t.distance(0, 0) == 0);
  CHECK(t.distance(0, 1) == doctest::Approx(2));
  CHECK(t.distance(0, 2) == doctest::Approx(8));
  CHECK(t.distance(1, 2) == doctest::Approx(8));
  CHECK_THROWS_AS(t.distance(0, 9), HstError);

  Hst star;
  int root = star.add_node(8, -1);
  star.map_leaf(0, star.add_node(0, root));
  star.map_leaf(1, star.add_node(0, root));
  CHECK(star.distance(0, 1) == doctest::Approx(8));
}

TEST_CASE("edge weight view telescopes to phi(lca)") {
  Hst t = three_leaf_tree();
  // path 0 -> root: (8-2)/2 + (2-0)/2 = 4; path 2 -> root: 4; total 8
  CHECK(t.edge_weight(t.leaf_node(0)) + t.edge_weight(1) == doctest::Approx(4));
  CHECK(t.edge_weight(t.leaf_node(2)) == doctest::Approx(4));
}

TEST_CASE("validate_hst") {
  Hst ok;
  int r = ok.add_node(8, -1);
  int c = ok.add_node(4, r);
  ok.map_leaf(0, ok.add_node(0, c));
  ok.map_leaf(1, ok.add_node(0, r));
  CHECK(ok.validate(2.0).empty());

  Hst bad;
  int r2 = bad.add_node(8, -1);
  int c2 = bad.add_node(5, r2);  // 5 > 8/2
  bad.map_leaf(0, bad.add_node(0, c2));
  bad.map_leaf(1, bad.add_node(0, r2));
  CHECK_FALSE(bad.validate(2.0).empty());
  CHECK(bad.validate(1.0).empty());  // fine as a 1-HST

  // ultrametric property holds on any valid HST (sampled triples)
  Hst t = three_leaf_tree();
  CHECK(t.validate(2.0, 1000).empty());
}

TEST_CASE("refine") {
  // top {ab|c}, bottom {ac|b} -> bottom becomes {a|b|c}
  PartitionStack stack({{1.0, {{0, 2}, {1}}}, {2.0, {{0, 1}, {2}}}});
  CHECK_FALSE(stack.nested());
  PartitionStack refined = refine(stack);
  CHECK(refined.nested());
  CHECK(refined.levels()[0].clusters.size() == 3);
  CHECK(refined.levels()[1].clusters == stack.levels()[1].clusters);

  // idempotent on nested stacks
  PartitionStack again = refine(refined);
  CHECK(again.levels()[0].clusters == refined.levels()[0].clusters);

  // single level unchanged
  PartitionStack single({{1.0, {{0, 1}, {2}}}});
  CHECK(refine(single).levels()[0].clusters == single.levels()[0].clusters);

  // different point sets rejected
  CHECK_THROWS_AS(PartitionStack({{1.0, {{0}, {1}}}, {2.0, {{0, 2}}}}), HstError);
}

TEST_CASE("induced_hst hand examples") {
  // two levels: singletons at scale 1, {ab} at scale 2 -> star, d = 2
  PartitionStack two({{1.0, {{0}, {1}}}, {2.0, {{0, 1}}}});
  Hst star = induced_hst(two);
  CHECK(star.distance(0, 1) == doctest::Approx(2));
  CHECK(star.validate(2.0).empty());

  // {a|b|c}@1, {ab|c}@2, {abc}@4
  PartitionStack three(
      {{1.0, {{0}, {1}, {2}}}, {2.0, {{0, 1}, {2}}}, {4.0, {{0, 1, 2}}}});
  Hst t = induced_hst(three);
  CHECK(t.distance(0, 1) == doctest::Approx(2));
  CHECK(t.distance(0, 2) == doctest::Approx(4));
  CHECK(t.distance(1, 2) == doctest::Approx(4));
  CHECK(t.validate(2.0).empty());

  // missing singleton bottom
  CHECK_THROWS_AS(induced_hst(PartitionStack({{1.0, {{0, 1}}}})), HstError);
  // non-nested stack
  CHECK_THROWS_AS(
      induced_hst(PartitionStack({{1.0, {{0, 2}, {1}}}, {2.0, {{0, 1}, {2}}}})),
      HstError);
}

TEST_CASE("induced_hst equals the min-co-clustered-scale oracle") {
  for (int trial = 0; trial < 120; ++trial) {
    int n = 2 + trial % 9;
    PartitionStack stack = random_nested_stack(n, 500 + trial);
    Hst t = induced_hst(stack);
    CHECK(t.validate(2.0).empty());
    for (PointId u = 0; u < n; ++u)
      for (PointId v = u + 1; v < n; ++v)
        CHECK(t.distance(u, v) == doctest::Approx(min_cocluster_scale(stack, u, v)));
  }
}

TEST_CASE("hst json round trip") {
  Hst t = three_leaf_tree();
  Hst back = Hst::from_json(t.to_json());
  CHECK(back.size() == t.size());
  CHECK(back.distance(0, 1) == doctest::Approx(2));
  CHECK(back.distance(0, 2) == doctest::Approx(8));
}
