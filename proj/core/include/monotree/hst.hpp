#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "monotree/types.hpp"

namespace monotree {

struct HstError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HstNode {
  double phi = 0;   // node weight; 0 iff leaf
  int parent = -1;  // -1 for the root
};

// Node-weighted rooted tree whose leaves carry points; the distance between
// two leaves is the weight of their least common ancestor (an ultrametric).
class Hst {
 public:
  Hst() = default;

  int add_node(double phi, int parent);  // parent -1 for the root
  // Inserts a new root above the current one (used by online constructions).
  int push_root(double phi);
  void map_leaf(PointId p, int node);

  int size() const { return static_cast<int>(nodes_.size()); }
  const HstNode& node(int i) const { return nodes_[i]; }
  int root() const { return root_; }
  const std::unordered_map<PointId, int>& leaves() const { return leaf_; }
  int leaf_node(PointId p) const;

  int lca(int a, int b) const;
  // phi(lca(u, w)); zero iff u == w.
  double distance(PointId u, PointId w) const;

  // Edge-weight view for tree algorithms: the edge above node v weighs
  // (phi(parent) - phi(v)) / 2, so leaf-to-leaf path lengths telescope to
  // exactly phi(lca).
  double edge_weight(int v) const;

  // Checks mu-separation (phi(child) <= phi(parent)/mu), the leaf-weight
  // rule (phi = 0 exactly on leaves) and, on sampled triples, the
  // ultrametric inequality. Returns human-readable violations; empty = ok.
  std::vector<std::string> validate(double mu, int ultrametric_samples = 1000,
                                    std::uint64_t seed = 1) const;

  std::string to_json() const;
  static Hst from_json(const std::string& text);

 private:
  std::vector<HstNode> nodes_;
  std::vector<bool> has_child_;
  std::unordered_map<PointId, int> leaf_;
  int root_ = -1;
};

// One level of a partition hierarchy: a scale and the clusters of the
// current point set at that scale.
struct PartitionLevel {
  double scale = 0;
  std::vector<std::vector<PointId>> clusters;
};

// Levels ordered by strictly increasing scale, all partitioning the same
// point set. After refine() the levels are nested: every cluster at a level
// is contained in a single cluster of each level above.
class PartitionStack {
 public:
  PartitionStack() = default;
  explicit PartitionStack(std::vector<PartitionLevel> levels);

  const std::vector<PartitionLevel>& levels() const { return levels_; }
  std::vector<PartitionLevel>& levels() { return levels_; }
  bool nested() const;

 private:
  std::vector<PartitionLevel> levels_;
};

// Replaces every level by its refinement with all levels above it.
// Idempotent on already nested stacks.
PartitionStack refine(const PartitionStack& stack);

// Builds the HST induced by a nested stack: one node per cluster per level
// with weight = the level's scale; the bottom level must be all singletons
// (its nodes become the leaves, weight 0) and the top level a single
// cluster (the root). Leaf distances equal the smallest scale at which the
// pair shares a cluster.
Hst induced_hst(const PartitionStack& stack);

}  // namespace monotree
