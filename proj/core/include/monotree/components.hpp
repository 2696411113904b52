#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "monotree/metric.hpp"
#include "monotree/types.hpp"

namespace monotree {

struct ComponentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- random radii -----------------------------------------------------------
//
// Radii live in [s/16, s/8] with density
//   p(z) = (32 chi^2 log chi / (s (1 - chi^-2))) * exp(-32 z log chi / s),
// where chi = 2 * j_count and j_count is the number of live components after
// the insertion. Sampling inverts the closed-form CDF.

double radius_pdf(double z, int j_count, double s);
double radius_cdf(double z, int j_count, double s);
// Inverse CDF at u in [0, 1): u = 0 gives s/16, u -> 1 gives s/8.
double radius_quantile(double u, int j_count, double s);
// Deterministic draw keyed by (seed, scale level, dimension, point, the
// point's arrival ordinal), so lazily instantiated scales replay to
// identical radii.
double sample_radius(std::uint64_t seed, int level, int dim, PointId center,
                     int arrival_ordinal, int j_count, double s);

// True iff exactly one of u, w lies inside the full ball of radius r around
// c, i.e. r falls in [d(c,u), d(c,w)) or [d(c,w), d(c,u)). Ball membership
// itself is closed (d <= r). Purely geometric; cutting is necessary but not
// sufficient for the pair to end up in different components.
bool cuts(double d_cu, double d_cw, double r);

// ---- merge-only disjoint sets ----------------------------------------------

class Dsu {
 public:
  int add() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return static_cast<int>(parent_.size()) - 1;
  }
  int find(int x) const {
    while (parent_[x] != x) x = parent_[x];
    return x;
  }
  // Unions b's set into a's root; never splits.
  void unite(int a, int b) {
    a = find(a); b = find(b);
    if (a != b) parent_[b] = a;
  }
  bool same(int a, int b) const { return find(a) == find(b); }
  int size() const { return static_cast<int>(parent_.size()); }

 private:
  mutable std::vector<int> parent_;
};

// ---- one scale's component layer ---------------------------------------------

struct Component {
  PointId center = 0;
  double radius = 0;
  std::int64_t birth = 0;  // globally unique, strictly increasing
  bool dead = false;
  int alive_members = 0;   // alive points currently assigned here
};

// Per-scale state: birth-ordered component list, a coarsen-only group
// structure over components, and the assignment of alive points to their
// earliest-birth covering component.
class ScaleState {
 public:
  // Reported whenever two groups merge, with the alive points of each side.
  using MergeHook = std::function<void(const std::vector<PointId>& side_a,
                                       const std::vector<PointId>& side_b)>;

  ScaleState(int level, double s) : level_(level), s_(s) {}

  int level() const { return level_; }
  double scale() const { return s_; }

  // Inserts a component with the given radius and assigns the arriving
  // point. Returns the component id. j_count used for the radius
  // distribution is the live component count after insertion.
  int add_component(PointId center, double radius, std::int64_t birth);
  int live_count_after_insert() const { return live_count_; }

  // Earliest-birth live component whose ball covers u; the caller
  // guarantees existence for alive points (their own ball covers them).
  int assign(const MetricSpace& m, PointId u);
  // Like assign but tolerates uncovered points (departed ones).
  std::optional<int> covering_component(const MetricSpace& m, PointId u) const;

  void merge_groups(int a, int b, const MergeHook& hook = nullptr);
  bool same_group(int a, int b) const { return groups_.same(a, b); }
  int group_of_component(int c) const { return groups_.find(c); }

  // Removes components with no alive assigned points; assignments of alive
  // points are unaffected (a pruned component was nobody's assignment).
  std::vector<int> prune_empty(PointId departing);

  bool has_assignment(PointId u) const { return assign_.count(u) != 0; }
  int component_of(PointId u) const;
  int cluster_of(PointId u) const { return groups_.find(component_of(u)); }
  const Component& component(int id) const { return comps_[id]; }
  int component_count() const { return static_cast<int>(comps_.size()); }
  int live_component_count() const { return live_count_; }

  std::vector<PointId> group_members(int comp) const;    // alive points
  std::vector<int> group_components(int comp) const;     // live components

  // Diameter of the point set that may ever belong to one component is at
  // most s/4 (two radii <= s/8); exposed for property tests.
  double max_component_span() const;

  std::string dump_json() const;

 private:
  int level_;
  double s_;
  std::vector<Component> comps_;
  Dsu groups_;
  std::unordered_map<PointId, int> assign_;
  int live_count_ = 0;
};

}  // namespace monotree
