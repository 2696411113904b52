#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "monotree/components.hpp"
#include "monotree/embed.hpp"

namespace monotree {

// One scale of the ball-component partition, with either merge strategy:
//  - IncrementalDesignated: whenever two points within epsilon*s sit in
//    different groups, the (per run or per phase) designated merging
//    component absorbs its neighbour; all other merge attempts are rejected.
//  - DynamicSumRule: a merge between the groups of two alive points within
//    trigger*s succeeds iff every cross pair of live components satisfies
//    r1 + r2 + d(c1, c2) <= safety*s, and rejected merges are re-attempted
//    after every departure.
struct ComponentScaleConfig {
  enum class Policy { IncrementalDesignated, DynamicSumRule };
  Policy policy = Policy::IncrementalDesignated;
  std::uint64_t seed = 1;
  int rng_dim = 0;  // extra rng key, used per dimension by the normed module
  // incremental policy
  std::function<double(int arrivals)> epsilon = [](int) { return 0.0; };
  std::function<int(int arrivals)> phase = [](int) { return 0; };
  // dynamic policy
  double trigger_ratio = 1.0 / 6;
  double safety_ratio = 1.0;
  // test hook: scripted radii by (center, arrival ordinal)
  std::function<std::optional<double>(PointId, int)> radius_override;
};

class ComponentScale : public ScaleOps {
 public:
  ComponentScale(int level, const MetricSpace& metric, ComponentScaleConfig cfg,
                 MergeSink sink);

  void arrival(PointId v, int arrival_ordinal) override;
  void departure(PointId v) override;
  bool same_cluster(PointId u, PointId v) const override;
  void clusters_of(std::span<const PointId> alive, PartitionLevel& out) const override;
  std::string dump_json() const override;

  const ScaleState& state() const { return st_; }
  // Designated merging component of a phase (incremental policy), if set.
  std::optional<int> designated(int phase = 0) const;
  // Close-pair splits where neither involved component geometrically cut the
  // pair; handled by designating arbitrarily and counted here.
  int degenerate_designations() const { return degenerate_; }

 private:
  struct ClosePair {
    PointId u, w;
    double d;
  };

  std::optional<int> component_of_or_covering(PointId u) const;
  bool comp_cuts(int comp, PointId u, PointId w) const;
  void merge(int cu, int cw);
  bool try_sum_rule_merge(PointId u, PointId w);
  void incremental_scan();
  void dynamic_recheck();

  int level_;
  double s_;
  const MetricSpace& m_;
  ComponentScaleConfig cfg_;
  MergeSink sink_;
  ScaleState st_;
  std::vector<PointId> alive_;  // sorted
  std::vector<PointId> seen_;   // first-arrival order at this scale
  std::vector<ClosePair> close_;
  std::map<int, int> designated_;  // phase -> component id
  std::int64_t births_ = 0;
  int arrivals_ = 0;
  int degenerate_ = 0;
};

}  // namespace monotree
