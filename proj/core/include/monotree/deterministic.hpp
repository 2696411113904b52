#pragma once

#include <functional>
#include <span>
#include <vector>

#include "monotree/embed.hpp"
#include "monotree/hst.hpp"
#include "monotree/metric.hpp"

namespace monotree {

// Offline construction in the style of Kruskal's algorithm: pairs in
// ascending distance order (ties broken by lexicographic pair order), each
// union adds a root with weight phi(r_u) + phi(r_v) + d. Non-contractive
// with max expansion <= |S| - 1, attained exactly on evenly spaced line
// points.
Hst offline_kruskal(const MetricSpace& metric, std::span<const PointId> points);

// Strict online embedder: point i attaches at the lowest ancestor of its
// nearest neighbour such that d_T(x, v) >= (1 + 2^-(i-1)) d(x, v) for every
// embedded v; distances are fixed forever. After i points every pair
// satisfies d_T in [(1+2^-(i-1)) d, 2^i d] (asserted).
class StrictOnlineEmbedder {
 public:
  explicit StrictOnlineEmbedder(const MetricSpace& metric) : m_(metric) {}

  void arrive(PointId v);
  double target_distance(PointId u, PointId v) const;  // fixed once embedded
  const Hst& tree() const { return tree_; }
  const std::vector<PointId>& embedded() const { return pts_; }
  int count() const { return static_cast<int>(pts_.size()); }

 private:
  void assert_sandwich() const;

  const MetricSpace& m_;
  Hst tree_;
  std::vector<PointId> pts_;
};

// Runs the strict embedder over the arrivals of a sequence (departures are
// ignored; strict embeddings never un-embed) and materializes the trace.
EmbeddingTrace strict_online(const UpdateSequence& seq, const MetricSpace& metric);

// Deterministic monotone embedder with known point budget n: scales are the
// realized pairwise distances, the partition at scale s is the connected
// components of the threshold graph (edges d <= s). Non-expansive with
// contraction <= i-1 after i points; pass rescale=true for the
// non-contractive normal form (all distances multiplied by n-1).
EmbeddingTrace monotone_known_n(const UpdateSequence& seq, const MetricSpace& metric,
                                int n, bool rescale = false);

// Deterministic monotone embedder without a point budget. The k-th arrival
// links to an earlier point v_j at scale s iff d(v_j, v_k) <= s / f(k);
// partitions are the connected components, giving a non-contractive
// embedding with expansion <= f(i) after i points. f must be non-decreasing
// with sum_{k>=2} 1/f(k) <= 1 (checked numerically).
using GrowthFn = std::function<double(int)>;

// Default: f(k) = c * k * log2(k+2)^2 with c normalizing the reciprocal sum.
GrowthFn default_growth_fn();
void validate_growth_fn(const GrowthFn& f);

EmbeddingTrace monotone_unknown_n(const UpdateSequence& seq, const MetricSpace& metric,
                                  const GrowthFn& f);

// Brute-force threshold-graph partition used by the deterministic embedders
// and their oracles: components of the graph on `points` with an edge
// (u, v) iff edge_pred(u, v) holds.
std::vector<std::vector<PointId>> graph_components(
    std::span<const PointId> points,
    const std::function<bool(PointId, PointId)>& edge_pred);

}  // namespace monotree
