#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "monotree/hst.hpp"
#include "monotree/metric.hpp"
#include "monotree/types.hpp"

namespace monotree {

// Internal invariant failures are bug signals, not input errors.
struct EmbedAssertError : std::logic_error {
  using std::logic_error::logic_error;
};
inline void embed_check(bool ok, const std::string& what) {
  if (!ok) throw EmbedAssertError(what);
}

enum class CheckLevel : std::uint8_t {
  Fast,  // monotonicity + contraction allowance on every distance update
  Full   // additionally per-step cluster diameter bounds and tree validation
};

// One scale's online monotone partition of the alive points. Implementations
// must only coarsen: once two alive points share a cluster they stay
// together while both remain alive.
class ScaleOps {
 public:
  virtual ~ScaleOps() = default;
  virtual void arrival(PointId v, int arrival_ordinal) = 0;
  virtual void departure(PointId v) = 0;
  virtual bool same_cluster(PointId u, PointId v) const = 0;
  virtual void clusters_of(std::span<const PointId> alive,
                           PartitionLevel& out) const = 0;
  virtual std::string dump_json() const { return "{}"; }
};

// Reports pairs of alive points that just became co-clustered at a level.
using MergeSink =
    std::function<void(const std::vector<std::pair<PointId, PointId>>&)>;
using ScaleFactory =
    std::function<std::unique_ptr<ScaleOps>(int level, MergeSink sink)>;

struct EmbedderSpec {
  std::string name;
  ScaleFactory make_scale;
  // Target scales are cfactor * 2^level (contraction bookkeeping for lp
  // coordinate maps; 1 otherwise).
  double cfactor = 1.0;
  // The window top is the largest 2^j <= top_factor * d_max(V_t); above it
  // the partition must deterministically be a single cluster. 32 works for
  // ball components (first radius >= s/16 > d_max covers everything); the
  // interval partitions need max(32, 2/eps).
  double top_factor = 32.0;
  // Epsilon governing the bottom of the materialized scale window at a given
  // arrival count (merge threshold for incremental strategies, 1 otherwise).
  std::function<double(int arrivals)> window_eps = [](int) { return 1.0; };
  // Contraction allowance alpha_t; 1 for non-contractive embedders.
  std::function<double(int arrivals)> alpha = [](int) { return 1.0; };
  // Allowed cluster diameter in the source metric at scale s (Full checks).
  std::function<double(double s, int arrivals)> diameter_bound =
      [](double s, int) { return s; };
};

// Step-synchronous view of the evolving target metric. Valid only inside the
// sink callback.
class MultiScaleEmbedder;
class TargetView {
 public:
  int step() const;  // 1-based event index
  const UpdateEvent& event() const;
  std::span<const PointId> alive() const;
  double dist(PointId u, PointId v) const;  // target distance, alive points
  double source_dist(PointId u, PointId v) const;
  double alpha() const;  // contraction allowance at this step
  // Induced HST over the alive points; built lazily, cached per step.
  const Hst& tree() const;
  // (level, cluster count over alive points), ascending by level.
  std::vector<std::pair<int, int>> scale_cluster_counts() const;
  int window_lo() const;
  int window_hi() const;

 private:
  friend class MultiScaleEmbedder;
  explicit TargetView(MultiScaleEmbedder* e) : e_(e) {}
  MultiScaleEmbedder* e_;
};

using StepSink = std::function<void(const TargetView&)>;

// Drives one embedding run: maintains the active scale window
// [eps*d_min/2, 32*d_max] over the seen points, replays history into newly
// materialized scales, tracks the target distance of every co-alive pair,
// and asserts monotonicity plus the contraction allowance on every update.
class MultiScaleEmbedder {
 public:
  MultiScaleEmbedder(const UpdateSequence& seq, const MetricSpace& metric,
                     EmbedderSpec spec, std::uint64_t seed,
                     CheckLevel checks = CheckLevel::Full);
  ~MultiScaleEmbedder();

  void run(const StepSink& sink);

  // Scale-state dumps for the harness (after run() or mid-run in a sink).
  std::vector<std::pair<int, std::string>> dump_scales() const;

 private:
  friend class TargetView;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---- materialized traces -----------------------------------------------------

struct TraceSnapshot {
  int step = 0;
  UpdateEvent event;
  std::vector<PointId> alive;       // sorted
  std::vector<double> dists;        // row-major |alive| x |alive| target dists
  double alpha = 1.0;               // contraction allowance at this step
  std::shared_ptr<const Hst> tree;  // present when materialized with trees

  double dist_at(PointId u, PointId v) const;
  bool has(PointId u) const;
};

struct EmbeddingTrace {
  std::string embedder;
  std::uint64_t seed = 0;
  std::string config_json = "{}";
  std::vector<TraceSnapshot> snapshots;
};

// A reusable handle for "run this embedder over (seq, metric) with a seed".
using EmbedRunner = std::function<void(const UpdateSequence&, const MetricSpace&,
                                       std::uint64_t seed, const StepSink&)>;

EmbeddingTrace collect_trace(const EmbedRunner& runner, const UpdateSequence& seq,
                             const MetricSpace& metric, std::uint64_t seed,
                             bool with_trees, const std::string& name,
                             const std::string& config_json = "{}");

}  // namespace monotree
