#pragma once

#include <cstdint>
#include <optional>

#include "monotree/embed.hpp"

namespace monotree {

// Interval partitions for the line and per-dimension refinements for lp
// coordinate metrics. Per scale, the line is chopped at random cutting
// points z_k drawn uniformly from [k*r, (k+1/2)*r]; components are the
// intervals [z_k, z_{k+1}). Incremental mode merges each cluster at most
// once with a neighbour when a pair within epsilon*s is split; dynamic mode
// reuses the sum-rule of the dynamic embedder with intervals as components
// (radius = half interval length around the midpoint), which reduces to a
// hull-span test.
enum class LineMode : std::uint8_t { Incremental, Dynamic };

struct LineConfig {
  LineMode mode = LineMode::Incremental;
  std::optional<int> n_known;      // incremental mode; default: arrival count
  std::optional<double> epsilon;   // default n^-3 (line), n^-3/D (linf)
  std::uint64_t seed = 1;
  CheckLevel checks = CheckLevel::Full;
};

double default_line_epsilon(int n);

// Line metric only.
EmbeddingTrace embed_line(const UpdateSequence& seq, const MetricSpace& metric,
                          const LineConfig& cfg, bool with_trees = false);
EmbedRunner line_runner(LineConfig cfg);

// lp coordinate metrics with p in {1, 2, inf}: runs one independently seeded
// line partition per dimension at every scale and takes their refinement.
// For p != inf the identity coordinate map is used and all target scales are
// multiplied by the norm-equivalence factor (D for p=1, sqrt(D) for p=2) so
// the embedding stays non-contractive in the source norm.
EmbeddingTrace embed_linf(const UpdateSequence& seq, const MetricSpace& metric,
                          const LineConfig& cfg, bool with_trees = false);
EmbedRunner linf_runner(LineConfig cfg);

// Exposed for tests: one scale of the line partition.
double line_cut_point(std::uint64_t seed, int level, int dim, std::int64_t k,
                      double interval_len);

}  // namespace monotree
