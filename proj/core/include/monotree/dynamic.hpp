#pragma once

#include <cstdint>

#include "monotree/embed.hpp"

namespace monotree {

// Fully dynamic probabilistic monotone embedder: width-bounded merging with
// the merge-safety diameter rule. A merge of two groups succeeds iff every
// cross pair of live components satisfies r1 + r2 + d(c1,c2) <= safety * s,
// which keeps clusters s-bounded under any future arrivals; departures
// re-enable previously blocked merges, so they are re-checked.
struct DynamicConfig {
  std::uint64_t seed = 1;
  double trigger_ratio = 1.0 / 6;  // attempt merges for pairs within trigger*s
  double safety_ratio = 1.0;       // cluster diameter cap, in units of s
  CheckLevel checks = CheckLevel::Full;
};

EmbeddingTrace embed_dynamic(const UpdateSequence& seq, const MetricSpace& metric,
                             const DynamicConfig& cfg, bool with_trees = false);
EmbedRunner dynamic_runner(DynamicConfig cfg);

}  // namespace monotree
