#pragma once

#include <cstdint>
#include <optional>

#include "monotree/embed.hpp"

namespace monotree {

// Probabilistic online monotone embedder for general metrics. Per scale it
// maintains random-radius ball components with earliest-birth assignment and
// a coarsen-only group layer; a single designated merging component absorbs
// neighbours whenever it splits a pair closer than epsilon * s, which keeps
// close pairs together without unbounded cluster growth.
struct IncrementalConfig {
  std::optional<int> n_known;       // point budget; arrivals must not exceed it
  std::optional<double> epsilon;    // merge threshold ratio, default n^-6
  std::uint64_t seed = 1;
  CheckLevel checks = CheckLevel::Full;
};

double default_incremental_epsilon(int n);  // n^-6, clamped into (0, 1]

// Known point budget: one designated merging component per scale for the
// whole run. Throws if arrivals exceed cfg.n_known.
EmbeddingTrace embed_known_n(const UpdateSequence& seq, const MetricSpace& metric,
                             const IncrementalConfig& cfg, bool with_trees = false);
EmbedRunner known_n_runner(IncrementalConfig cfg);

// Unknown point budget: guesses m_i = 2^(2^i) in phases, epsilon_i = m_i^-6,
// one designated merging component per phase per scale. Snapshots may
// contract by up to 2*ceil(log2 log2 t); the allowance is tracked per step.
EmbeddingTrace embed_unknown_n(const UpdateSequence& seq, const MetricSpace& metric,
                               const IncrementalConfig& cfg, bool with_trees = false);
EmbedRunner unknown_n_runner(IncrementalConfig cfg);

// Phase arithmetic for the unknown-budget variant: the phase index active at
// arrival count t (phase i spans t in (m_{i-1}, m_i], m_i = 2^(2^i)).
int phase_of(int arrivals);
double phase_guess(int phase);    // m_i
double phase_epsilon(int phase);  // m_i^-6

}  // namespace monotree
