#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "monotree/embed.hpp"
#include "monotree/metric.hpp"
#include "monotree/types.hpp"

namespace monotree {

// ---- trace audits -----------------------------------------------------------

struct MonotoneViolation {
  int step;  // 1-based step t whose snapshot increased a distance
  PointId u, v;
  double before, after;
};

// Checks that distances between surviving pairs never increase across
// consecutive snapshots (relative tolerance 1e-9).
std::optional<MonotoneViolation> audit_monotone(const EmbeddingTrace& trace);

struct ContractionReport {
  double lambda_c = 1;  // max over steps/pairs of d_X / d_t
  double lambda_e = 0;  // max over steps/pairs of d_t / d_X
  double distortion() const { return lambda_c * lambda_e; }
  double max_allowance = 1;  // max alpha_t seen in the trace
};

// Worst-case contraction and expansion across a trace against the source
// metric. Non-contractive embedders must show lambda_c = 1 (callers assert).
ContractionReport audit_contraction(const EmbeddingTrace& trace,
                                    const MetricSpace& metric);

// ---- Monte-Carlo estimation --------------------------------------------------

struct PairEstimate {
  PointId u, v;
  int first_step;   // first step of this co-alive stretch
  double d_source;
  double mean;      // mean target distance at the stretch start
  double stddev;    // sample standard deviation across trials
  double max_seen;
  double expansion() const { return mean / d_source; }
};

struct DistortionReport {
  std::string embedder;
  std::uint64_t seed = 0;
  int trials = 0;
  std::vector<PairEstimate> pairs;       // deterministic order
  double max_expected_expansion = 0;     // max over pairs of mean/d
  double max_expected_expansion_err = 0; // 3 sigma of the maximizing cell
  double lambda_c = 1;                   // worst contraction in any trial
  bool error_bars_valid = true;          // false when trials == 1
};

// Runs the embedder `trials` times with seeds derived from (seed, trial).
// Per co-alive stretch of each pair, the expected target distance is maximal
// at the stretch start (distances are monotone within a stretch), so the
// estimate accumulates the stretch-start values. Aggregation is a
// deterministic fold in trial order; `threads` > 1 splits trials into
// contiguous chunks (the chunk layout is part of the provenance).
DistortionReport mc_distortion(const EmbedRunner& runner, const std::string& name,
                               const UpdateSequence& seq, const MetricSpace& metric,
                               int trials, std::uint64_t seed, int threads = 1);

// ---- smoothness estimation -----------------------------------------------------

// A single-scale partition driver: runs one scale over the sequence with the
// given seed and reports whether u, v end in the same cluster.
using PartitionDriver = std::function<bool(const UpdateSequence&, const MetricSpace&,
                                           std::uint64_t seed, PointId u, PointId v)>;

struct SmoothnessRow {
  PointId u, v;
  double d;
  double split_freq;
  double sigma3;  // 3 sigma binomial band
  double bound;   // delta * d / s as claimed by the module under test
};

// Estimates per-pair split frequencies of a single-scale partition at scale
// s over `trials` runs and tabulates them against a claimed bound.
std::vector<SmoothnessRow> mc_smoothness(
    const PartitionDriver& driver, const UpdateSequence& seq,
    const MetricSpace& metric, double s, int trials, std::uint64_t seed,
    const std::function<double(double d)>& claimed_bound, int threads = 1);

// ---- instance generation -------------------------------------------------------

struct InstanceParams {
  int n = 16;        // number of points
  int width = 0;     // sliding-window width (0 = n/a)
  int dim = 2;       // grid-lp
  int p = 2;         // grid-lp norm (0 = max)
  double spread = 0; // uniform-line span; 0 defaults to n
  bool geometric = false;  // sliding-window: coordinates 2^i instead of i
};

struct Instance {
  UpdateSequence sequence;
  MetricSpace metric;
  std::string kind;
};

// kinds: uniform-line, evenly-spaced-line (arrivals-only), grid-lp,
// random-metric (shortest paths of a random weighted graph),
// sliding-window.
Instance gen_instance(const std::string& kind, const InstanceParams& params,
                      std::uint64_t seed);

// ---- reports -------------------------------------------------------------------

// CSV + JSON-sidecar writers; all output is byte-stable for a fixed
// (embedder, config, seed).
std::string format_double(double v);
void write_distortion_report(const std::string& dir, const DistortionReport& rep,
                             const std::string& config_json);
void write_smoothness_report(const std::string& path,
                             const std::vector<SmoothnessRow>& rows);

// Trace directory: provenance.json, metric+events (sequence.jsonl),
// summary.csv and per-step hst_NNNN.json files.
void write_trace_dir(const std::string& dir, const EmbeddingTrace& trace,
                     const UpdateSequence& seq, const MetricSpace& metric);
EmbeddingTrace read_trace_dir(const std::string& dir, UpdateSequence* seq_out = nullptr,
                              MetricSpace* metric_out = nullptr);

// Levels of the sensitive smoothness band for a pair at distance d with
// threshold eps: both the floor and ceil reading of the band edge, surfaced
// as diagnostics.
std::pair<int, int> sensitive_band_levels(double d, double eps);

}  // namespace monotree
