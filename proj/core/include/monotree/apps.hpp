#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "monotree/embed.hpp"
#include "monotree/hst.hpp"
#include "monotree/metric.hpp"

namespace monotree {

struct AppError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- metrical request-answer cost decomposition --------------------------------

// Cost of one answer step: movement multiplicities over point pairs plus a
// metric-independent part; the step cost is sum(mult * d(u,v)) + beta.
struct StepCost {
  std::vector<std::tuple<PointId, PointId, double>> moves;
  double beta = 0;
  double eval(const std::function<double(PointId, PointId)>& dist) const;
};

// k-server / k-taxi instance; a request (x, y) asks a taxi to reach x and
// ride to y (the ride is free); x == y is the k-server case.
struct KServerInstance {
  MetricSpace metric;
  int k = 1;
  std::vector<PointId> initial;
  std::vector<std::pair<PointId, PointId>> requests;

  bool is_kserver() const;
  void validate() const;
  // Movement cost decomposition for answer `server` on request index t given
  // the configuration before the step; used by tests to pin the cost model.
  static StepCost taxi_step_cost(PointId from, PointId x, PointId y);

  std::string to_json() const;
  static KServerInstance from_json(const std::string& text);
};

// ---- Double Coverage on the edge-weighted view of an HST -----------------------

// Position of a server: the point at tree distance `height` above leaf
// `anchor` (0 = at the leaf). The edge-weight view makes leaf-to-leaf
// distances exactly phi(lca).
struct TreePos {
  PointId anchor = 0;
  double height = 0;
};

class DoubleCoverage {
 public:
  DoubleCoverage(std::shared_ptr<const Hst> tree, std::vector<PointId> initial);

  // Serves a request at a leaf by the classical rule: all unblocked servers
  // advance toward the request at equal speed until one arrives. Returns the
  // total tree movement; `serving` reports which server arrived.
  double serve(PointId request, int* serving = nullptr);

  // Monotone update: leaves persist and distances only shrink; anchors are
  // carried over and heights capped at the new root.
  void update_tree(std::shared_ptr<const Hst> tree);

  const std::vector<TreePos>& servers() const { return pos_; }
  bool all_on_leaves() const;
  double pos_distance(const TreePos& a, const TreePos& b) const;

 private:
  double dist_to_leaf(const TreePos& p, PointId leaf) const;
  void move_toward(TreePos& p, PointId leaf, double delta) const;

  std::shared_ptr<const Hst> tree_;
  std::vector<TreePos> pos_;
};

struct DcRun {
  std::vector<int> serving;  // serving server per request
  double cost = 0;           // total tree movement
};

// Classical Double Coverage for k-server on a fixed HST.
DcRun dc_kserver(std::shared_ptr<const Hst> tree, std::span<const PointId> initial,
                 std::span<const PointId> requests);

// ---- offline optimum / work function DP -----------------------------------------

// Exact work function over k-multisets of a small universe (<= 12 points,
// k <= 4, <= 20 requests).
class WorkFunction {
 public:
  WorkFunction(const MetricSpace& metric, std::vector<PointId> universe, int k,
               std::span<const PointId> initial);

  void serve(PointId x, PointId y);
  int steps() const { return steps_; }
  double optimum() const;
  double value(std::span<const PointId> config) const;
  std::vector<std::vector<PointId>> support() const;
  std::vector<PointId> support_points() const;

 private:
  int config_index(std::span<const PointId> config) const;

  const MetricSpace& m_;
  std::vector<PointId> uni_;
  int k_;
  int steps_ = 0;
  std::vector<std::vector<int>> configs_;  // sorted universe-index multisets
  std::vector<double> w_;
  std::vector<std::vector<double>> cdist_;
};

double offline_opt(const KServerInstance& inst);
// Union of the points of all support configurations after t requests.
std::vector<PointId> work_function_support(const KServerInstance& inst, int t);
// Max support-point count over all prefixes.
int work_function_width(const KServerInstance& inst);

// ---- embedding + HST algorithm pipeline ------------------------------------------

// Contract for online algorithms driven through evolving HSTs: they consume
// monotone tree updates without resetting state and report server moves as
// leaf-anchor changes.
class HstOnlineAlgorithm {
 public:
  struct Served {
    double target_cost = 0;
    std::vector<std::pair<PointId, PointId>> anchor_moves;  // (from, to)
    bool leaf_complete = true;  // all positions on leaves before and after
  };
  virtual ~HstOnlineAlgorithm() = default;
  virtual std::string name() const = 0;
  virtual void start(std::shared_ptr<const Hst> tree,
                     std::span<const PointId> initial) = 0;
  virtual void update_tree(std::shared_ptr<const Hst> tree) = 0;
  virtual Served serve(PointId x, PointId y) = 0;
  virtual std::vector<PointId> anchors() const = 0;
};

std::unique_ptr<HstOnlineAlgorithm> make_dc_kserver_algorithm();
std::unique_ptr<HstOnlineAlgorithm> make_greedy_ktaxi_algorithm();

struct PipelineResult {
  double source_cost = 0;
  double target_cost = 0;
  std::vector<double> per_request_source;
  std::vector<double> per_request_target;
  int embedding_updates = 0;
};

// Feeds the instance's relevant points to the embedder as arrivals (the
// relevant set only grows), replays tree updates into the algorithm, and
// pays source-metric distances for anchor moves. Whenever a request's moves
// are leaf-to-leaf, its source cost never exceeds its target cost
// (asserted); cumulative costs always satisfy source <= target.
PipelineResult run_pipeline(const EmbedRunner& embedder, std::uint64_t seed,
                            HstOnlineAlgorithm& alg, const KServerInstance& inst);
// Same, over an already materialized trace (snapshots must carry trees) of
// the remapped arrival sequence; used with identity embeddings in tests.
PipelineResult run_pipeline_on_trace(const EmbeddingTrace& trace,
                                     HstOnlineAlgorithm& alg,
                                     const KServerInstance& inst);

// Relevant points of the instance in first-relevance order (initial
// configuration first, then request points by first appearance), plus the
// restricted metric and the arrival sequence over remapped dense ids.
struct PipelinePrep {
  std::vector<PointId> order;        // original ids, arrival order
  std::vector<int> remap;            // original id -> dense id (-1 unused)
  MetricSpace restricted;
  UpdateSequence arrivals;
  std::vector<int> request_step;     // event index completing request t's points
};
PipelinePrep prepare_pipeline(const KServerInstance& inst);
MetricSpace restrict_metric(const MetricSpace& m, std::span<const PointId> order);

// ---- guess and double ------------------------------------------------------------

struct PhaseLog {
  int phase = 0;
  double zeta = 0;
  double m_guess = 0;
  int t_start = 0, t_end = 0;      // request indices, 1-based inclusive
  double prefix_cost = 0;          // cost of this phase's algorithm on r[1..t_end]
  double live_cost = 0;            // cost actually paid within the phase
  double switch_cost = 0;          // matching cost paid at the phase switch
  double opt_prefix = 0;
  double trigger_value = 0;        // log2^2(2t) * opt_t at phase end
};

struct GuessDoubleResult {
  double total_source_cost = 0;    // live + switch costs, in the source metric
  std::vector<PhaseLog> phases;
  double zeta_final = 0;
  double sum_prefix_costs = 0;
};

// Restarts the pipeline with doubled guesses whenever the current guess is
// disproved: zeta_1 = min nonzero distance, m_1 = 2; phase i ends at the
// first t with zeta_i < log2(2t)^2 * opt_t, then zeta_{i+1} = 2 zeta_i and
// m_{i+1} = (2t)^2. The embedding of phase i uses epsilon = m_i^{-6}.
GuessDoubleResult guess_and_double(
    const KServerInstance& inst, std::uint64_t seed,
    const std::function<std::unique_ptr<HstOnlineAlgorithm>()>& alg_factory);

}  // namespace monotree
