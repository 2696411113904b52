#include "monotree/apps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>

#include <json.hpp>

#include "monotree/incremental.hpp"
#include "monotree/rng.hpp"

namespace monotree {

using nlohmann::json;

namespace {
constexpr double kRelTol = 1e-9;
}

// ---- cost decomposition ------------------------------------------------------------

double StepCost::eval(const std::function<double(PointId, PointId)>& dist) const {
  double total = beta;
  for (const auto& [u, v, mult] : moves) total += mult * dist(u, v);
  return total;
}

bool KServerInstance::is_kserver() const {
  for (const auto& [x, y] : requests)
    if (x != y) return false;
  return true;
}

void KServerInstance::validate() const {
  if (k < 1) throw AppError("k must be at least 1");
  if (static_cast<int>(initial.size()) != k)
    throw AppError("initial configuration must list exactly k points");
  auto in_metric = [&](PointId p) { return p >= 0 && p < metric.size(); };
  for (PointId p : initial)
    if (!in_metric(p)) throw AppError("initial point outside the metric");
  for (const auto& [x, y] : requests)
    if (!in_metric(x) || !in_metric(y)) throw AppError("request outside the metric");
}

StepCost KServerInstance::taxi_step_cost(PointId from, PointId x, PointId y) {
  StepCost c;
  c.moves.emplace_back(from, x, 1.0);  // empty travel; the ride x -> y is free
  (void)y;
  return c;
}

std::string KServerInstance::to_json() const {
  json j;
  json m;
  if (metric.kind() == MetricKind::Line) {
    m["kind"] = "line";
    std::vector<double> c;
    for (PointId p = 0; p < metric.size(); ++p) c.push_back(metric.coord(p));
    m["coords"] = c;
  } else if (metric.kind() == MetricKind::Lp) {
    m["kind"] = "lp";
    m["p"] = metric.lp_p();
    std::vector<std::vector<double>> c;
    for (PointId p = 0; p < metric.size(); ++p)
      c.emplace_back(metric.coords_of(p).begin(), metric.coords_of(p).end());
    m["coords"] = c;
  } else {
    m["kind"] = "matrix";
    std::vector<std::vector<double>> rows(metric.size(),
                                          std::vector<double>(metric.size()));
    for (PointId a = 0; a < metric.size(); ++a)
      for (PointId b = 0; b < metric.size(); ++b) rows[a][b] = metric.dist(a, b);
    m["rows"] = rows;
  }
  j["metric"] = m;
  j["k"] = k;
  j["initial"] = initial;
  json reqs = json::array();
  for (const auto& [x, y] : requests) reqs.push_back({{"x", x}, {"y", y}});
  j["requests"] = reqs;
  return j.dump();
}

KServerInstance KServerInstance::from_json(const std::string& text) {
  json j = json::parse(text);
  KServerInstance inst;
  const json& m = j.at("metric");
  std::string kind = m.at("kind").get<std::string>();
  if (kind == "line")
    inst.metric = MetricSpace::from_line(m.at("coords").get<std::vector<double>>());
  else if (kind == "lp")
    inst.metric = MetricSpace::from_lp(
        m.at("coords").get<std::vector<std::vector<double>>>(), m.value("p", 0));
  else if (kind == "matrix")
    inst.metric = MetricSpace::from_matrix(
        m.at("rows").get<std::vector<std::vector<double>>>());
  else
    throw AppError("unknown metric kind in instance");
  inst.k = j.at("k").get<int>();
  inst.initial = j.at("initial").get<std::vector<PointId>>();
  for (const auto& r : j.at("requests"))
    inst.requests.emplace_back(r.at("x").get<PointId>(), r.at("y").get<PointId>());
  inst.validate();
  return inst;
}

// ---- Double Coverage ----------------------------------------------------------------

DoubleCoverage::DoubleCoverage(std::shared_ptr<const Hst> tree,
                               std::vector<PointId> initial)
    : tree_(std::move(tree)) {
  for (PointId p : initial) {
    tree_->leaf_node(p);  // throws if unmapped
    pos_.push_back({p, 0.0});
  }
}

double DoubleCoverage::pos_distance(const TreePos& a, const TreePos& b) const {
  double big = a.anchor == b.anchor ? 0.0 : tree_->distance(a.anchor, b.anchor);
  if (a.height >= big / 2 || b.height >= big / 2) return std::abs(a.height - b.height);
  return big - a.height - b.height;
}

double DoubleCoverage::dist_to_leaf(const TreePos& p, PointId leaf) const {
  return pos_distance(p, TreePos{leaf, 0.0});
}

void DoubleCoverage::move_toward(TreePos& p, PointId leaf, double delta) const {
  if (p.anchor == leaf) {
    p.height -= delta;
  } else {
    double big = tree_->distance(p.anchor, leaf);
    if (p.height >= big / 2) {  // already above the junction, descending
      p.anchor = leaf;
      p.height -= delta;
    } else if (p.height + delta <= big / 2) {
      p.height += delta;  // climbing toward the junction
    } else {
      p.anchor = leaf;
      p.height = big - p.height - delta;  // crossed the peak
    }
  }
  if (std::abs(p.height) < 1e-12) p.height = 0;
}

bool DoubleCoverage::all_on_leaves() const {
  for (const TreePos& p : pos_)
    if (p.height != 0) return false;
  return true;
}

double DoubleCoverage::serve(PointId request, int* serving) {
  tree_->leaf_node(request);
  const double tol = 1e-12 * std::max(1.0, tree_->node(tree_->root()).phi);
  double total = 0;
  int k = static_cast<int>(pos_.size());
  int guard_limit = 64 + 16 * k * k;
  for (int guard = 0;; ++guard) {
    embed_check(guard < guard_limit, "double coverage event loop did not converge");
    int arrived = -1;
    for (int i = 0; i < k; ++i)
      if (pos_[i].anchor == request && pos_[i].height == 0) {
        arrived = i;
        break;
      }
    if (arrived >= 0) {
      if (serving) *serving = arrived;
      return total;
    }

    std::vector<int> movers;
    for (int i = 0; i < k; ++i) {
      bool blocked = false;
      double di = dist_to_leaf(pos_[i], request);
      for (int j = 0; j < k && !blocked; ++j) {
        if (j == i) continue;
        double dij = pos_distance(pos_[i], pos_[j]);
        if (dij <= tol) {  // co-located: only the lowest index moves
          blocked = j < i;
          continue;
        }
        double dj = dist_to_leaf(pos_[j], request);
        // j strictly inside i's path to the request
        if (dj > tol && std::abs(dij + dj - di) <= tol) blocked = true;
      }
      if (!blocked) movers.push_back(i);
    }
    embed_check(!movers.empty(), "double coverage found no unblocked server");

    double delta = std::numeric_limits<double>::infinity();
    for (int i : movers) delta = std::min(delta, dist_to_leaf(pos_[i], request));
    for (int i : movers)
      for (int j : movers) {
        if (i == j) continue;
        double di = dist_to_leaf(pos_[i], request);
        double dj = dist_to_leaf(pos_[j], request);
        double dij = pos_distance(pos_[i], pos_[j]);
        double t = (dij + dj - di) / 2;  // j reaches i's path (or they meet)
        if (t > tol) delta = std::min(delta, t);
      }
    embed_check(delta > 0 && std::isfinite(delta), "double coverage stalled");
    for (int i : movers) move_toward(pos_[i], request, delta);
    total += delta * static_cast<double>(movers.size());
  }
}

void DoubleCoverage::update_tree(std::shared_ptr<const Hst> tree) {
  double cap = tree->node(tree->root()).phi / 2;
  for (TreePos& p : pos_) {
    tree->leaf_node(p.anchor);  // leaves persist across monotone updates
    p.height = std::min(p.height, cap);
  }
  tree_ = std::move(tree);
}

DcRun dc_kserver(std::shared_ptr<const Hst> tree, std::span<const PointId> initial,
                 std::span<const PointId> requests) {
  DoubleCoverage dc(std::move(tree), {initial.begin(), initial.end()});
  DcRun run;
  for (PointId r : requests) {
    int who = -1;
    run.cost += dc.serve(r, &who);
    run.serving.push_back(who);
  }
  return run;
}

// ---- work function DP ----------------------------------------------------------------

namespace {

void enumerate_multisets(int universe, int k, std::vector<int>& cur,
                         std::vector<std::vector<int>>& out, int from = 0) {
  if (static_cast<int>(cur.size()) == k) {
    out.push_back(cur);
    return;
  }
  for (int i = from; i < universe; ++i) {
    cur.push_back(i);
    enumerate_multisets(universe, k, cur, out, i);
    cur.pop_back();
  }
}

double matching_cost(const MetricSpace& m, const std::vector<PointId>& uni,
                     const std::vector<int>& a, std::vector<int> b) {
  std::sort(b.begin(), b.end());
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0;
    for (std::size_t i = 0; i < a.size(); ++i) c += m.dist(uni[a[i]], uni[b[i]]);
    best = std::min(best, c);
  } while (std::next_permutation(b.begin(), b.end()));
  return best;
}

}  // namespace

WorkFunction::WorkFunction(const MetricSpace& metric, std::vector<PointId> universe,
                           int k, std::span<const PointId> initial)
    : m_(metric), uni_(std::move(universe)), k_(k) {
  std::sort(uni_.begin(), uni_.end());
  uni_.erase(std::unique(uni_.begin(), uni_.end()), uni_.end());
  if (static_cast<int>(uni_.size()) > 12)
    throw AppError("work function universe beyond 12 points");
  if (k_ > 4 || k_ < 1) throw AppError("work function supports 1 <= k <= 4");
  std::vector<int> cur;
  enumerate_multisets(static_cast<int>(uni_.size()), k_, cur, configs_);

  cdist_.assign(configs_.size(), std::vector<double>(configs_.size(), 0));
  for (std::size_t a = 0; a < configs_.size(); ++a)
    for (std::size_t b = a + 1; b < configs_.size(); ++b)
      cdist_[a][b] = cdist_[b][a] = matching_cost(m_, uni_, configs_[a], configs_[b]);

  std::vector<PointId> init(initial.begin(), initial.end());
  if (static_cast<int>(init.size()) != k_)
    throw AppError("initial configuration size must equal k");
  int init_id = config_index(init);
  w_.assign(configs_.size(), 0);
  for (std::size_t c = 0; c < configs_.size(); ++c) w_[c] = cdist_[init_id][c];
}

int WorkFunction::config_index(std::span<const PointId> config) const {
  std::vector<int> idx;
  for (PointId p : config) {
    auto it = std::lower_bound(uni_.begin(), uni_.end(), p);
    if (it == uni_.end() || *it != p)
      throw AppError("configuration point outside the universe");
    idx.push_back(static_cast<int>(it - uni_.begin()));
  }
  std::sort(idx.begin(), idx.end());
  auto found = std::find(configs_.begin(), configs_.end(), idx);
  if (found == configs_.end()) throw AppError("configuration not enumerated");
  return static_cast<int>(found - configs_.begin());
}

void WorkFunction::serve(PointId x, PointId y) {
  if (++steps_ > 20) throw AppError("work function supports at most 20 requests");
  auto it = std::lower_bound(uni_.begin(), uni_.end(), x);
  if (it == uni_.end() || *it != x) throw AppError("request outside the universe");
  auto iy = std::lower_bound(uni_.begin(), uni_.end(), y);
  if (iy == uni_.end() || *iy != y) throw AppError("request outside the universe");
  int xi = static_cast<int>(it - uni_.begin());
  int yi = static_cast<int>(iy - uni_.begin());

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> served(configs_.size(), inf);
  for (std::size_t c = 0; c < configs_.size(); ++c) {
    for (int a = 0; a < k_; ++a) {
      double cost = w_[c] + m_.dist(uni_[configs_[c][a]], x);
      std::vector<int> next = configs_[c];
      next[a] = yi;
      std::sort(next.begin(), next.end());
      auto found = std::find(configs_.begin(), configs_.end(), next);
      std::size_t id = found - configs_.begin();
      served[id] = std::min(served[id], cost);
    }
  }
  // Relaxation by the (metric) matching distance; one pass suffices.
  std::vector<double> next_w(configs_.size(), inf);
  for (std::size_t c = 0; c < configs_.size(); ++c)
    for (std::size_t d = 0; d < configs_.size(); ++d)
      next_w[c] = std::min(next_w[c], served[d] + cdist_[d][c]);
  w_ = std::move(next_w);
}

double WorkFunction::optimum() const {
  return *std::min_element(w_.begin(), w_.end());
}

double WorkFunction::value(std::span<const PointId> config) const {
  return w_[config_index(config)];
}

std::vector<std::vector<PointId>> WorkFunction::support() const {
  std::vector<std::vector<PointId>> out;
  for (std::size_t c = 0; c < configs_.size(); ++c) {
    bool dominated = false;
    for (std::size_t d = 0; d < configs_.size() && !dominated; ++d) {
      if (d == c) continue;
      if (std::abs(w_[c] - (w_[d] + cdist_[d][c])) <=
          kRelTol * std::max(1.0, w_[c]))
        dominated = true;
    }
    if (!dominated) {
      std::vector<PointId> cfg;
      for (int i : configs_[c]) cfg.push_back(uni_[i]);
      out.push_back(std::move(cfg));
    }
  }
  return out;
}

std::vector<PointId> WorkFunction::support_points() const {
  std::set<PointId> pts;
  for (const auto& cfg : support()) pts.insert(cfg.begin(), cfg.end());
  return {pts.begin(), pts.end()};
}

namespace {

std::vector<PointId> instance_universe(const KServerInstance& inst) {
  std::set<PointId> uni(inst.initial.begin(), inst.initial.end());
  for (const auto& [x, y] : inst.requests) {
    uni.insert(x);
    uni.insert(y);
  }
  return {uni.begin(), uni.end()};
}

}  // namespace

double offline_opt(const KServerInstance& inst) {
  inst.validate();
  WorkFunction wf(inst.metric, instance_universe(inst), inst.k, inst.initial);
  for (const auto& [x, y] : inst.requests) wf.serve(x, y);
  return wf.optimum();
}

std::vector<PointId> work_function_support(const KServerInstance& inst, int t) {
  inst.validate();
  if (t < 0 || t > static_cast<int>(inst.requests.size()))
    throw AppError("prefix length out of range");
  WorkFunction wf(inst.metric, instance_universe(inst), inst.k, inst.initial);
  for (int i = 0; i < t; ++i) wf.serve(inst.requests[i].first, inst.requests[i].second);
  return wf.support_points();
}

int work_function_width(const KServerInstance& inst) {
  inst.validate();
  WorkFunction wf(inst.metric, instance_universe(inst), inst.k, inst.initial);
  int width = static_cast<int>(wf.support_points().size());
  for (const auto& [x, y] : inst.requests) {
    wf.serve(x, y);
    width = std::max(width, static_cast<int>(wf.support_points().size()));
  }
  return width;
}

// ---- pipeline -------------------------------------------------------------------------

MetricSpace restrict_metric(const MetricSpace& m, std::span<const PointId> order) {
  if (m.kind() == MetricKind::Line) {
    std::vector<double> coords;
    for (PointId p : order) coords.push_back(m.coord(p));
    return MetricSpace::from_line(std::move(coords));
  }
  if (m.kind() == MetricKind::Lp) {
    std::vector<std::vector<double>> coords;
    for (PointId p : order)
      coords.emplace_back(m.coords_of(p).begin(), m.coords_of(p).end());
    return MetricSpace::from_lp(std::move(coords), m.lp_p());
  }
  std::vector<std::vector<double>> rows(order.size(), std::vector<double>(order.size()));
  for (std::size_t a = 0; a < order.size(); ++a)
    for (std::size_t b = 0; b < order.size(); ++b)
      rows[a][b] = m.dist(order[a], order[b]);
  return MetricSpace::from_matrix(std::move(rows));
}

PipelinePrep prepare_pipeline(const KServerInstance& inst) {
  inst.validate();
  PipelinePrep prep;
  prep.remap.assign(inst.metric.size(), -1);
  auto touch = [&](PointId p) {
    if (prep.remap[p] == -1) {
      prep.remap[p] = static_cast<int>(prep.order.size());
      prep.order.push_back(p);
      return true;
    }
    return false;
  };
  std::vector<UpdateEvent> events;
  for (PointId p : inst.initial)
    if (touch(p))
      events.push_back({static_cast<PointId>(prep.remap[p]), Op::Arrive, {}});
  for (const auto& [x, y] : inst.requests) {
    if (touch(x)) events.push_back({static_cast<PointId>(prep.remap[x]), Op::Arrive, {}});
    if (touch(y)) events.push_back({static_cast<PointId>(prep.remap[y]), Op::Arrive, {}});
    prep.request_step.push_back(static_cast<int>(events.size()));
  }
  prep.restricted = restrict_metric(inst.metric, prep.order);
  prep.arrivals = UpdateSequence::from_events(std::move(events));
  return prep;
}

PipelineResult run_pipeline_on_trace(const EmbeddingTrace& trace,
                                     HstOnlineAlgorithm& alg,
                                     const KServerInstance& inst) {
  PipelinePrep prep = prepare_pipeline(inst);
  if (static_cast<int>(trace.snapshots.size()) != prep.arrivals.length())
    throw AppError("trace does not match the instance's arrival sequence");
  for (const auto& s : trace.snapshots)
    if (!s.tree) throw AppError("pipeline needs snapshots with trees");

  // arrivals before the first request's points = distinct initial points
  std::set<PointId> init_set(inst.initial.begin(), inst.initial.end());
  int initial_block = static_cast<int>(init_set.size());

  std::vector<PointId> init_remapped;
  for (PointId p : inst.initial)
    init_remapped.push_back(static_cast<PointId>(prep.remap[p]));
  alg.start(trace.snapshots[initial_block - 1].tree, init_remapped);

  PipelineResult res;
  int cursor = initial_block;
  for (std::size_t t = 0; t < inst.requests.size(); ++t) {
    int upto = prep.request_step[t];
    for (; cursor < upto; ++cursor) {
      alg.update_tree(trace.snapshots[cursor].tree);
      ++res.embedding_updates;
    }
    auto [x, y] = inst.requests[t];
    auto served = alg.serve(static_cast<PointId>(prep.remap[x]),
                            static_cast<PointId>(prep.remap[y]));
    double src = 0;
    for (const auto& [from, to] : served.anchor_moves)
      src += prep.restricted.dist(from, to);
    res.per_request_source.push_back(src);
    res.per_request_target.push_back(served.target_cost);
    res.source_cost += src;
    res.target_cost += served.target_cost;
    if (served.leaf_complete)
      embed_check(src <= served.target_cost * (1 + kRelTol) + 1e-12,
                  "request source cost exceeded its target cost");
    embed_check(res.source_cost <= res.target_cost * (1 + kRelTol) + 1e-12,
                "cumulative source cost exceeded the target cost");
  }
  return res;
}

PipelineResult run_pipeline(const EmbedRunner& embedder, std::uint64_t seed,
                            HstOnlineAlgorithm& alg, const KServerInstance& inst) {
  PipelinePrep prep = prepare_pipeline(inst);
  EmbeddingTrace trace = collect_trace(embedder, prep.arrivals, prep.restricted, seed,
                                       /*with_trees=*/true, "pipeline");
  return run_pipeline_on_trace(trace, alg, inst);
}

// ---- concrete HST algorithms -------------------------------------------------------

namespace {

class DcAlgorithm : public HstOnlineAlgorithm {
 public:
  std::string name() const override { return "double-coverage"; }
  void start(std::shared_ptr<const Hst> tree, std::span<const PointId> initial) override {
    dc_.emplace(std::move(tree), std::vector<PointId>(initial.begin(), initial.end()));
  }
  void update_tree(std::shared_ptr<const Hst> tree) override {
    dc_->update_tree(std::move(tree));
  }
  Served serve(PointId x, PointId y) override {
    if (x != y) throw AppError("double coverage serves k-server requests only");
    Served out;
    out.leaf_complete = dc_->all_on_leaves();
    std::vector<PointId> before;
    for (const TreePos& p : dc_->servers()) before.push_back(p.anchor);
    out.target_cost = dc_->serve(x);
    out.leaf_complete = out.leaf_complete && dc_->all_on_leaves();
    const auto& servers = dc_->servers();
    for (std::size_t i = 0; i < servers.size(); ++i)
      if (servers[i].anchor != before[i])
        out.anchor_moves.emplace_back(before[i], servers[i].anchor);
    return out;
  }
  std::vector<PointId> anchors() const override {
    std::vector<PointId> out;
    for (const TreePos& p : dc_->servers()) out.push_back(p.anchor);
    return out;
  }

 private:
  std::optional<DoubleCoverage> dc_;
};

class GreedyTaxi : public HstOnlineAlgorithm {
 public:
  std::string name() const override { return "greedy-taxi"; }
  void start(std::shared_ptr<const Hst> tree, std::span<const PointId> initial) override {
    tree_ = std::move(tree);
    taxis_.assign(initial.begin(), initial.end());
  }
  void update_tree(std::shared_ptr<const Hst> tree) override { tree_ = std::move(tree); }
  Served serve(PointId x, PointId y) override {
    int best = 0;
    for (std::size_t i = 1; i < taxis_.size(); ++i)
      if (tree_->distance(taxis_[i], x) < tree_->distance(taxis_[best], x))
        best = static_cast<int>(i);
    Served out;
    out.target_cost = tree_->distance(taxis_[best], x);
    if (taxis_[best] != x) out.anchor_moves.emplace_back(taxis_[best], x);
    taxis_[best] = y;  // the ride x -> y is free
    return out;
  }
  std::vector<PointId> anchors() const override { return taxis_; }

 private:
  std::shared_ptr<const Hst> tree_;
  std::vector<PointId> taxis_;
};

}  // namespace

std::unique_ptr<HstOnlineAlgorithm> make_dc_kserver_algorithm() {
  return std::make_unique<DcAlgorithm>();
}
std::unique_ptr<HstOnlineAlgorithm> make_greedy_ktaxi_algorithm() {
  return std::make_unique<GreedyTaxi>();
}

// ---- guess and double ----------------------------------------------------------------

GuessDoubleResult guess_and_double(
    const KServerInstance& inst, std::uint64_t seed,
    const std::function<std::unique_ptr<HstOnlineAlgorithm>()>& alg_factory) {
  inst.validate();
  if (inst.requests.empty()) throw AppError("guess-and-double needs requests");
  PipelinePrep prep = prepare_pipeline(inst);
  int initial_block;
  {
    std::set<PointId> init_set(inst.initial.begin(), inst.initial.end());
    initial_block = static_cast<int>(init_set.size());
  }

  // opt_t oracle over prefixes, advanced once across phases
  WorkFunction wf(inst.metric, instance_universe(inst), inst.k, inst.initial);
  std::vector<double> opt_at{0.0};  // opt_at[t] for t served requests

  double zeta = std::numeric_limits<double>::infinity();
  for (PointId a = 0; a < inst.metric.size(); ++a)
    for (PointId b = a + 1; b < inst.metric.size(); ++b) {
      double d = inst.metric.dist(a, b);
      if (d > 0) zeta = std::min(zeta, d);
    }
  if (!std::isfinite(zeta)) throw AppError("metric has no nonzero distance");
  double m_guess = 2;

  GuessDoubleResult res;
  std::vector<PointId> phys;  // physical anchors after the previous phase
  int t_start = 1;
  int phase = 1;
  int total = static_cast<int>(inst.requests.size());

  while (t_start <= total) {
    IncrementalConfig ecfg;
    ecfg.epsilon = std::min(1.0, std::pow(m_guess, -6.0));
    ecfg.seed = derive_seed(seed, {0x4744u, static_cast<std::uint64_t>(phase)});
    ecfg.checks = CheckLevel::Fast;
    EmbeddingTrace trace =
        collect_trace(known_n_runner(ecfg), prep.arrivals, prep.restricted, ecfg.seed,
                      /*with_trees=*/true, "guess-and-double");

    auto alg = alg_factory();
    std::vector<PointId> init_remapped;
    for (PointId p : inst.initial)
      init_remapped.push_back(static_cast<PointId>(prep.remap[p]));
    alg->start(trace.snapshots[initial_block - 1].tree, init_remapped);

    PhaseLog log;
    log.phase = phase;
    log.zeta = zeta;
    log.m_guess = m_guess;
    log.t_start = t_start;

    int cursor = initial_block;
    int t_end = total;
    std::vector<PointId> anchors_at_start;  // after replaying the pre-phase prefix
    for (int t = 1; t <= total; ++t) {
      int upto = prep.request_step[t - 1];
      for (; cursor < upto; ++cursor) alg->update_tree(trace.snapshots[cursor].tree);
      if (t == t_start) anchors_at_start = alg->anchors();
      auto [x, y] = inst.requests[t - 1];
      auto served = alg->serve(static_cast<PointId>(prep.remap[x]),
                               static_cast<PointId>(prep.remap[y]));
      double src = 0;
      for (const auto& [from, to] : served.anchor_moves)
        src += prep.restricted.dist(from, to);
      log.prefix_cost += src;
      if (t >= t_start) log.live_cost += src;
      if (static_cast<int>(opt_at.size()) <= t) {
        wf.serve(x, y);
        opt_at.push_back(wf.optimum());
      }
      if (t >= t_start) {
        double lg = std::log2(2.0 * t);
        double trigger = lg * lg * opt_at[t];
        if (zeta < trigger) {
          t_end = t;
          log.trigger_value = trigger;
          break;
        }
      }
    }
    log.t_end = t_end;
    log.opt_prefix = opt_at[std::min<std::size_t>(t_end, opt_at.size() - 1)];

    if (phase > 1) {
      // Moving to the new algorithm's mid-run configuration costs at most
      // one matching between the two anchor sets.
      std::vector<PointId> a = phys, b = anchors_at_start;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      double best = std::numeric_limits<double>::infinity();
      do {
        double c = 0;
        for (std::size_t i = 0; i < a.size(); ++i)
          c += prep.restricted.dist(a[i], b[i]);
        best = std::min(best, c);
      } while (std::next_permutation(b.begin(), b.end()));
      log.switch_cost = best;
      res.total_source_cost += best;
    }
    res.total_source_cost += log.live_cost;
    res.sum_prefix_costs += log.prefix_cost;
    phys = alg->anchors();
    res.phases.push_back(log);

    t_start = t_end + 1;
    if (t_start <= total) {
      zeta *= 2;
      m_guess = std::pow(2.0 * t_end, 2.0);
      ++phase;
    }
  }
  res.zeta_final = res.phases.back().zeta;
  embed_check(res.total_source_cost <= 2 * res.sum_prefix_costs * (1 + kRelTol) + 1e-9,
              "guess-and-double accounting exceeded twice the prefix costs");
  return res;
}

}  // namespace monotree
