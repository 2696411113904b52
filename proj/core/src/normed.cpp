#include "monotree/normed.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "monotree/components.hpp"
#include "monotree/rng.hpp"

namespace monotree {

double line_cut_point(std::uint64_t seed, int level, int dim, std::int64_t k,
                      double interval_len) {
  double u = keyed_uniform(seed, {0x4c494e45ull, static_cast<std::uint64_t>(level + (1 << 20)),
                                  static_cast<std::uint64_t>(dim),
                                  static_cast<std::uint64_t>(k)});
  return static_cast<double>(k) * interval_len + (interval_len / 2) * u;
}

double default_line_epsilon(int n) {
  if (n <= 1) return 1.0;
  return std::min(1.0, std::pow(static_cast<double>(n), -3.0));
}

namespace {

struct LineParams {
  LineMode mode = LineMode::Incremental;
  double eps_ratio = 0;        // incremental merge threshold, ratio of s
  double trigger_ratio = 1.0 / 6;
  double safety_ratio = 1.0;
  std::uint64_t seed = 1;
  int dim = 0;
};

class LineScale : public ScaleOps {
 public:
  LineScale(int level, const MetricSpace& m, LineParams p, MergeSink sink)
      : level_(level),
        s_(std::ldexp(1.0, level)),
        m_(m),
        p_(p),
        sink_(std::move(sink)) {
    r_ = (p_.mode == LineMode::Incremental) ? s_ / 3 : s_ / 6;
  }

  void arrival(PointId v, int) override {
    int id = ensure_interval(x(v));
    bool had = assign_.count(v) != 0;
    assign_[v] = id;
    if (!std::binary_search(alive_.begin(), alive_.end(), v))
      alive_.insert(std::upper_bound(alive_.begin(), alive_.end(), v), v);
    ++ivs_[id].members;
    if (p_.mode == LineMode::Incremental) {
      double lim = p_.eps_ratio * s_;
      for (PointId u : seen_)
        if (u != v && std::abs(x(u) - x(v)) <= lim) attempt_once_merge(u, v);
      if (!had && std::find(seen_.begin(), seen_.end(), v) == seen_.end())
        seen_.push_back(v);
    } else {
      double lim = p_.trigger_ratio * s_;
      for (PointId u : alive_)
        if (u != v && std::abs(x(u) - x(v)) <= lim) attempt_span_merge(u, v);
    }
  }

  void departure(PointId v) override {
    alive_.erase(std::remove(alive_.begin(), alive_.end(), v), alive_.end());
    if (p_.mode == LineMode::Incremental) return;  // intervals persist
    auto it = assign_.find(v);
    if (it == assign_.end()) return;
    Interval& iv = ivs_[it->second];
    assign_.erase(it);
    if (--iv.members == 0) {
      iv.dead = true;  // a later occupant gets a fresh singleton interval
      live_idx_.erase(iv.k);
    }
    recheck();
  }

  bool same_cluster(PointId u, PointId v) const override {
    return groups_.find(assign_.at(u)) == groups_.find(assign_.at(v));
  }
  int cluster_key(PointId u) const { return groups_.find(assign_.at(u)); }
  bool has_point(PointId u) const { return assign_.count(u) != 0; }

  void clusters_of(std::span<const PointId> alive, PartitionLevel& out) const override {
    std::map<int, std::vector<PointId>> by_group;
    for (PointId p : alive) by_group[cluster_key(p)].push_back(p);
    out.clusters.clear();
    for (auto& [_, pts] : by_group) out.clusters.push_back(std::move(pts));
  }

  std::string dump_json() const override {
    nlohmann::json j;
    j["level"] = level_;
    j["interval_len"] = r_;
    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < ivs_.size(); ++i)
      arr.push_back({{"k", ivs_[i].k},
                     {"lo", ivs_[i].lo},
                     {"hi", ivs_[i].hi},
                     {"members", ivs_[i].members},
                     {"dead", ivs_[i].dead},
                     {"group", groups_.find(static_cast<int>(i))},
                     {"merged_once", static_cast<bool>(used_[groups_.find(static_cast<int>(i))])}});
    j["intervals"] = arr;
    return j.dump();
  }

 private:
  struct Interval {
    std::int64_t k = 0;
    double lo = 0, hi = 0;
    int members = 0;
    bool dead = false;
  };

  double x(PointId u) const { return m_.coord(u, p_.dim); }
  double cut(std::int64_t k) const {
    return line_cut_point(p_.seed, level_, p_.dim, k, r_);
  }

  std::int64_t interval_k(double xv) const {
    auto k = static_cast<std::int64_t>(std::floor(xv / r_));
    while (xv < static_cast<double>(k) * r_) --k;
    while (xv >= static_cast<double>(k + 1) * r_) ++k;
    return xv >= cut(k) ? k : k - 1;  // [z_k, z_{k+1}) is half-open
  }

  int ensure_interval(double xv) {
    std::int64_t k = interval_k(xv);
    auto it = live_idx_.find(k);
    if (it != live_idx_.end()) return it->second;
    int id = static_cast<int>(ivs_.size());
    ivs_.push_back({k, cut(k), cut(k + 1), 0, false});
    groups_.add();
    used_.push_back(0);
    live_idx_[k] = id;
    return id;
  }

  std::vector<PointId> group_alive(int root) const {
    std::vector<PointId> out;
    for (PointId p : alive_)
      if (groups_.find(assign_.at(p)) == root) out.push_back(p);
    return out;
  }

  void fire(int ra, int rb) {
    if (!sink_) return;
    auto a = group_alive(ra), b = group_alive(rb);
    std::vector<std::pair<PointId, PointId>> joined;
    joined.reserve(a.size() * b.size());
    for (PointId p : a)
      for (PointId q : b) joined.emplace_back(p, q);
    sink_(joined);
  }

  void attempt_once_merge(PointId u, PointId v) {
    int ru = groups_.find(assign_.at(u));
    int rv = groups_.find(assign_.at(v));
    if (ru == rv) return;
    if (used_[ru] || used_[rv]) return;  // each cluster merges at most once
    fire(ru, rv);
    groups_.unite(ru, rv);
    used_[groups_.find(ru)] = 1;
  }

  void attempt_span_merge(PointId u, PointId v) {
    int ru = groups_.find(assign_.at(u));
    int rv = groups_.find(assign_.at(v));
    if (ru == rv) return;
    // Merged interval hulls may never span more than safety*s, counting
    // every live interval of both groups.
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < ivs_.size(); ++i) {
      if (ivs_[i].dead) continue;
      int r = groups_.find(static_cast<int>(i));
      if (r != ru && r != rv) continue;
      lo = std::min(lo, ivs_[i].lo);
      hi = std::max(hi, ivs_[i].hi);
    }
    if (hi - lo > p_.safety_ratio * s_) return;
    fire(ru, rv);
    groups_.unite(ru, rv);
  }

  void recheck() {
    double lim = p_.trigger_ratio * s_;
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < alive_.size(); ++i)
        for (std::size_t j = i + 1; j < alive_.size(); ++j) {
          PointId u = alive_[i], w = alive_[j];
          if (std::abs(x(u) - x(w)) > lim) continue;
          int ru = groups_.find(assign_.at(u));
          int rw = groups_.find(assign_.at(w));
          if (ru == rw) continue;
          attempt_span_merge(u, w);
          if (groups_.find(assign_.at(u)) == groups_.find(assign_.at(w))) changed = true;
        }
    }
  }

  int level_;
  double s_;
  double r_;
  const MetricSpace& m_;
  LineParams p_;
  MergeSink sink_;
  std::vector<Interval> ivs_;
  Dsu groups_;
  std::vector<char> used_;
  std::map<std::int64_t, int> live_idx_;
  std::unordered_map<PointId, int> assign_;
  std::vector<PointId> alive_;
  std::vector<PointId> seen_;
};

// Refinement of D independent per-dimension line partitions.
class LinfScale : public ScaleOps {
 public:
  LinfScale(int level, const MetricSpace& m, LineParams base, MergeSink sink)
      : sink_(std::move(sink)) {
    for (int d = 0; d < m.dim(); ++d) {
      LineParams p = base;
      p.dim = d;
      subs_.push_back(std::make_unique<LineScale>(
          level, m, p, [this](const std::vector<std::pair<PointId, PointId>>& pairs) {
            on_dim_merge(pairs);
          }));
    }
  }

  void arrival(PointId v, int ord) override {
    for (auto& s : subs_) s->arrival(v, ord);
  }
  void departure(PointId v) override {
    for (auto& s : subs_) s->departure(v);
  }

  bool same_cluster(PointId u, PointId v) const override {
    for (const auto& s : subs_)
      if (!s->same_cluster(u, v)) return false;
    return true;
  }

  void clusters_of(std::span<const PointId> alive, PartitionLevel& out) const override {
    std::map<std::vector<int>, std::vector<PointId>> by_key;
    for (PointId p : alive) {
      std::vector<int> key;
      key.reserve(subs_.size());
      for (const auto& s : subs_) key.push_back(s->cluster_key(p));
      by_key[key].push_back(p);
    }
    out.clusters.clear();
    for (auto& [_, pts] : by_key) out.clusters.push_back(std::move(pts));
  }

  std::string dump_json() const override {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : subs_) j.push_back(nlohmann::json::parse(s->dump_json()));
    return j.dump();
  }

 private:
  void on_dim_merge(const std::vector<std::pair<PointId, PointId>>& pairs) {
    if (!sink_) return;
    std::vector<std::pair<PointId, PointId>> joined;
    for (auto [a, b] : pairs) {
      bool all = true;
      for (const auto& s : subs_)
        if (!s->has_point(a) || !s->has_point(b) || !s->same_cluster(a, b)) {
          all = false;
          break;
        }
      if (all) joined.emplace_back(a, b);
    }
    if (!joined.empty()) sink_(joined);
  }

  std::vector<std::unique_ptr<LineScale>> subs_;
  MergeSink sink_;
};

int count_arrivals(const UpdateSequence& seq) {
  int a = 0;
  for (const auto& e : seq.events())
    if (e.op == Op::Arrive) ++a;
  return a;
}

std::string line_config_json(const LineConfig& cfg, double eps) {
  nlohmann::json j;
  j["mode"] = cfg.mode == LineMode::Incremental ? "incremental" : "dynamic";
  if (cfg.mode == LineMode::Incremental) j["epsilon"] = eps;
  j["seed"] = cfg.seed;
  return j.dump();
}

}  // namespace

EmbedRunner line_runner(LineConfig cfg) {
  return [cfg](const UpdateSequence& seq, const MetricSpace& metric,
               std::uint64_t seed, const StepSink& sink) {
    if (metric.kind() != MetricKind::Line)
      throw MetricError("line embedder requires a line metric");
    bool inc = cfg.mode == LineMode::Incremental;
    int n = cfg.n_known.value_or(count_arrivals(seq));
    double eps = inc ? cfg.epsilon.value_or(default_line_epsilon(n)) : 1.0;
    EmbedderSpec spec;
    spec.name = inc ? "line" : "line-dynamic";
    spec.window_eps = [eps](int) { return eps; };
    spec.top_factor = inc ? std::max(32.0, 4.0 / eps) : 32.0;
    spec.make_scale = [&metric, cfg, eps, seed](int level, MergeSink ms) {
      LineParams p;
      p.mode = cfg.mode;
      p.eps_ratio = eps;
      p.seed = seed;
      return std::make_unique<LineScale>(level, metric, p, std::move(ms));
    };
    MultiScaleEmbedder e(seq, metric, std::move(spec), seed, cfg.checks);
    e.run(sink);
  };
}

EmbeddingTrace embed_line(const UpdateSequence& seq, const MetricSpace& metric,
                          const LineConfig& cfg, bool with_trees) {
  double eps = 1.0;
  if (cfg.mode == LineMode::Incremental) {
    int a = 0;
    for (const auto& e : seq.events())
      if (e.op == Op::Arrive) ++a;
    eps = cfg.epsilon.value_or(default_line_epsilon(cfg.n_known.value_or(a)));
  }
  return collect_trace(line_runner(cfg), seq, metric, cfg.seed, with_trees,
                       cfg.mode == LineMode::Incremental ? "line" : "line-dynamic",
                       line_config_json(cfg, eps));
}

EmbedRunner linf_runner(LineConfig cfg) {
  return [cfg](const UpdateSequence& seq, const MetricSpace& metric,
               std::uint64_t seed, const StepSink& sink) {
    if (metric.kind() != MetricKind::Lp)
      throw MetricError("linf embedder requires lp coordinates");
    bool inc = cfg.mode == LineMode::Incremental;
    int n = cfg.n_known.value_or(count_arrivals(seq));
    int D = metric.dim();
    double eps = inc ? cfg.epsilon.value_or(default_line_epsilon(n) / D) : 1.0;
    double cfactor = 1.0;
    if (metric.lp_p() == 1) cfactor = D;
    if (metric.lp_p() == 2) cfactor = std::sqrt(static_cast<double>(D));
    EmbedderSpec spec;
    spec.name = inc ? "linf" : "linf-dynamic";
    spec.cfactor = cfactor;
    spec.window_eps = [eps, cfactor](int) { return eps / cfactor; };
    spec.top_factor = inc ? std::max(32.0, 4.0 / eps) : 32.0;
    spec.diameter_bound = [cfactor](double s, int) { return cfactor * s; };
    spec.make_scale = [&metric, cfg, eps, seed](int level, MergeSink ms) {
      LineParams p;
      p.mode = cfg.mode;
      p.eps_ratio = eps;
      p.seed = seed;
      return std::make_unique<LinfScale>(level, metric, p, std::move(ms));
    };
    MultiScaleEmbedder e(seq, metric, std::move(spec), seed, cfg.checks);
    e.run(sink);
  };
}

EmbeddingTrace embed_linf(const UpdateSequence& seq, const MetricSpace& metric,
                          const LineConfig& cfg, bool with_trees) {
  return collect_trace(linf_runner(cfg), seq, metric, cfg.seed, with_trees,
                       cfg.mode == LineMode::Incremental ? "linf" : "linf-dynamic",
                       line_config_json(cfg, cfg.epsilon.value_or(0)));
}

}  // namespace monotree
