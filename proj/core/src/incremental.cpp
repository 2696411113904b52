#include "monotree/incremental.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "monotree/component_scale.hpp"
#include "monotree/rng.hpp"

namespace monotree {

// ---- ComponentScale -----------------------------------------------------------

ComponentScale::ComponentScale(int level, const MetricSpace& metric,
                               ComponentScaleConfig cfg, MergeSink sink)
    : level_(level),
      s_(std::ldexp(1.0, level)),
      m_(metric),
      cfg_(std::move(cfg)),
      sink_(std::move(sink)),
      st_(level, std::ldexp(1.0, level)) {}

std::optional<int> ComponentScale::component_of_or_covering(PointId u) const {
  if (st_.has_assignment(u)) return st_.component_of(u);
  return st_.covering_component(m_, u);
}

bool ComponentScale::comp_cuts(int comp, PointId u, PointId w) const {
  const Component& c = st_.component(comp);
  return cuts(m_.dist(c.center, u), m_.dist(c.center, w), c.radius);
}

void ComponentScale::merge(int cu, int cw) {
  st_.merge_groups(cu, cw, [&](const std::vector<PointId>& a,
                               const std::vector<PointId>& b) {
    if (!sink_) return;
    std::vector<std::pair<PointId, PointId>> joined;
    joined.reserve(a.size() * b.size());
    for (PointId x : a)
      for (PointId y : b) joined.emplace_back(x, y);
    sink_(joined);
  });
}

void ComponentScale::arrival(PointId v, int arrival_ordinal) {
  ++arrivals_;
  int j_count = st_.live_component_count() + 1;
  double r = 0;
  if (cfg_.radius_override) {
    if (auto rr = cfg_.radius_override(v, arrival_ordinal)) r = *rr;
  }
  if (r == 0)
    r = sample_radius(cfg_.seed, level_, cfg_.rng_dim, v, arrival_ordinal, j_count, s_);
  st_.add_component(v, r, ++births_);
  st_.assign(m_, v);

  if (!std::binary_search(alive_.begin(), alive_.end(), v))
    alive_.insert(std::upper_bound(alive_.begin(), alive_.end(), v), v);
  bool first_time = std::find(seen_.begin(), seen_.end(), v) == seen_.end();

  if (cfg_.policy == ComponentScaleConfig::Policy::IncrementalDesignated) {
    if (first_time) {
      double eps_s = cfg_.epsilon(arrivals_) * s_;
      for (PointId u : seen_) {
        double d = m_.dist(u, v);
        if (d <= eps_s) close_.push_back({u, v, d});
      }
    }
    incremental_scan();
  } else {
    double trig = cfg_.trigger_ratio * s_;
    for (PointId u : alive_) {
      if (u == v) continue;
      if (m_.dist(u, v) <= trig) try_sum_rule_merge(u, v);
    }
  }
  if (first_time) seen_.push_back(v);
}

void ComponentScale::departure(PointId v) {
  alive_.erase(std::remove(alive_.begin(), alive_.end(), v), alive_.end());
  st_.prune_empty(v);
  if (cfg_.policy == ComponentScaleConfig::Policy::DynamicSumRule) dynamic_recheck();
}

void ComponentScale::incremental_scan() {
  // A merge can create new mergeable adjacencies through the designated
  // component, so iterate to a fixpoint.
  bool changed = true;
  while (changed) {
    changed = false;
    double eps_s = cfg_.epsilon(arrivals_) * s_;
    for (const ClosePair& cp : close_) {
      if (cp.d > eps_s) continue;  // epsilon may have shrunk since recording
      auto cu = component_of_or_covering(cp.u);
      auto cw = component_of_or_covering(cp.w);
      if (!cu || !cw || *cu == *cw) continue;
      if (st_.same_group(*cu, *cw)) continue;
      int ph = cfg_.phase(arrivals_);
      auto slot = designated_.find(ph);
      if (slot == designated_.end()) {
        int pick;
        bool uc = comp_cuts(*cu, cp.u, cp.w);
        bool wc = comp_cuts(*cw, cp.u, cp.w);
        if (uc)
          pick = *cu;
        else if (wc)
          pick = *cw;
        else {
          pick = *cu;  // neither cuts: an older ball absorbed both sides
          ++degenerate_;
        }
        designated_.emplace(ph, pick);
        merge(*cu, *cw);
        changed = true;
      } else if (slot->second == *cu || slot->second == *cw) {
        merge(*cu, *cw);
        changed = true;
      }
    }
  }
}

bool ComponentScale::try_sum_rule_merge(PointId u, PointId w) {
  int cu = st_.component_of(u);
  int cw = st_.component_of(w);
  if (st_.same_group(cu, cw)) return false;
  double cap = cfg_.safety_ratio * s_;
  for (int a : st_.group_components(cu))
    for (int b : st_.group_components(cw)) {
      const Component& ca = st_.component(a);
      const Component& cb = st_.component(b);
      if (ca.radius + cb.radius + m_.dist(ca.center, cb.center) > cap) return false;
    }
  merge(cu, cw);
  return true;
}

void ComponentScale::dynamic_recheck() {
  double trig = cfg_.trigger_ratio * s_;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < alive_.size(); ++i)
      for (std::size_t j = i + 1; j < alive_.size(); ++j) {
        if (m_.dist(alive_[i], alive_[j]) > trig) continue;
        if (try_sum_rule_merge(alive_[i], alive_[j])) changed = true;
      }
  }
}

bool ComponentScale::same_cluster(PointId u, PointId v) const {
  return st_.same_group(st_.component_of(u), st_.component_of(v));
}

void ComponentScale::clusters_of(std::span<const PointId> alive,
                                 PartitionLevel& out) const {
  std::map<int, std::vector<PointId>> by_group;
  for (PointId p : alive) by_group[st_.cluster_of(p)].push_back(p);
  out.clusters.clear();
  for (auto& [_, pts] : by_group) out.clusters.push_back(std::move(pts));
}

std::string ComponentScale::dump_json() const {
  nlohmann::json j = nlohmann::json::parse(st_.dump_json());
  nlohmann::json des = nlohmann::json::object();
  for (const auto& [ph, c] : designated_) des[std::to_string(ph)] = c;
  j["designated"] = des;
  j["degenerate_designations"] = degenerate_;
  return j.dump();
}

std::optional<int> ComponentScale::designated(int phase) const {
  auto it = designated_.find(phase);
  if (it == designated_.end()) return std::nullopt;
  return it->second;
}

// ---- embedder entry points -----------------------------------------------------

double default_incremental_epsilon(int n) {
  if (n <= 1) return 1.0;
  return std::min(1.0, std::pow(static_cast<double>(n), -6.0));
}

int phase_of(int arrivals) {
  int t = std::max(arrivals, 2);
  double ll = std::log2(std::max(1.0, std::log2(static_cast<double>(t))));
  int i = static_cast<int>(std::ceil(ll));
  while (std::ldexp(1.0, 1 << std::max(i, 1)) /*2^(2^i)*/ <
         static_cast<double>(t))
    ++i;
  return std::max(i, 1);
}

double phase_guess(int phase) { return std::ldexp(1.0, 1 << phase); }

double phase_epsilon(int phase) { return std::ldexp(1.0, -6 * (1 << phase)); }

namespace {

int count_arrivals(const UpdateSequence& seq) {
  int a = 0;
  for (const auto& e : seq.events())
    if (e.op == Op::Arrive) ++a;
  return a;
}

std::string incremental_config_json(const IncrementalConfig& cfg, double eps,
                                    bool known) {
  nlohmann::json j;
  j["variant"] = known ? "known-n" : "unknown-n";
  if (cfg.n_known) j["n"] = *cfg.n_known;
  if (known) j["epsilon"] = eps;
  j["seed"] = cfg.seed;
  return j.dump();
}

}  // namespace

EmbedRunner known_n_runner(IncrementalConfig cfg) {
  return [cfg](const UpdateSequence& seq, const MetricSpace& metric,
               std::uint64_t seed, const StepSink& sink) {
    int arr = count_arrivals(seq);
    int n = cfg.n_known.value_or(arr);
    if (arr > n)
      throw SequenceError("sequence has " + std::to_string(arr) +
                          " arrivals, beyond the declared budget n=" + std::to_string(n));
    double eps = cfg.epsilon.value_or(default_incremental_epsilon(n));
    EmbedderSpec spec;
    spec.name = "incremental";
    spec.window_eps = [eps](int) { return eps; };
    spec.top_factor = 32.0;
    spec.diameter_bound = [eps](double s, int) { return 0.75 * s + 2 * eps * s; };
    spec.make_scale = [&metric, eps, seed](int level, MergeSink ms) {
      ComponentScaleConfig c;
      c.policy = ComponentScaleConfig::Policy::IncrementalDesignated;
      c.seed = seed;
      c.epsilon = [eps](int) { return eps; };
      c.phase = [](int) { return 0; };
      return std::make_unique<ComponentScale>(level, metric, std::move(c), std::move(ms));
    };
    MultiScaleEmbedder e(seq, metric, std::move(spec), seed, cfg.checks);
    e.run(sink);
  };
}

EmbeddingTrace embed_known_n(const UpdateSequence& seq, const MetricSpace& metric,
                             const IncrementalConfig& cfg, bool with_trees) {
  double eps = cfg.epsilon.value_or(
      default_incremental_epsilon(cfg.n_known.value_or(count_arrivals(seq))));
  return collect_trace(known_n_runner(cfg), seq, metric, cfg.seed, with_trees,
                       "incremental", incremental_config_json(cfg, eps, true));
}

EmbedRunner unknown_n_runner(IncrementalConfig cfg) {
  return [cfg](const UpdateSequence& seq, const MetricSpace& metric,
               std::uint64_t seed, const StepSink& sink) {
    auto eps_at = [](int arrivals) { return phase_epsilon(phase_of(arrivals)); };
    auto alpha_at = [](int arrivals) {
      double t = std::max(arrivals, 2);
      double ll = std::log2(std::max(1.0, std::log2(t)));
      return std::max(1.0, 2.0 * std::ceil(ll - 1e-12));
    };
    EmbedderSpec spec;
    spec.name = "incremental-unknown-n";
    spec.window_eps = eps_at;
    spec.top_factor = 32.0;
    spec.alpha = alpha_at;
    spec.diameter_bound = [alpha_at](double s, int arrivals) {
      return alpha_at(arrivals) * s;
    };
    spec.make_scale = [&metric, eps_at, seed](int level, MergeSink ms) {
      ComponentScaleConfig c;
      c.policy = ComponentScaleConfig::Policy::IncrementalDesignated;
      c.seed = seed;
      c.epsilon = eps_at;
      c.phase = [](int arrivals) { return phase_of(arrivals); };
      return std::make_unique<ComponentScale>(level, metric, std::move(c), std::move(ms));
    };
    MultiScaleEmbedder e(seq, metric, std::move(spec), seed, cfg.checks);
    e.run(sink);
  };
}

EmbeddingTrace embed_unknown_n(const UpdateSequence& seq, const MetricSpace& metric,
                               const IncrementalConfig& cfg, bool with_trees) {
  return collect_trace(unknown_n_runner(cfg), seq, metric, cfg.seed, with_trees,
                       "incremental-unknown-n",
                       incremental_config_json(cfg, 0, false));
}

}  // namespace monotree
