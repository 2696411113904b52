#include "monotree/embed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

namespace monotree {

namespace {

constexpr double kRelTol = 1e-9;

int floor_log2(double x) {
  int e;
  std::frexp(x, &e);
  return e - 1;
}
int ceil_log2(double x) {
  int f = floor_log2(x);
  return std::ldexp(1.0, f) == x ? f : f + 1;
}

// Split levels of one pair, at most 128 materialized scales per run.
struct Mask {
  std::uint64_t w0 = 0, w1 = 0;
  bool any() const { return (w0 | w1) != 0; }
  void set(int i) { (i < 64 ? w0 : w1) |= 1ull << (i & 63); }
  void clear(int i) { (i < 64 ? w0 : w1) &= ~(1ull << (i & 63)); }
  bool test(int i) const { return (((i < 64) ? w0 : w1) >> (i & 63)) & 1; }
  int highest() const {
    if (w1) return 127 - std::countl_zero(w1);
    if (w0) return 63 - std::countl_zero(w0);
    return -1;
  }
  void shift_left(int k) {
    if (k <= 0) return;
    if (k >= 64) {
      w1 = (k >= 128) ? 0 : (w0 << (k - 64));
      w0 = 0;
    } else {
      w1 = (w1 << k) | (w0 >> (64 - k));
      w0 <<= k;
    }
  }
};

}  // namespace

struct MultiScaleEmbedder::Impl {
  const UpdateSequence& seq;
  const MetricSpace& metric;
  EmbedderSpec spec;
  std::uint64_t seed;
  CheckLevel checks;

  int capacity = 0;  // dense point id bound
  std::vector<Mask> mask;
  std::vector<double> dval;
  std::vector<char> has_col;

  std::map<int, std::unique_ptr<ScaleOps>> levels;
  bool window = false;
  int jlo = 0, jhi = -1;
  double dmin = std::numeric_limits<double>::infinity();
  double dmax = 0;
  int seen = 0;      // distinct points arrived so far (dense ids)
  int arrivals = 0;  // arrival events processed (phase / allowance clock)
  std::vector<std::pair<UpdateEvent, int>> log;  // processed events + ordinals
  bool replaying = false;

  // current step context for the view
  int cur_step = 0;
  const UpdateEvent* cur_event = nullptr;
  std::span<const PointId> alive;
  mutable std::optional<Hst> tree_cache;

  Impl(const UpdateSequence& s, const MetricSpace& m, EmbedderSpec sp,
       std::uint64_t sd, CheckLevel ck)
      : seq(s), metric(m), spec(std::move(sp)), seed(sd), checks(ck) {
    capacity = seq.point_count();
    std::size_t pairs = static_cast<std::size_t>(capacity) * (capacity - 1) / 2;
    mask.resize(pairs);
    dval.resize(pairs, 0.0);
    has_col.resize(capacity, 0);
    log.reserve(seq.length());
  }

  std::size_t pidx(PointId u, PointId v) const {
    if (u > v) std::swap(u, v);
    return static_cast<std::size_t>(v) * (v - 1) / 2 + u;
  }

  double target_scale(int level) const {
    return spec.cfactor * std::ldexp(1.0, level);
  }
  double dist_from_mask(const Mask& m) const {
    return m.any() ? target_scale(jlo + m.highest() + 1) : target_scale(jlo);
  }
  double alpha_now() const { return spec.alpha(arrivals); }

  void check_contraction(PointId a, PointId b, double d) const {
    double need = metric.dist(a, b) / alpha_now();
    embed_check(d >= need * (1 - kRelTol),
                "target distance fell below the contraction allowance");
  }

  MergeSink sink_for(int level) {
    return [this, level](const std::vector<std::pair<PointId, PointId>>& pairs) {
      if (replaying) return;
      int bit = level - jlo;
      for (auto [a, b] : pairs) {
        if (a == b || !has_col[a] || !has_col[b]) continue;
        std::size_t i = pidx(a, b);
        if (!mask[i].test(bit)) continue;
        mask[i].clear(bit);
        double nd = dist_from_mask(mask[i]);
        embed_check(nd <= dval[i] * (1 + kRelTol),
                    "merge update increased a target distance");
        check_contraction(a, b, nd);
        dval[i] = nd;
      }
    };
  }

  void create_level(int level) {
    auto ops = spec.make_scale(level, sink_for(level));
    replaying = true;
    for (const auto& [e, ord] : log) {
      if (e.op == Op::Arrive)
        ops->arrival(e.point, ord);
      else
        ops->departure(e.point);
    }
    replaying = false;
    levels.emplace(level, std::move(ops));
  }

  void extend_window(std::span<const PointId> alive_before) {
    if (seen < 2 || !(dmin < std::numeric_limits<double>::infinity())) return;
    double eps = spec.window_eps(arrivals);
    int lo = ceil_log2(eps * dmin / 2);
    int hi = floor_log2(spec.top_factor * dmax);
    if (hi < lo) hi = lo;
    if (window) {
      lo = std::min(lo, jlo);
      hi = std::max(hi, jhi);
    }
    embed_check(hi - lo < 128, "scale window exceeds 128 levels (desk-scale cap)");

    if (!window) {
      for (int l = lo; l <= hi; ++l) create_level(l);
      jlo = lo;
      jhi = hi;
      window = true;
      return;
    }
    if (lo < jlo) {
      int delta = jlo - lo;
      for (auto& m : mask) m.shift_left(delta);
      int old_lo = jlo;
      jlo = lo;
      for (int l = old_lo - 1; l >= lo; --l) create_level(l);
      // Freshly materialized low scales may reveal splits for existing
      // pairs; distances can only decrease here.
      for (std::size_t i = 0; i < alive_before.size(); ++i)
        for (std::size_t j = i + 1; j < alive_before.size(); ++j) {
          PointId a = alive_before[i], b = alive_before[j];
          if (!has_col[a] || !has_col[b]) continue;
          std::size_t pi = pidx(a, b);
          for (int l = lo; l < old_lo; ++l)
            if (!levels.at(l)->same_cluster(a, b)) mask[pi].set(l - jlo);
          double nd = dist_from_mask(mask[pi]);
          embed_check(nd <= dval[pi] * (1 + kRelTol),
                      "window growth increased a target distance");
          dval[pi] = nd;
        }
    }
    if (hi > jhi) {
      int old_hi = jhi;
      for (int l = old_hi + 1; l <= hi; ++l) create_level(l);
      jhi = hi;
      if (checks == CheckLevel::Full) {
        for (std::size_t i = 0; i < alive_before.size(); ++i)
          for (std::size_t j = i + 1; j < alive_before.size(); ++j)
            for (int l = old_hi + 1; l <= hi; ++l)
              embed_check(levels.at(l)->same_cluster(alive_before[i], alive_before[j]),
                          "new top scale is not a single cluster");
      }
    }
  }

  void build_column(PointId v, std::span<const PointId> alive_now) {
    for (PointId u : alive_now) {
      if (u == v) continue;
      double src = metric.dist(u, v);
      if (src <= 0)
        throw MetricError("embedders require pairwise distinct points (ids " +
                          std::to_string(u) + ", " + std::to_string(v) + ")");
      std::size_t i = pidx(u, v);
      mask[i] = Mask{};
      for (const auto& [l, ops] : levels)
        if (!ops->same_cluster(u, v)) mask[i].set(l - jlo);
      embed_check(!mask[i].test(jhi - jlo),
                  "pair split at the window top; top_factor policy broken");
      double d = dist_from_mask(mask[i]);
      check_contraction(u, v, d);
      dval[i] = d;
    }
    has_col[v] = 1;
  }

  void full_checks() {
    if (checks != CheckLevel::Full || !window || alive.empty()) return;
    double diam_tol = 1 + kRelTol;
    for (const auto& [l, ops] : levels) {
      PartitionLevel part;
      ops->clusters_of(alive, part);
      double bound = spec.diameter_bound(std::ldexp(1.0, l), arrivals);
      for (const auto& c : part.clusters)
        for (std::size_t i = 0; i < c.size(); ++i)
          for (std::size_t j = i + 1; j < c.size(); ++j)
            embed_check(metric.dist(c[i], c[j]) <= bound * diam_tol,
                        "cluster diameter bound violated at level " + std::to_string(l));
      if (l == jlo)
        for (const auto& c : part.clusters)
          embed_check(c.size() == 1, "bottom scale is not all singletons");
      if (l == jhi)
        embed_check(part.clusters.size() <= 1, "top scale is not a single cluster");
    }
  }

  const Hst& tree() const {
    if (tree_cache) return *tree_cache;
    Hst t;
    if (alive.empty()) {
      tree_cache = std::move(t);
      return *tree_cache;
    }
    if (!window || alive.size() == 1) {
      embed_check(alive.size() == 1, "multiple alive points without a scale window");
      int n = t.add_node(0.0, -1);
      t.map_leaf(alive[0], n);
      tree_cache = std::move(t);
      return *tree_cache;
    }
    std::vector<PartitionLevel> lv;
    lv.reserve(levels.size());
    for (const auto& [l, ops] : levels) {
      PartitionLevel part;
      part.scale = target_scale(l);
      ops->clusters_of(alive, part);
      lv.push_back(std::move(part));
    }
    tree_cache = induced_hst(refine(PartitionStack(std::move(lv))));
    return *tree_cache;
  }

  void run(const StepSink& sink) {
    const auto& events = seq.events();
    for (int t = 0; t < static_cast<int>(events.size()); ++t) {
      const UpdateEvent& e = events[t];
      std::span<const PointId> alive_before = seq.alive_after(t);
      if (e.op == Op::Arrive) {
        PointId v = e.point;
        if (v >= seen) {
          for (PointId u = 0; u < seen; ++u) {
            double d = metric.dist(u, v);
            dmax = std::max(dmax, d);
            if (d > 0) dmin = std::min(dmin, d);
          }
          seen = v + 1;
        }
        ++arrivals;
        extend_window(alive_before);
        has_col[v] = 0;
        int ord = seq.arrival_ordinal(t);
        for (auto& [l, ops] : levels) ops->arrival(v, ord);
        log.push_back({e, ord});
        build_column(v, seq.alive_after(t + 1));
      } else {
        has_col[e.point] = 0;
        for (auto& [l, ops] : levels) ops->departure(e.point);
        log.push_back({e, 0});
      }
      cur_step = t + 1;
      cur_event = &e;
      alive = seq.alive_after(t + 1);
      tree_cache.reset();
      full_checks();
      if (sink) {
        TargetView view(owner);
        sink(view);
      }
    }
  }

  MultiScaleEmbedder* owner = nullptr;
};

MultiScaleEmbedder::MultiScaleEmbedder(const UpdateSequence& seq,
                                       const MetricSpace& metric, EmbedderSpec spec,
                                       std::uint64_t seed, CheckLevel checks)
    : impl_(std::make_unique<Impl>(seq, metric, std::move(spec), seed, checks)) {
  impl_->owner = this;
}

MultiScaleEmbedder::~MultiScaleEmbedder() = default;

void MultiScaleEmbedder::run(const StepSink& sink) { impl_->run(sink); }

std::vector<std::pair<int, std::string>> MultiScaleEmbedder::dump_scales() const {
  std::vector<std::pair<int, std::string>> out;
  for (const auto& [l, ops] : impl_->levels) out.emplace_back(l, ops->dump_json());
  return out;
}

// ---- TargetView ---------------------------------------------------------------

int TargetView::step() const { return e_->impl_->cur_step; }
const UpdateEvent& TargetView::event() const { return *e_->impl_->cur_event; }
std::span<const PointId> TargetView::alive() const { return e_->impl_->alive; }

double TargetView::dist(PointId u, PointId v) const {
  if (u == v) return 0;
  auto& im = *e_->impl_;
  embed_check(im.has_col[u] && im.has_col[v], "distance queried for a dead pair");
  return im.dval[im.pidx(u, v)];
}

double TargetView::source_dist(PointId u, PointId v) const {
  return e_->impl_->metric.dist(u, v);
}

double TargetView::alpha() const { return e_->impl_->alpha_now(); }

const Hst& TargetView::tree() const { return e_->impl_->tree(); }

std::vector<std::pair<int, int>> TargetView::scale_cluster_counts() const {
  auto& im = *e_->impl_;
  std::vector<std::pair<int, int>> out;
  for (const auto& [l, ops] : im.levels) {
    PartitionLevel part;
    ops->clusters_of(im.alive, part);
    out.emplace_back(l, static_cast<int>(part.clusters.size()));
  }
  return out;
}

int TargetView::window_lo() const { return e_->impl_->window ? e_->impl_->jlo : 0; }
int TargetView::window_hi() const { return e_->impl_->window ? e_->impl_->jhi : -1; }

// ---- traces ---------------------------------------------------------------------

double TraceSnapshot::dist_at(PointId u, PointId v) const {
  auto iu = std::lower_bound(alive.begin(), alive.end(), u);
  auto iv = std::lower_bound(alive.begin(), alive.end(), v);
  if (iu == alive.end() || *iu != u || iv == alive.end() || *iv != v)
    throw SequenceError("snapshot does not contain the queried pair");
  std::size_t a = iu - alive.begin(), b = iv - alive.begin();
  return dists[a * alive.size() + b];
}

bool TraceSnapshot::has(PointId u) const {
  auto it = std::lower_bound(alive.begin(), alive.end(), u);
  return it != alive.end() && *it == u;
}

EmbeddingTrace collect_trace(const EmbedRunner& runner, const UpdateSequence& seq,
                             const MetricSpace& metric, std::uint64_t seed,
                             bool with_trees, const std::string& name,
                             const std::string& config_json) {
  EmbeddingTrace trace;
  trace.embedder = name;
  trace.seed = seed;
  trace.config_json = config_json;
  runner(seq, metric, seed, [&](const TargetView& v) {
    TraceSnapshot snap;
    snap.step = v.step();
    snap.event = v.event();
    snap.alive.assign(v.alive().begin(), v.alive().end());
    snap.alpha = v.alpha();
    std::size_t n = snap.alive.size();
    snap.dists.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double d = v.dist(snap.alive[i], snap.alive[j]);
        snap.dists[i * n + j] = snap.dists[j * n + i] = d;
      }
    if (with_trees) snap.tree = std::make_shared<Hst>(v.tree());
    trace.snapshots.push_back(std::move(snap));
  });
  return trace;
}

}  // namespace monotree
