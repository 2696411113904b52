#include "monotree/deterministic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

#include "monotree/components.hpp"

namespace monotree {

namespace {

constexpr double kRelTol = 1e-9;

struct WeightedPair {
  double w;
  PointId u, v;  // u < v
  bool operator<(const WeightedPair& o) const {
    return std::tie(w, u, v) < std::tie(o.w, o.u, o.v);
  }
};

// Builds the tree for a sequence of set unions: processing pairs in
// ascending weight order, each union of two distinct trees creates a root
// with the given weight. With `kruskal_weights` the root weight is
// phi(r_u) + phi(r_v) + w instead of w (single-linkage otherwise).
Hst union_tree(std::span<const PointId> points, std::vector<WeightedPair> pairs,
               bool kruskal_weights) {
  struct Node {
    double phi;
    int parent = -1;
    PointId leaf = -1;
  };
  std::vector<Node> nodes;
  Dsu sets;
  std::map<PointId, int> set_of;  // point -> dsu element
  std::map<int, int> tree_root;   // dsu root -> node index
  for (PointId p : points) {
    int e = sets.add();
    set_of[p] = e;
    nodes.push_back({0.0, -1, p});
    tree_root[e] = static_cast<int>(nodes.size()) - 1;
  }
  std::sort(pairs.begin(), pairs.end());
  for (const auto& wp : pairs) {
    int a = sets.find(set_of.at(wp.u));
    int b = sets.find(set_of.at(wp.v));
    if (a == b) continue;
    int ra = tree_root.at(a), rb = tree_root.at(b);
    double phi = kruskal_weights ? nodes[ra].phi + nodes[rb].phi + wp.w : wp.w;
    nodes.push_back({phi, -1, -1});
    int nr = static_cast<int>(nodes.size()) - 1;
    nodes[ra].parent = nr;
    nodes[rb].parent = nr;
    sets.unite(a, b);
    tree_root.erase(a);
    tree_root.erase(b);
    tree_root[sets.find(a)] = nr;
  }
  if (tree_root.size() != 1 && points.size() > 1)
    throw HstError("union tree did not connect all points");

  // Emit parents before children.
  Hst t;
  std::vector<std::vector<int>> children(nodes.size());
  int root = -1;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    if (nodes[i].parent == -1)
      root = i;
    else
      children[nodes[i].parent].push_back(i);
  }
  std::vector<int> emitted(nodes.size(), -1);
  std::vector<int> stack{root};
  while (!stack.empty()) {
    int i = stack.back();
    stack.pop_back();
    int parent = nodes[i].parent == -1 ? -1 : emitted[nodes[i].parent];
    emitted[i] = t.add_node(nodes[i].phi, parent);
    if (nodes[i].leaf != -1) t.map_leaf(nodes[i].leaf, emitted[i]);
    for (int c : children[i]) stack.push_back(c);
  }
  return t;
}

std::vector<WeightedPair> all_pairs(const MetricSpace& m,
                                    std::span<const PointId> pts,
                                    const std::function<double(PointId, PointId)>& w) {
  std::vector<WeightedPair> out;
  out.reserve(pts.size() * (pts.size() - 1) / 2);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      PointId a = std::min(pts[i], pts[j]), b = std::max(pts[i], pts[j]);
      out.push_back({w(a, b), a, b});
    }
  (void)m;
  return out;
}

}  // namespace

Hst offline_kruskal(const MetricSpace& metric, std::span<const PointId> points) {
  if (points.empty()) throw MetricError("offline_kruskal needs at least one point");
  auto pairs = all_pairs(metric, points,
                         [&](PointId a, PointId b) { return metric.dist(a, b); });
  Hst t = union_tree(points, std::move(pairs), /*kruskal_weights=*/true);
  double n = static_cast<double>(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      double d = metric.dist(points[i], points[j]);
      double dt = t.distance(points[i], points[j]);
      embed_check(dt >= d * (1 - kRelTol), "kruskal tree is contractive");
      embed_check(dt <= (n - 1) * d * (1 + kRelTol),
                  "kruskal expansion exceeds n-1");
    }
  return t;
}

// ---- strict online -------------------------------------------------------------

void StrictOnlineEmbedder::arrive(PointId v) {
  int i = count() + 1;
  if (i == 1) {
    int leaf = tree_.add_node(0.0, -1);
    tree_.map_leaf(v, leaf);
    pts_.push_back(v);
    return;
  }
  PointId nearest = pts_[0];
  for (PointId u : pts_)
    if (m_.dist(u, v) < m_.dist(nearest, v)) nearest = u;
  double factor = 1 + std::ldexp(1.0, -(i - 1));

  // d_T(x, w) when x hangs under ancestor a of `nearest` is
  // max(phi(a), d_T(nearest, w)); pick the lowest feasible ancestor.
  auto feasible = [&](double phi_a) {
    for (PointId w : pts_) {
      double dt = std::max(phi_a, tree_.distance(nearest, w));
      if (dt < factor * m_.dist(v, w) * (1 - kRelTol)) return false;
    }
    return true;
  };

  int a = tree_.leaf_node(nearest);
  int chosen = -1;
  while (true) {
    if (feasible(tree_.node(a).phi)) {
      chosen = a;
      break;
    }
    if (tree_.node(a).parent == -1) break;
    a = tree_.node(a).parent;
  }
  int attach;
  if (chosen == -1 || !tree_.node(chosen).phi) {
    // Either the root is infeasible or the only feasible node is the leaf
    // itself; in both cases a new root with the exact required weight works.
    double need = tree_.node(tree_.root()).phi;
    for (PointId w : pts_) need = std::max(need, factor * m_.dist(v, w));
    attach = tree_.push_root(need);
  } else {
    attach = chosen;
  }
  int leaf = tree_.add_node(0.0, attach);
  tree_.map_leaf(v, leaf);
  pts_.push_back(v);
  assert_sandwich();
}

double StrictOnlineEmbedder::target_distance(PointId u, PointId v) const {
  return tree_.distance(u, v);
}

void StrictOnlineEmbedder::assert_sandwich() const {
  int i = count();
  double lo_factor = 1 + std::ldexp(1.0, -(i - 1));
  double hi_factor = std::ldexp(1.0, i);
  for (std::size_t a = 0; a < pts_.size(); ++a)
    for (std::size_t b = a + 1; b < pts_.size(); ++b) {
      double d = m_.dist(pts_[a], pts_[b]);
      double dt = tree_.distance(pts_[a], pts_[b]);
      embed_check(dt >= lo_factor * d * (1 - kRelTol),
                  "strict online lower sandwich bound broken");
      embed_check(dt <= hi_factor * d * (1 + kRelTol),
                  "strict online upper sandwich bound broken");
    }
}

EmbeddingTrace strict_online(const UpdateSequence& seq, const MetricSpace& metric) {
  EmbeddingTrace trace;
  trace.embedder = "strict-online";
  StrictOnlineEmbedder emb(metric);
  for (int t = 0; t < seq.length(); ++t) {
    const UpdateEvent& e = seq.events()[t];
    if (e.op == Op::Arrive) emb.arrive(e.point);
    TraceSnapshot snap;
    snap.step = t + 1;
    snap.event = e;
    snap.alive = seq.alive_after(t + 1);
    std::size_t n = snap.alive.size();
    snap.dists.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double d = emb.target_distance(snap.alive[i], snap.alive[j]);
        snap.dists[i * n + j] = snap.dists[j * n + i] = d;
      }
    snap.tree = std::make_shared<Hst>(emb.tree());
    trace.snapshots.push_back(std::move(snap));
  }
  return trace;
}

// ---- deterministic monotone embedders --------------------------------------------

namespace {

// Bottleneck (minimax) distances over weighted pairs by Kruskal unions.
std::vector<double> bottleneck_matrix(int npts, std::vector<WeightedPair> pairs,
                                      const std::vector<PointId>& pts) {
  std::map<PointId, int> idx;
  for (int i = 0; i < npts; ++i) idx[pts[i]] = i;
  std::vector<double> tau(static_cast<std::size_t>(npts) * npts, 0.0);
  std::sort(pairs.begin(), pairs.end());
  Dsu sets;
  std::vector<std::vector<int>> members(npts);
  for (int i = 0; i < npts; ++i) {
    sets.add();
    members[i] = {i};
  }
  for (const auto& wp : pairs) {
    int a = sets.find(idx.at(wp.u)), b = sets.find(idx.at(wp.v));
    if (a == b) continue;
    for (int x : members[a])
      for (int y : members[b])
        tau[static_cast<std::size_t>(x) * npts + y] =
            tau[static_cast<std::size_t>(y) * npts + x] = wp.w;
    sets.unite(a, b);
    int r = sets.find(a);
    std::vector<int> merged = std::move(members[a]);
    merged.insert(merged.end(), members[b].begin(), members[b].end());
    members[a].clear();
    members[b].clear();
    members[r] = std::move(merged);
  }
  return tau;
}

EmbeddingTrace run_threshold_embedder(
    const UpdateSequence& seq, const MetricSpace& metric, const std::string& name,
    double rescale_factor,
    const std::function<double(PointId, PointId, int later_arrival_index)>& weight,
    const std::function<void(double d, double tau, int i_count)>& check_pair) {
  EmbeddingTrace trace;
  trace.embedder = name;

  std::vector<PointId> pts;          // arrival order, distinct
  std::map<PointId, int> arrival_k;  // 1-based arrival index of first arrival
  std::vector<WeightedPair> pairs;
  std::vector<double> prev_tau;
  std::vector<PointId> prev_pts;

  for (int t = 0; t < seq.length(); ++t) {
    const UpdateEvent& e = seq.events()[t];
    if (e.op == Op::Arrive && !arrival_k.count(e.point)) {
      int k = static_cast<int>(pts.size()) + 1;
      arrival_k[e.point] = k;
      for (PointId u : pts) {
        PointId a = std::min(u, e.point), b = std::max(u, e.point);
        pairs.push_back({weight(u, e.point, k), a, b});
      }
      pts.push_back(e.point);
    }
    int npts = static_cast<int>(pts.size());
    std::vector<double> tau =
        npts > 0 ? bottleneck_matrix(npts, pairs, pts) : std::vector<double>{};
    std::map<PointId, int> idx;
    for (int i = 0; i < npts; ++i) idx[pts[i]] = i;

    // Monotonicity: thresholds only drop as edges are added.
    for (std::size_t a = 0; a < prev_pts.size(); ++a)
      for (std::size_t b = a + 1; b < prev_pts.size(); ++b) {
        double before = prev_tau[a * prev_pts.size() + b];
        double now = tau[static_cast<std::size_t>(idx.at(prev_pts[a])) * npts +
                         idx.at(prev_pts[b])];
        embed_check(now <= before * (1 + kRelTol),
                    "deterministic embedder distance increased");
      }

    for (std::size_t a = 0; a < pts.size(); ++a)
      for (std::size_t b = a + 1; b < pts.size(); ++b)
        check_pair(metric.dist(pts[a], pts[b]), tau[a * pts.size() + b], npts);

    TraceSnapshot snap;
    snap.step = t + 1;
    snap.event = e;
    snap.alive = seq.alive_after(t + 1);
    std::size_t n = snap.alive.size();
    snap.dists.assign(n * n, 0.0);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        double v = tau[static_cast<std::size_t>(idx.at(snap.alive[a])) * npts +
                       idx.at(snap.alive[b])] *
                   rescale_factor;
        snap.dists[a * n + b] = snap.dists[b * n + a] = v;
      }
    if (npts > 0) {
      std::vector<WeightedPair> scaled = pairs;
      if (rescale_factor != 1.0)
        for (auto& wp : scaled) wp.w *= rescale_factor;
      snap.tree = std::make_shared<Hst>(
          union_tree(pts, std::move(scaled), /*kruskal_weights=*/false));
    }
    trace.snapshots.push_back(std::move(snap));
    prev_tau = std::move(tau);
    prev_pts = pts;
  }
  return trace;
}

}  // namespace

EmbeddingTrace monotone_known_n(const UpdateSequence& seq, const MetricSpace& metric,
                                int n, bool rescale) {
  int arrivals = 0;
  for (const auto& e : seq.events())
    if (e.op == Op::Arrive) ++arrivals;
  std::map<PointId, bool> distinct;
  for (const auto& e : seq.events())
    if (e.op == Op::Arrive) distinct[e.point] = true;
  if (static_cast<int>(distinct.size()) > n)
    throw SequenceError("sequence introduces more than the declared n points");
  // The realized-distance scale set is non-expansive (tau <= d, each scale is
  // itself a threshold edge) with contraction at most i-1 after i points.
  return run_threshold_embedder(
      seq, metric, rescale ? "det-known-n-rescaled" : "det-known-n",
      rescale ? static_cast<double>(n - 1) : 1.0,
      [&](PointId u, PointId v, int) { return metric.dist(u, v); },
      [](double d, double tau, int i) {
        embed_check(tau <= d * (1 + kRelTol), "known-n: expansive threshold");
        embed_check(d <= std::max(1, i - 1) * tau * (1 + kRelTol),
                    "known-n: contraction beyond i-1");
      });
}

GrowthFn default_growth_fn() {
  static const double norm = [] {
    double sum = 0;
    for (int k = 2; k <= 1'000'000; ++k) {
      double l = std::log2(static_cast<double>(k) + 2);
      sum += 1.0 / (k * l * l);
    }
    double ln2 = std::log(2.0);
    sum += ln2 * ln2 / std::log(1e6);  // integral tail bound
    return sum;
  }();
  return [](int k) {
    double l = std::log2(static_cast<double>(k) + 2);
    return norm * k * l * l;
  };
}

void validate_growth_fn(const GrowthFn& f) {
  double prev = 0, sum = 0;
  for (int k = 2; k <= 1'000'000; ++k) {
    double v = f(k);
    if (v < prev * (1 - kRelTol))
      throw MetricError("growth function must be non-decreasing");
    prev = v;
    sum += 1.0 / v;
    if (sum > 1 + kRelTol)
      throw MetricError("growth function reciprocal sum exceeds 1 (at k=" +
                        std::to_string(k) + ")");
  }
}

EmbeddingTrace monotone_unknown_n(const UpdateSequence& seq, const MetricSpace& metric,
                                  const GrowthFn& f) {
  validate_growth_fn(f);
  // Chains are s-bounded since sum_k s/f(k) <= s, which makes the thresholds
  // non-contractive; any pair's own link caps the expansion at f(i).
  return run_threshold_embedder(
      seq, metric, "det-unknown-n", 1.0,
      [&](PointId u, PointId v, int k) { return metric.dist(u, v) * f(k); },
      [&](double d, double tau, int i) {
        embed_check(tau >= d * (1 - kRelTol), "unknown-n: contractive threshold");
        embed_check(tau <= f(std::max(i, 2)) * d * (1 + kRelTol),
                    "unknown-n: expansion beyond f(i)");
      });
}

std::vector<std::vector<PointId>> graph_components(
    std::span<const PointId> points,
    const std::function<bool(PointId, PointId)>& edge_pred) {
  Dsu sets;
  std::map<PointId, int> idx;
  for (PointId p : points) idx[p] = sets.add();
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j)
      if (edge_pred(points[i], points[j]))
        sets.unite(idx.at(points[i]), idx.at(points[j]));
  std::map<int, std::vector<PointId>> groups;
  for (PointId p : points) groups[sets.find(idx.at(p))].push_back(p);
  std::vector<std::vector<PointId>> out;
  for (auto& [_, g] : groups) out.push_back(std::move(g));
  return out;
}

}  // namespace monotree
