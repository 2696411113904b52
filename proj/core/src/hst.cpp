#include "monotree/hst.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "monotree/rng.hpp"

namespace monotree {

int Hst::add_node(double phi, int parent) {
  if (parent < -1 || parent >= size()) throw HstError("bad parent index");
  if (parent == -1 && root_ != -1) throw HstError("tree already has a root");
  nodes_.push_back({phi, parent});
  has_child_.push_back(false);
  if (parent == -1)
    root_ = size() - 1;
  else
    has_child_[parent] = true;
  return size() - 1;
}

int Hst::push_root(double phi) {
  if (root_ == -1) return add_node(phi, -1);
  nodes_.push_back({phi, -1});
  has_child_.push_back(true);
  int id = size() - 1;
  nodes_[root_].parent = id;
  root_ = id;
  return id;
}

void Hst::map_leaf(PointId p, int node) {
  if (node < 0 || node >= size()) throw HstError("bad leaf node index");
  leaf_[p] = node;
}

int Hst::leaf_node(PointId p) const {
  auto it = leaf_.find(p);
  if (it == leaf_.end())
    throw HstError("point " + std::to_string(p) + " is not mapped to a leaf");
  return it->second;
}

int Hst::lca(int a, int b) const {
  auto depth = [&](int v) {
    int d = 0;
    for (; nodes_[v].parent != -1; v = nodes_[v].parent) ++d;
    return d;
  };
  int da = depth(a), db = depth(b);
  while (da > db) { a = nodes_[a].parent; --da; }
  while (db > da) { b = nodes_[b].parent; --db; }
  while (a != b) { a = nodes_[a].parent; b = nodes_[b].parent; }
  return a;
}

double Hst::distance(PointId u, PointId w) const {
  if (u == w) return 0;
  return nodes_[lca(leaf_node(u), leaf_node(w))].phi;
}

double Hst::edge_weight(int v) const {
  int p = nodes_[v].parent;
  if (p == -1) return 0;
  return (nodes_[p].phi - nodes_[v].phi) / 2;
}

std::vector<std::string> Hst::validate(double mu, int ultrametric_samples,
                                       std::uint64_t seed) const {
  std::vector<std::string> bad;
  if (root_ == -1) {
    bad.push_back("no root");
    return bad;
  }
  for (int v = 0; v < size(); ++v) {
    bool is_leaf = !has_child_[v];
    if (is_leaf && nodes_[v].phi != 0)
      bad.push_back("leaf node " + std::to_string(v) + " has nonzero weight");
    if (!is_leaf && nodes_[v].phi <= 0)
      bad.push_back("internal node " + std::to_string(v) + " has non-positive weight");
    int p = nodes_[v].parent;
    if (p != -1 && nodes_[v].phi > nodes_[p].phi / mu + 1e-12 * nodes_[p].phi)
      bad.push_back("node " + std::to_string(v) + " violates mu-separation: " +
                    std::to_string(nodes_[v].phi) + " > " +
                    std::to_string(nodes_[p].phi) + "/mu");
  }
  std::vector<PointId> pts;
  pts.reserve(leaf_.size());
  for (const auto& [p, _] : leaf_) pts.push_back(p);
  if (pts.size() >= 3) {
    RngStream rng(seed, {0x7157u});
    for (int i = 0; i < ultrametric_samples; ++i) {
      PointId a = pts[rng.uniform_below(pts.size())];
      PointId b = pts[rng.uniform_below(pts.size())];
      PointId c = pts[rng.uniform_below(pts.size())];
      double ab = distance(a, b), bc = distance(b, c), ac = distance(a, c);
      if (ac > std::max(ab, bc) * (1 + 1e-12)) {
        bad.push_back("ultrametric inequality fails on sampled triple");
        break;
      }
    }
  }
  return bad;
}

std::string Hst::to_json() const {
  nlohmann::json j;
  auto& nodes = j["nodes"];
  nodes = nlohmann::json::array();
  for (int v = 0; v < size(); ++v)
    nodes.push_back({{"id", v}, {"phi", nodes_[v].phi}, {"parent", nodes_[v].parent}});
  auto& leaves = j["leaves"];
  leaves = nlohmann::json::object();
  std::map<PointId, int> ordered(leaf_.begin(), leaf_.end());
  for (const auto& [p, n] : ordered) leaves[std::to_string(p)] = n;
  return j.dump();
}

Hst Hst::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Hst t;
  for (const auto& n : j.at("nodes")) {
    int id = n.at("id").get<int>();
    if (id != t.size()) throw HstError("node ids must be dense and in order");
    t.add_node(n.at("phi").get<double>(), n.at("parent").get<int>());
  }
  for (const auto& [key, val] : j.at("leaves").items())
    t.map_leaf(static_cast<PointId>(std::stol(key)), val.get<int>());
  return t;
}

// ---- partition stacks -------------------------------------------------------

namespace {

void check_same_points(const std::vector<PartitionLevel>& levels) {
  if (levels.empty()) return;
  auto points_of = [](const PartitionLevel& lv) {
    std::set<PointId> s;
    for (const auto& c : lv.clusters) s.insert(c.begin(), c.end());
    return s;
  };
  std::set<PointId> base = points_of(levels[0]);
  std::size_t total0 = 0;
  for (const auto& c : levels[0].clusters) total0 += c.size();
  if (total0 != base.size()) throw HstError("level 0 clusters overlap");
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (levels[i].scale <= levels[i - 1].scale)
      throw HstError("level scales must be strictly increasing");
    std::size_t total = 0;
    for (const auto& c : levels[i].clusters) total += c.size();
    if (points_of(levels[i]) != base || total != base.size())
      throw HstError("levels partition different point sets");
  }
}

// cluster index per point, or -1
std::unordered_map<PointId, int> cluster_index(const PartitionLevel& lv) {
  std::unordered_map<PointId, int> idx;
  for (std::size_t c = 0; c < lv.clusters.size(); ++c)
    for (PointId p : lv.clusters[c]) idx[p] = static_cast<int>(c);
  return idx;
}

void canonicalize(PartitionLevel& lv) {
  for (auto& c : lv.clusters) std::sort(c.begin(), c.end());
  std::sort(lv.clusters.begin(), lv.clusters.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
}

}  // namespace

PartitionStack::PartitionStack(std::vector<PartitionLevel> levels)
    : levels_(std::move(levels)) {
  check_same_points(levels_);
}

bool PartitionStack::nested() const {
  for (std::size_t i = 0; i + 1 < levels_.size(); ++i) {
    auto upper = cluster_index(levels_[i + 1]);
    for (const auto& c : levels_[i].clusters) {
      int owner = upper.at(c.front());
      for (PointId p : c)
        if (upper.at(p) != owner) return false;
    }
  }
  return true;
}

PartitionStack refine(const PartitionStack& stack) {
  std::vector<PartitionLevel> out = stack.levels();
  // Work top-down; each level becomes its refinement with the (already
  // refined) level above, which equals the refinement with all levels above.
  for (int i = static_cast<int>(out.size()) - 2; i >= 0; --i) {
    auto upper = cluster_index(out[i + 1]);
    std::map<std::pair<int, int>, std::vector<PointId>> pieces;
    for (std::size_t c = 0; c < out[i].clusters.size(); ++c)
      for (PointId p : out[i].clusters[c])
        pieces[{static_cast<int>(c), upper.at(p)}].push_back(p);
    out[i].clusters.clear();
    for (auto& [_, pts] : pieces) out[i].clusters.push_back(std::move(pts));
    canonicalize(out[i]);
  }
  return PartitionStack(std::move(out));
}

Hst induced_hst(const PartitionStack& stack) {
  const auto& levels = stack.levels();
  if (levels.empty()) throw HstError("empty partition stack");
  if (!stack.nested()) throw HstError("stack is not nested; refine it first");
  for (const auto& c : levels.front().clusters)
    if (c.size() != 1)
      throw HstError("bottom level must be all singletons");
  if (levels.back().clusters.size() != 1)
    throw HstError("top level must be a single cluster");

  Hst t;
  // Build from the top down so parents exist before children.
  int top = static_cast<int>(levels.size()) - 1;
  std::vector<std::unordered_map<PointId, int>> node_of(levels.size());
  t.add_node(levels.size() == 1 ? 0.0 : levels[top].scale, -1);
  for (PointId p : levels[top].clusters[0]) node_of[top][p] = 0;
  for (int i = top - 1; i >= 0; --i) {
    bool leaf_level = (i == 0);
    for (const auto& c : levels[i].clusters) {
      int parent = node_of[i + 1].at(c.front());
      int v = t.add_node(leaf_level ? 0.0 : levels[i].scale, parent);
      for (PointId p : c) node_of[i][p] = v;
    }
  }
  if (levels.size() == 1) {
    for (PointId p : levels[0].clusters[0]) t.map_leaf(p, 0);
  } else {
    for (const auto& c : levels[0].clusters) t.map_leaf(c[0], node_of[0].at(c[0]));
  }
  return t;
}

}  // namespace monotree
