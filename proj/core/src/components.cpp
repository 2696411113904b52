#include "monotree/components.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "monotree/rng.hpp"

namespace monotree {

double radius_pdf(double z, int j_count, double s) {
  if (j_count < 1) throw ComponentError("j_count must be >= 1");
  double chi = 2.0 * j_count;
  if (z < s / 16 || z > s / 8) return 0;
  double lc = std::log(chi);
  return 32 * chi * chi * lc / (s * (1 - 1 / (chi * chi))) * std::exp(-32 * z * lc / s);
}

double radius_cdf(double z, int j_count, double s) {
  if (j_count < 1) throw ComponentError("j_count must be >= 1");
  double chi = 2.0 * j_count;
  if (z <= s / 16) return 0;
  if (z >= s / 8) return 1;
  double lc = std::log(chi);
  double c2 = 1 / (chi * chi);
  return (c2 - std::exp(-32 * z * lc / s)) / (c2 * (1 - c2));
}

double radius_quantile(double u, int j_count, double s) {
  if (j_count < 1) throw ComponentError("j_count must be >= 1");
  if (!(u >= 0) || u >= 1) throw ComponentError("u must lie in [0,1)");
  double chi = 2.0 * j_count;
  double lc = std::log(chi);
  double c2 = 1 / (chi * chi);
  // u = (chi^2/(1-chi^-2)) (chi^-2 - e^{-32 z log(chi)/s})
  double inner = c2 - u * (c2 - c2 * c2);
  return -(s / (32 * lc)) * std::log(inner);
}

double sample_radius(std::uint64_t seed, int level, int dim, PointId center,
                     int arrival_ordinal, int j_count, double s) {
  double u = keyed_uniform(seed, {0x52414449ull, static_cast<std::uint64_t>(level + (1 << 20)),
                                  static_cast<std::uint64_t>(dim),
                                  static_cast<std::uint64_t>(center),
                                  static_cast<std::uint64_t>(arrival_ordinal)});
  return radius_quantile(u, j_count, s);
}

bool cuts(double d_cu, double d_cw, double r) {
  return (d_cu <= r) != (d_cw <= r);
}

// ---- ScaleState --------------------------------------------------------------

int ScaleState::add_component(PointId center, double radius, std::int64_t birth) {
  if (!comps_.empty() && birth <= comps_.back().birth)
    throw ComponentError("birth times must be strictly increasing");
  comps_.push_back({center, radius, birth, false, 0});
  groups_.add();
  ++live_count_;
  return static_cast<int>(comps_.size()) - 1;
}

std::optional<int> ScaleState::covering_component(const MetricSpace& m,
                                                  PointId u) const {
  for (std::size_t i = 0; i < comps_.size(); ++i) {  // birth order
    const Component& c = comps_[i];
    if (c.dead) continue;
    if (m.dist(c.center, u) <= c.radius) return static_cast<int>(i);
  }
  return std::nullopt;
}

int ScaleState::assign(const MetricSpace& m, PointId u) {
  auto c = covering_component(m, u);
  if (!c)
    throw ComponentError("no component covers point " + std::to_string(u) +
                         " at scale level " + std::to_string(level_));
  auto it = assign_.find(u);
  if (it != assign_.end()) --comps_[it->second].alive_members;
  assign_[u] = *c;
  ++comps_[*c].alive_members;
  return *c;
}

int ScaleState::component_of(PointId u) const {
  auto it = assign_.find(u);
  if (it == assign_.end())
    throw ComponentError("point " + std::to_string(u) + " has no assignment");
  return it->second;
}

void ScaleState::merge_groups(int a, int b, const MergeHook& hook) {
  if (a < 0 || b < 0 || a >= component_count() || b >= component_count())
    throw ComponentError("unknown component id");
  if (groups_.same(a, b)) return;
  if (hook) hook(group_members(a), group_members(b));
  groups_.unite(a, b);
}

std::vector<int> ScaleState::prune_empty(PointId departing) {
  auto it = assign_.find(departing);
  if (it != assign_.end()) {
    --comps_[it->second].alive_members;
    assign_.erase(it);
  }
  std::vector<int> removed;
  for (std::size_t i = 0; i < comps_.size(); ++i) {
    if (!comps_[i].dead && comps_[i].alive_members == 0) {
      comps_[i].dead = true;
      --live_count_;
      removed.push_back(static_cast<int>(i));
    }
  }
  return removed;
}

std::vector<PointId> ScaleState::group_members(int comp) const {
  int root = groups_.find(comp);
  std::vector<PointId> out;
  for (const auto& [p, c] : assign_)
    if (groups_.find(c) == root) out.push_back(p);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> ScaleState::group_components(int comp) const {
  int root = groups_.find(comp);
  std::vector<int> out;
  for (int i = 0; i < component_count(); ++i)
    if (!comps_[i].dead && groups_.find(i) == root) out.push_back(i);
  return out;
}

double ScaleState::max_component_span() const {
  double worst = 0;
  for (const auto& c : comps_)
    if (!c.dead) worst = std::max(worst, 2 * c.radius);
  return worst;
}

std::string ScaleState::dump_json() const {
  nlohmann::json j;
  j["level"] = level_;
  j["scale"] = s_;
  auto& cs = j["components"];
  cs = nlohmann::json::array();
  for (int i = 0; i < component_count(); ++i) {
    const Component& c = comps_[i];
    cs.push_back({{"id", i},
                  {"center", c.center},
                  {"radius", c.radius},
                  {"birth", c.birth},
                  {"dead", c.dead},
                  {"alive_members", c.alive_members},
                  {"group", groups_.find(i)}});
  }
  auto& as = j["assignment"];
  as = nlohmann::json::object();
  std::vector<PointId> pts;
  for (const auto& [p, _] : assign_) pts.push_back(p);
  std::sort(pts.begin(), pts.end());
  for (PointId p : pts) as[std::to_string(p)] = assign_.at(p);
  return j.dump();
}

}  // namespace monotree
