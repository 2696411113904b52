#include "monotree/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "monotree/embed.hpp"
#include "monotree/rng.hpp"

namespace monotree {

namespace {

GeneratedSequence finish(std::vector<UpdateEvent> events, std::vector<double> coords) {
  GeneratedSequence g;
  g.sequence = UpdateSequence::from_events(std::move(events));
  g.metric = MetricSpace::from_line(std::move(coords));
  return g;
}

}  // namespace

AdversaryResult strict_det_adversary(StrictEmbedderApi& embedder, int n) {
  if (n < 2) throw SequenceError("adaptive adversary needs n >= 2");
  std::vector<UpdateEvent> events;
  std::vector<double> coords;
  std::map<std::pair<PointId, PointId>, double> answered;

  auto query = [&](PointId a, PointId b) {
    if (a > b) std::swap(a, b);
    double d = embedder.target_distance(a, b);
    auto [it, fresh] = answered.try_emplace({a, b}, d);
    if (!fresh && std::abs(it->second - d) > 1e-12 * std::max(1.0, it->second))
      throw StrictnessViolation("embedder changed the distance of pair (" +
                                std::to_string(a) + "," + std::to_string(b) +
                                ") after step " + std::to_string(coords.size()));
    return d;
  };
  auto recheck_all = [&] {
    for (auto& [pr, val] : answered) {
      double d = embedder.target_distance(pr.first, pr.second);
      if (std::abs(val - d) > 1e-12 * std::max(1.0, val))
        throw StrictnessViolation("embedder changed the distance of pair (" +
                                  std::to_string(pr.first) + "," +
                                  std::to_string(pr.second) + ") at step " +
                                  std::to_string(coords.size()));
    }
  };
  auto arrive = [&](double x) {
    PointId id = static_cast<PointId>(coords.size());
    coords.push_back(x);
    embedder.arrive(id, x);
    recheck_all();
    events.push_back({id, Op::Arrive, {x}});
    return id;
  };

  PointId u = arrive(0.0), v = arrive(1.0);
  double base = query(u, v);
  for (int i = 3; i <= n; ++i) {
    double xu = coords[u], xv = coords[v];
    PointId x = arrive((xu + xv) / 2);
    double du = query(x, u), dv = query(x, v);
    // An ultrametric forces max(du, dv) >= d_T(u, v); track the larger side.
    PointId keep = du >= dv ? u : v;
    PointId drop = du >= dv ? v : u;
    embed_check(std::max(du, dv) >= query(u, v) * (1 - 1e-12),
                "embedder's answers violate the ultrametric inequality");
    events.push_back({drop, Op::Depart, {}});
    u = x;
    v = keep;
  }

  AdversaryResult res;
  res.witness_u = u;
  res.witness_v = v;
  res.witness_source_dist = std::abs(coords[u] - coords[v]);
  res.witness_target_dist = query(u, v);
  embed_check(res.witness_target_dist >= base * (1 - 1e-12),
              "tracked pair lost the invariant distance");
  res.expansion = res.witness_target_dist / res.witness_source_dist;
  res.instance = finish(std::move(events), std::move(coords));
  return res;
}

GeneratedSequence strict_rand_sequence(int n, std::uint64_t seed) {
  if (n < 3) throw SequenceError("strict_rand_sequence needs n >= 3");
  RngStream rng(seed, {0x57414c4bull});
  std::vector<UpdateEvent> events;
  std::vector<double> coords;
  std::map<double, PointId> alive_at;  // coordinate -> alive point

  auto arrive = [&](double x) {
    PointId id = static_cast<PointId>(coords.size());
    coords.push_back(x);
    events.push_back({id, Op::Arrive, {x}});
    alive_at[x] = id;
    return id;
  };
  auto depart = [&](double x) {
    auto it = alive_at.find(x);
    if (it == alive_at.end()) throw SequenceError("departing a dead coordinate");
    events.push_back({it->second, Op::Depart, {}});
    alive_at.erase(it);
  };
  auto assert_window = [&](double vi, int i) {
    double gap = std::ldexp(1.0, -i + 2);
    std::set<double> expect{vi - gap, vi, vi + gap};
    std::set<double> have;
    for (auto& [c, _] : alive_at) have.insert(c);
    embed_check(have == expect,
                "alive set is not {l_i, v_i, r_i} at step " + std::to_string(i));
  };

  arrive(0.0);
  arrive(1.0);
  double vi = 0.5;
  arrive(vi);
  assert_window(vi, 3);
  for (int i = 3; i < n; ++i) {
    double b = (rng.next_u64() & 1) ? 1.0 : -1.0;
    double vnext = vi + b * std::ldexp(1.0, -(i - 1));
    // The surviving endpoint brackets all future points; the other departs.
    double keep = vi + b * std::ldexp(1.0, -i + 2);
    double drop = vi - b * std::ldexp(1.0, -i + 2);
    depart(drop);
    arrive(vnext);
    (void)keep;
    vi = vnext;
    assert_window(vi, i + 1);
  }
  return finish(std::move(events), std::move(coords));
}

GeneratedSequence monotone_det_dynamic_sequence(int n) {
  if (n < 3) throw SequenceError("sliding sequence needs n >= 3");
  std::vector<UpdateEvent> events;
  std::vector<double> coords;
  for (int c = 0; c <= 2; ++c) {
    coords.push_back(c);
    events.push_back({c, Op::Arrive, {static_cast<double>(c)}});
  }
  for (int x = 1; x + 2 <= n; ++x) {
    events.push_back({x, Op::Depart, {}});
    coords.push_back(x + 2);
    events.push_back({x + 2, Op::Arrive, {static_cast<double>(x + 2)}});
  }
  return finish(std::move(events), std::move(coords));
}

std::vector<std::int64_t> encompassing_points(std::int64_t x, int l) {
  std::set<std::int64_t> pts;
  for (int j = 0; j <= l; ++j) {
    std::int64_t base = (x >> j) << j;
    pts.insert(base);
    pts.insert(base + (std::int64_t{1} << j));
  }
  return {pts.begin(), pts.end()};
}

EncompassingInstance encompassing_sequence(int l, std::uint64_t) {
  if (l < 2) throw SequenceError("encompassing sequence needs l >= 2");
  const std::int64_t m = std::int64_t{1} << l;
  EncompassingInstance out;
  out.pair_time.assign(static_cast<std::size_t>(m), 0);
  out.coord_point.assign(static_cast<std::size_t>(m) + 1, -1);

  std::vector<UpdateEvent> events;
  std::vector<double> coords;
  std::set<std::int64_t> alive;

  auto id_of = [&](std::int64_t c) {
    if (out.coord_point[c] == -1) {
      out.coord_point[c] = static_cast<PointId>(coords.size());
      coords.push_back(static_cast<double>(c));
    }
    return out.coord_point[c];
  };

  for (std::int64_t x = 0; x < m; ++x) {
    auto target_vec = encompassing_points(x, l);
    std::set<std::int64_t> target(target_vec.begin(), target_vec.end());
    target.insert(x);
    target.insert(x + 1);
    for (std::int64_t c : alive)  // departures first, ascending
      if (!target.count(c)) events.push_back({out.coord_point[c], Op::Depart, {}});
    for (std::int64_t c : target)  // then arrivals, ascending
      if (!alive.count(c)) {
        PointId id = id_of(c);
        events.push_back({id, Op::Arrive, {static_cast<double>(c)}});
      }
    alive = std::move(target);
    out.pair_time[x] = static_cast<int>(events.size());
  }
  out.instance = finish(std::move(events), std::move(coords));
  return out;
}

}  // namespace monotree
