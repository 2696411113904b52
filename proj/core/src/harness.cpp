#include "monotree/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <thread>

#include <json.hpp>

#include "monotree/rng.hpp"

namespace monotree {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr double kRelTol = 1e-9;
}

// ---- audits ---------------------------------------------------------------------

std::optional<MonotoneViolation> audit_monotone(const EmbeddingTrace& trace) {
  for (std::size_t t = 1; t < trace.snapshots.size(); ++t) {
    const TraceSnapshot& prev = trace.snapshots[t - 1];
    const TraceSnapshot& cur = trace.snapshots[t];
    for (std::size_t i = 0; i < cur.alive.size(); ++i)
      for (std::size_t j = i + 1; j < cur.alive.size(); ++j) {
        PointId u = cur.alive[i], v = cur.alive[j];
        if (!prev.has(u) || !prev.has(v)) continue;
        double before = prev.dist_at(u, v);
        double after = cur.dist_at(u, v);
        if (after > before * (1 + kRelTol))
          return MonotoneViolation{cur.step, u, v, before, after};
      }
  }
  return std::nullopt;
}

ContractionReport audit_contraction(const EmbeddingTrace& trace,
                                    const MetricSpace& metric) {
  ContractionReport rep;
  for (const TraceSnapshot& snap : trace.snapshots) {
    rep.max_allowance = std::max(rep.max_allowance, snap.alpha);
    for (std::size_t i = 0; i < snap.alive.size(); ++i)
      for (std::size_t j = i + 1; j < snap.alive.size(); ++j) {
        double dx = metric.dist(snap.alive[i], snap.alive[j]);
        double dt = snap.dist_at(snap.alive[i], snap.alive[j]);
        if (dx <= 0) continue;
        if (dt <= 0) throw MetricError("zero target distance on distinct points");
        rep.lambda_c = std::max(rep.lambda_c, dx / dt);
        rep.lambda_e = std::max(rep.lambda_e, dt / dx);
      }
  }
  return rep;
}

// ---- Monte-Carlo distortion -------------------------------------------------------

namespace {

struct StretchKey {
  PointId u, v;
  int first_step;
  bool operator<(const StretchKey& o) const {
    return std::tie(u, v, first_step) < std::tie(o.u, o.v, o.first_step);
  }
};

// Stretch starts are sequence-determined, identical across trials.
std::vector<StretchKey> stretch_starts(const UpdateSequence& seq) {
  std::vector<StretchKey> out;
  for (int t = 0; t < seq.length(); ++t) {
    const UpdateEvent& e = seq.events()[t];
    if (e.op != Op::Arrive) continue;
    for (PointId u : seq.alive_after(t + 1))
      if (u != e.point)
        out.push_back({std::min(u, e.point), std::max(u, e.point), t + 1});
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct TrialAccum {
  std::vector<double> sum, sumsq, maxv;
  double lambda_c = 1;
  void init(std::size_t n) {
    sum.assign(n, 0);
    sumsq.assign(n, 0);
    maxv.assign(n, 0);
  }
  void absorb(const TrialAccum& o) {
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += o.sum[i];
      sumsq[i] += o.sumsq[i];
      maxv[i] = std::max(maxv[i], o.maxv[i]);
    }
    lambda_c = std::max(lambda_c, o.lambda_c);
  }
};

}  // namespace

DistortionReport mc_distortion(const EmbedRunner& runner, const std::string& name,
                               const UpdateSequence& seq, const MetricSpace& metric,
                               int trials, std::uint64_t seed, int threads) {
  if (trials < 1) throw SequenceError("mc_distortion needs trials >= 1");
  auto keys = stretch_starts(seq);
  std::map<StretchKey, std::size_t> index;
  for (std::size_t i = 0; i < keys.size(); ++i) index[keys[i]] = i;

  auto run_range = [&](int lo, int hi, TrialAccum& acc) {
    acc.init(keys.size());
    std::vector<double> vals(keys.size());
    for (int trial = lo; trial < hi; ++trial) {
      std::uint64_t tseed = derive_seed(seed, {0x5452u, static_cast<std::uint64_t>(trial)});
      std::fill(vals.begin(), vals.end(), 0.0);
      double worst_c = 1;
      runner(seq, metric, tseed, [&](const TargetView& view) {
        const UpdateEvent& e = view.event();
        if (e.op != Op::Arrive) return;
        for (PointId u : view.alive()) {
          if (u == e.point) continue;
          StretchKey k{std::min(u, e.point), std::max(u, e.point), view.step()};
          double d = view.dist(k.u, k.v);
          vals[index.at(k)] = d;
          double dx = view.source_dist(k.u, k.v);
          if (dx > 0 && d > 0) worst_c = std::max(worst_c, dx / d);
        }
      });
      for (std::size_t i = 0; i < keys.size(); ++i) {
        acc.sum[i] += vals[i];
        acc.sumsq[i] += vals[i] * vals[i];
        acc.maxv[i] = std::max(acc.maxv[i], vals[i]);
      }
      acc.lambda_c = std::max(acc.lambda_c, worst_c);
    }
  };

  TrialAccum total;
  total.init(keys.size());
  threads = std::max(1, std::min(threads, trials));
  if (threads == 1) {
    run_range(0, trials, total);
  } else {
    std::vector<TrialAccum> parts(threads);
    std::vector<std::thread> pool;
    int chunk = (trials + threads - 1) / threads;
    for (int k = 0; k < threads; ++k)
      pool.emplace_back(run_range, k * chunk, std::min(trials, (k + 1) * chunk),
                        std::ref(parts[k]));
    for (auto& th : pool) th.join();
    for (auto& p : parts) total.absorb(p);  // fixed chunk order
  }

  DistortionReport rep;
  rep.embedder = name;
  rep.seed = seed;
  rep.trials = trials;
  rep.lambda_c = total.lambda_c;
  rep.error_bars_valid = trials > 1;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    PairEstimate pe;
    pe.u = keys[i].u;
    pe.v = keys[i].v;
    pe.first_step = keys[i].first_step;
    pe.d_source = metric.dist(pe.u, pe.v);
    pe.mean = total.sum[i] / trials;
    double var = trials > 1
                     ? std::max(0.0, (total.sumsq[i] - trials * pe.mean * pe.mean) /
                                         (trials - 1))
                     : 0.0;
    pe.stddev = std::sqrt(var);
    pe.max_seen = total.maxv[i];
    if (pe.d_source > 0 && pe.expansion() > rep.max_expected_expansion) {
      rep.max_expected_expansion = pe.expansion();
      rep.max_expected_expansion_err =
          3 * pe.stddev / (std::sqrt(static_cast<double>(trials)) * pe.d_source);
    }
    rep.pairs.push_back(pe);
  }
  return rep;
}

// ---- smoothness ----------------------------------------------------------------

std::vector<SmoothnessRow> mc_smoothness(
    const PartitionDriver& driver, const UpdateSequence& seq,
    const MetricSpace& metric, double s, int trials, std::uint64_t seed,
    const std::function<double(double d)>& claimed_bound, int threads) {
  if (!(s > 0)) throw MetricError("scale must be positive");
  std::vector<PointId> pts;
  for (const auto& e : seq.events())
    if (e.op == Op::Arrive) pts.push_back(e.point);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  std::vector<std::pair<PointId, PointId>> pairs;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      double d = metric.dist(pts[i], pts[j]);
      if (d > 0 && d <= s) pairs.push_back({pts[i], pts[j]});  // bound vacuous above s
    }

  auto run_range = [&](int lo, int hi, std::vector<long>& splits) {
    splits.assign(pairs.size(), 0);
    for (int trial = lo; trial < hi; ++trial) {
      std::uint64_t tseed = derive_seed(seed, {0x534du, static_cast<std::uint64_t>(trial)});
      for (std::size_t i = 0; i < pairs.size(); ++i)
        if (!driver(seq, metric, tseed, pairs[i].first, pairs[i].second)) ++splits[i];
    }
  };

  std::vector<long> total(pairs.size(), 0);
  threads = std::max(1, std::min(threads, trials));
  if (threads == 1) {
    run_range(0, trials, total);
  } else {
    std::vector<std::vector<long>> parts(threads);
    std::vector<std::thread> pool;
    int chunk = (trials + threads - 1) / threads;
    for (int k = 0; k < threads; ++k)
      pool.emplace_back(run_range, k * chunk, std::min(trials, (k + 1) * chunk),
                        std::ref(parts[k]));
    for (auto& th : pool) th.join();
    for (auto& p : parts)
      for (std::size_t i = 0; i < total.size(); ++i) total[i] += p[i];
  }

  std::vector<SmoothnessRow> rows;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    SmoothnessRow r;
    r.u = pairs[i].first;
    r.v = pairs[i].second;
    r.d = metric.dist(r.u, r.v);
    r.split_freq = static_cast<double>(total[i]) / trials;
    r.sigma3 = 3 * std::sqrt(std::max(r.split_freq * (1 - r.split_freq), 1.0 / trials) /
                             trials);
    r.bound = claimed_bound(r.d);
    rows.push_back(r);
  }
  return rows;
}

// ---- instance generation ----------------------------------------------------------

namespace {

Instance make_line_instance(std::vector<double> coords, const std::string& kind) {
  std::vector<UpdateEvent> events;
  for (std::size_t i = 0; i < coords.size(); ++i)
    events.push_back({static_cast<PointId>(i), Op::Arrive, {coords[i]}});
  Instance inst;
  inst.sequence = UpdateSequence::from_events(std::move(events));
  inst.metric = MetricSpace::from_line(std::move(coords));
  inst.kind = kind;
  return inst;
}

}  // namespace

Instance gen_instance(const std::string& kind, const InstanceParams& params,
                      std::uint64_t seed) {
  if (params.n < 1) throw SequenceError("instance needs n >= 1");
  RngStream rng(seed, {0x47454eull});

  if (kind == "uniform-line") {
    double span = params.spread > 0 ? params.spread : params.n;
    std::vector<double> coords;
    coords.reserve(params.n);
    for (int i = 0; i < params.n; ++i) coords.push_back(span * rng.uniform());
    return make_line_instance(std::move(coords), kind);
  }

  if (kind == "evenly-spaced-line" || kind == "arrivals-only") {
    std::vector<double> coords;
    for (int i = 0; i < params.n; ++i) coords.push_back(i);
    return make_line_instance(std::move(coords), kind);
  }

  if (kind == "grid-lp") {
    int side = 1;
    while (std::pow(side + 1, params.dim) <= params.n) ++side;
    std::vector<std::vector<double>> coords;
    std::vector<int> cell(params.dim, 0);
    while (static_cast<int>(coords.size()) < params.n) {
      std::vector<double> c(cell.begin(), cell.end());
      coords.push_back(c);
      int d = 0;
      while (d < params.dim && ++cell[d] > side) cell[d++] = 0;
      if (d == params.dim) break;
    }
    // random arrival order
    std::vector<int> order(coords.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_below(i)]);
    std::vector<std::vector<double>> shuffled;
    for (int i : order) shuffled.push_back(coords[i]);
    std::vector<UpdateEvent> events;
    for (std::size_t i = 0; i < shuffled.size(); ++i)
      events.push_back({static_cast<PointId>(i), Op::Arrive, shuffled[i]});
    Instance inst;
    inst.sequence = UpdateSequence::from_events(std::move(events));
    inst.metric = MetricSpace::from_lp(std::move(shuffled), params.p);
    inst.kind = kind;
    return inst;
  }

  if (kind == "random-metric") {
    int n = params.n;
    // Connected random graph: a random spanning path plus extra edges,
    // weights uniform in [1, n]; the metric is its shortest-path closure.
    std::vector<std::vector<double>> w(n, std::vector<double>(n, 1e300));
    for (int i = 0; i < n; ++i) w[i][i] = 0;
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[rng.uniform_below(i)]);
    auto add_edge = [&](int a, int b) {
      double weight = 1 + (n - 1) * rng.uniform();
      w[a][b] = std::min(w[a][b], weight);
      w[b][a] = w[a][b];
    };
    for (int i = 0; i + 1 < n; ++i) add_edge(perm[i], perm[i + 1]);
    int extra = 2 * n;
    for (int e = 0; e < extra; ++e) {
      int a = static_cast<int>(rng.uniform_below(n));
      int b = static_cast<int>(rng.uniform_below(n));
      if (a != b) add_edge(a, b);
    }
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          w[i][j] = std::min(w[i][j], w[i][k] + w[k][j]);
    std::vector<UpdateEvent> events;
    for (int i = 0; i < n; ++i) {
      std::vector<double> row(w[i].begin(), w[i].begin() + i);
      events.push_back({i, Op::Arrive, row});
    }
    Instance inst;
    inst.sequence = UpdateSequence::from_events(std::move(events));
    inst.metric = MetricSpace::from_matrix(std::move(w));
    inst.kind = kind;
    return inst;
  }

  if (kind == "sliding-window") {
    int l = params.width > 0 ? params.width : 4;
    if (params.n < l) throw SequenceError("sliding window needs n >= width");
    std::vector<double> coords;
    for (int i = 0; i < params.n; ++i)
      coords.push_back(params.geometric ? std::ldexp(1.0, i) : i);
    std::vector<UpdateEvent> events;
    for (int i = 0; i < params.n; ++i) {
      if (i >= l) events.push_back({i - l, Op::Depart, {}});
      events.push_back({i, Op::Arrive, {coords[i]}});
    }
    Instance inst;
    inst.sequence = UpdateSequence::from_events(std::move(events));
    inst.metric = MetricSpace::from_line(std::move(coords));
    inst.kind = kind;
    return inst;
  }

  throw SequenceError("unknown instance kind '" + kind + "'");
}

// ---- reports --------------------------------------------------------------------

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_distortion_report(const std::string& dir, const DistortionReport& rep,
                             const std::string& config_json) {
  fs::create_directories(dir);
  std::ofstream csv(fs::path(dir) / "pairs.csv");
  csv << "u,v,first_step,d_source,mean_dt,stddev,max_dt,expansion\n";
  for (const auto& p : rep.pairs)
    csv << p.u << ',' << p.v << ',' << p.first_step << ',' << format_double(p.d_source)
        << ',' << format_double(p.mean) << ',' << format_double(p.stddev) << ','
        << format_double(p.max_seen) << ','
        << format_double(p.d_source > 0 ? p.expansion() : 0) << "\n";
  json j;
  j["embedder"] = rep.embedder;
  j["seed"] = rep.seed;
  j["trials"] = rep.trials;
  j["max_expected_expansion"] = rep.max_expected_expansion;
  j["max_expected_expansion_3sigma"] = rep.max_expected_expansion_err;
  j["lambda_c"] = rep.lambda_c;
  j["error_bars_valid"] = rep.error_bars_valid;
  j["config"] = json::parse(config_json);
  std::ofstream side(fs::path(dir) / "report.json");
  side << j.dump(2) << "\n";
}

void write_smoothness_report(const std::string& path,
                             const std::vector<SmoothnessRow>& rows) {
  std::ofstream csv(path);
  csv << "u,v,d,split_freq,sigma3,bound\n";
  for (const auto& r : rows)
    csv << r.u << ',' << r.v << ',' << format_double(r.d) << ','
        << format_double(r.split_freq) << ',' << format_double(r.sigma3) << ','
        << format_double(r.bound) << "\n";
}

void write_trace_dir(const std::string& dir, const EmbeddingTrace& trace,
                     const UpdateSequence& seq, const MetricSpace& metric) {
  fs::create_directories(dir);
  save_sequence_file((fs::path(dir) / "sequence.jsonl").string(), seq, metric);
  json prov;
  prov["embedder"] = trace.embedder;
  prov["seed"] = trace.seed;
  prov["config"] = json::parse(trace.config_json);
  std::ofstream(fs::path(dir) / "provenance.json") << prov.dump(2) << "\n";

  std::ofstream csv(fs::path(dir) / "summary.csv");
  csv << "step,op,point,alive,width,max_expansion,min_ratio,clusters\n";
  std::size_t width_so_far = 0;
  for (const auto& snap : trace.snapshots) {
    double maxe = 0, minr = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < snap.alive.size(); ++i)
      for (std::size_t j = i + 1; j < snap.alive.size(); ++j) {
        double dx = metric.dist(snap.alive[i], snap.alive[j]);
        double dt = snap.dist_at(snap.alive[i], snap.alive[j]);
        if (dx > 0) {
          maxe = std::max(maxe, dt / dx);
          minr = std::min(minr, dt / dx);
        }
      }
    std::string clusters;
    if (snap.tree) {
      std::map<double, int> by_phi;  // node weight -> count, as cluster census
      for (int v = 0; v < snap.tree->size(); ++v)
        if (snap.tree->node(v).phi > 0) by_phi[snap.tree->node(v).phi]++;
      for (auto& [phi, cnt] : by_phi) {
        if (!clusters.empty()) clusters += '|';
        clusters += format_double(phi) + ":" + std::to_string(cnt);
      }
    }
    width_so_far = std::max(width_so_far, snap.alive.size());
    csv << snap.step << ',' << (snap.event.op == Op::Arrive ? '+' : '-') << ','
        << snap.event.point << ',' << snap.alive.size() << ','
        << width_so_far << ',' << format_double(maxe) << ','
        << format_double(minr == std::numeric_limits<double>::infinity() ? 0 : minr)
        << ',' << '"' << clusters << '"' << "\n";
    if (snap.tree) {
      char name[32];
      std::snprintf(name, sizeof name, "hst_%05d.json", snap.step);
      std::ofstream(fs::path(dir) / name) << snap.tree->to_json() << "\n";
    }
  }
}

EmbeddingTrace read_trace_dir(const std::string& dir, UpdateSequence* seq_out,
                              MetricSpace* metric_out) {
  SequenceFile sf = load_sequence_file((fs::path(dir) / "sequence.jsonl").string());
  json prov;
  std::ifstream(fs::path(dir) / "provenance.json") >> prov;
  EmbeddingTrace trace;
  trace.embedder = prov.value("embedder", "?");
  trace.seed = prov.value("seed", 0);
  trace.config_json = prov.contains("config") ? prov["config"].dump() : "{}";
  for (int t = 1; t <= sf.sequence.length(); ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "hst_%05d.json", t);
    fs::path p = fs::path(dir) / name;
    if (!fs::exists(p)) continue;
    std::ifstream in(p);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    auto tree = std::make_shared<Hst>(Hst::from_json(text));
    TraceSnapshot snap;
    snap.step = t;
    snap.event = sf.sequence.events()[t - 1];
    snap.alive = sf.sequence.alive_after(t);
    std::size_t n = snap.alive.size();
    snap.dists.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double d = tree->distance(snap.alive[i], snap.alive[j]);
        snap.dists[i * n + j] = snap.dists[j * n + i] = d;
      }
    snap.tree = tree;
    trace.snapshots.push_back(std::move(snap));
  }
  if (seq_out) *seq_out = sf.sequence;
  if (metric_out) *metric_out = sf.metric;
  return trace;
}

std::pair<int, int> sensitive_band_levels(double d, double eps) {
  // Levels j with eps * 2^j <= d <= 2^j run from ceil(log2 d) up to
  // floor(log2(d/eps)); whether the boundary level floor(log2(d/eps))
  // belongs to the band is ambiguous at exact powers, so report both counts.
  if (!(d > 0) || !(eps > 0) || eps > 1) return {0, 0};
  int lo = static_cast<int>(std::ceil(std::log2(d)));
  int hi = static_cast<int>(std::floor(std::log2(d / eps)));
  int with_boundary = std::max(0, hi - lo + 1);
  return {std::max(0, with_boundary - 1), with_boundary};
}

}  // namespace monotree
