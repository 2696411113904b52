#include <doctest.h>

#include <cmath>

#include "monotree/harness.hpp"
#include "monotree/normed.hpp"

using namespace monotree;

namespace {

UpdateSequence arrivals_for(int n) {
  std::vector<UpdateEvent> ev;
  for (PointId p = 0; p < n; ++p) ev.push_back({p, Op::Arrive, {}});
  return UpdateSequence::from_events(ev);
}

}  // namespace

TEST_CASE("cut points stay within their half-interval") {
  for (int k = -20; k <= 20; ++k)
    for (int level : {-3, 0, 5}) {
      double r = std::ldexp(1.0, level) / 3;
      double z = line_cut_point(9, level, 0, k, r);
      CHECK(z >= k * r);
      CHECK(z <= (k + 0.5) * r);
    }
}

TEST_CASE("line embedder: two points merge at the first uncut scale") {
  MetricSpace m = MetricSpace::from_line({0, 1});
  for (std::uint64_t seed : {1, 2, 3, 7, 11}) {
    LineConfig cfg;
    cfg.seed = seed;
    EmbeddingTrace tr = embed_line(arrivals_for(2), m, cfg, true);
    double d = tr.snapshots.back().dist_at(0, 1);
    CHECK(d >= 1.0);
    CHECK_FALSE(audit_monotone(tr).has_value());
    CHECK(audit_contraction(tr, m).lambda_c == doctest::Approx(1.0));
    CHECK(tr.snapshots.back().tree->validate(2.0).empty());
  }
}

TEST_CASE("line embedder: monotone + non-contractive on random instances") {
  Instance inst = gen_instance("uniform-line", {.n = 20}, 31);
  LineConfig cfg;
  cfg.seed = 3;
  EmbeddingTrace tr = embed_line(inst.sequence, inst.metric, cfg, false);
  CHECK_FALSE(audit_monotone(tr).has_value());
  CHECK(audit_contraction(tr, inst.metric).lambda_c == doctest::Approx(1.0));

  cfg.mode = LineMode::Dynamic;
  Instance sw = gen_instance("sliding-window", {.n = 24, .width = 6}, 5);
  EmbeddingTrace td = embed_line(sw.sequence, sw.metric, cfg, false);
  CHECK_FALSE(audit_monotone(td).has_value());
  CHECK(audit_contraction(td, sw.metric).lambda_c == doctest::Approx(1.0));
}

TEST_CASE("line embedder rejects non-line metrics") {
  MetricSpace m = MetricSpace::from_matrix({{0, 1}, {1, 0}});
  LineConfig cfg;
  CHECK_THROWS_AS(embed_line(arrivals_for(2), m, cfg), MetricError);
}

TEST_CASE("linf with D=1 matches the line embedder exactly") {
  std::vector<double> xs{0.0, 0.7, 2.4, 3.1, 9.0};
  std::vector<std::vector<double>> cs;
  for (double x : xs) cs.push_back({x});
  MetricSpace line = MetricSpace::from_line(xs);
  MetricSpace lp = MetricSpace::from_lp(cs, 0);
  LineConfig cfg;
  cfg.seed = 13;
  EmbeddingTrace a = embed_line(arrivals_for(5), line, cfg, false);
  EmbeddingTrace b = embed_linf(arrivals_for(5), lp, cfg, false);
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (std::size_t i = 0; i < a.snapshots.size(); ++i)
    CHECK(a.snapshots[i].dists == b.snapshots[i].dists);
}

TEST_CASE("linf embedder handles p in {1, 2, inf} with norm bookkeeping") {
  std::vector<std::vector<double>> cs{{0, 0, 0}, {1, 0.5, 2}, {4, 3, 1}, {2, 2, 2}};
  for (int p : {1, 2, 0}) {
    MetricSpace m = MetricSpace::from_lp(cs, p);
    LineConfig cfg;
    cfg.seed = 41;
    EmbeddingTrace tr = embed_linf(arrivals_for(4), m, cfg, false);
    CHECK_FALSE(audit_monotone(tr).has_value());
    // non-contractive in the source lp norm after the coordinate-map factor
    CHECK(audit_contraction(tr, m).lambda_c <= 1.0 + 1e-9);
  }
  CHECK_THROWS_AS(MetricSpace::from_lp(cs, 5), MetricError);
}

TEST_CASE("linf dynamic mode") {
  std::vector<std::vector<double>> cs;
  for (int i = 0; i < 12; ++i)
    cs.push_back({static_cast<double>(i % 4), static_cast<double>(i / 4)});
  MetricSpace m = MetricSpace::from_lp(cs, 0);
  std::vector<UpdateEvent> ev;
  for (PointId p = 0; p < 12; ++p) {
    if (p >= 5) ev.push_back({static_cast<PointId>(p - 5), Op::Depart, {}});
    ev.push_back({p, Op::Arrive, {}});
  }
  LineConfig cfg;
  cfg.mode = LineMode::Dynamic;
  cfg.seed = 7;
  EmbeddingTrace tr = embed_linf(UpdateSequence::from_events(ev), m, cfg, false);
  CHECK_FALSE(audit_monotone(tr).has_value());
  CHECK(audit_contraction(tr, m).lambda_c == doctest::Approx(1.0));
}
