#include <doctest.h>

#include <cmath>
#include <set>

#include "monotree/component_scale.hpp"
#include "monotree/harness.hpp"
#include "monotree/incremental.hpp"

using namespace monotree;

namespace {

UpdateSequence arrivals_for(const MetricSpace& m) {
  std::vector<UpdateEvent> ev;
  for (PointId p = 0; p < m.size(); ++p) ev.push_back({p, Op::Arrive, {}});
  return UpdateSequence::from_events(ev);
}

ComponentScaleConfig inc_cfg(double eps,
                             std::function<std::optional<double>(PointId, int)> radii = {}) {
  ComponentScaleConfig c;
  c.policy = ComponentScaleConfig::Policy::IncrementalDesignated;
  c.seed = 11;
  c.epsilon = [eps](int) { return eps; };
  c.radius_override = std::move(radii);
  return c;
}

}  // namespace

TEST_CASE("step_scale: far pair never merges") {
  // scale 16: points at distance 40 > s stay in different clusters
  MetricSpace m = MetricSpace::from_line({0, 40});
  ComponentScale scale(4, m, inc_cfg(1.0), nullptr);
  scale.arrival(0, 1);
  scale.arrival(1, 1);
  CHECK_FALSE(scale.same_cluster(0, 1));
  CHECK_FALSE(scale.designated().has_value());
}

TEST_CASE("step_scale: close pair split by its own components is merged") {
  // scale s = 16, radii in [1, 2]; the pair at distance 1.5 is split by the
  // first ball whenever r0 < 1.5, and then the designated component absorbs.
  MetricSpace m = MetricSpace::from_line({0, 1.5});
  auto radii = [](PointId p, int) -> std::optional<double> {
    return p == 0 ? 1.2 : 1.1;
  };
  ComponentScale scale(4, m, inc_cfg(0.25, radii), nullptr);  // eps*s = 4
  scale.arrival(0, 1);
  scale.arrival(1, 1);
  CHECK(scale.same_cluster(0, 1));
  CHECK(scale.designated().has_value());
  CHECK(scale.state().component(*scale.designated()).center == 0);
}

TEST_CASE("step_scale: merge rejected while the designated slot is busy") {
  // Two distant close pairs at scale 16; the first pair claims the slot, the
  // second pair's merge is rejected and it stays split.
  MetricSpace m = MetricSpace::from_line({0, 1.5, 8, 9.5});
  auto radii = [](PointId p, int) -> std::optional<double> {
    switch (p) {
      case 0: return 1.2;   // cuts (0, 1.5)
      case 1: return 1.1;
      case 2: return 1.3;   // cuts (8, 9.5)
      default: return 1.0;
    }
  };
  ComponentScale scale(4, m, inc_cfg(0.25, radii), nullptr);
  for (PointId p = 0; p < 4; ++p) scale.arrival(p, 1);
  CHECK(scale.same_cluster(0, 1));      // first pair merged
  CHECK_FALSE(scale.same_cluster(2, 3));  // second pair rejected
  CHECK(scale.degenerate_designations() == 0);
}

TEST_CASE("embed_known_n on one and two points") {
  MetricSpace one = MetricSpace::from_line({0});
  IncrementalConfig cfg;
  cfg.seed = 5;
  EmbeddingTrace t1 = embed_known_n(arrivals_for(one), one, cfg, true);
  CHECK(t1.snapshots.size() == 1);
  CHECK(t1.snapshots[0].alive.size() == 1);
  CHECK(t1.snapshots[0].tree->leaves().size() == 1);

  MetricSpace two = MetricSpace::from_line({0, 1});
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    IncrementalConfig c2;
    c2.seed = seed;
    EmbeddingTrace t2 = embed_known_n(arrivals_for(two), two, c2, true);
    double d = t2.snapshots.back().dist_at(0, 1);
    CHECK(d >= 1.0);
    double lg = std::log2(d);
    CHECK(lg == doctest::Approx(std::round(lg)));  // a power of two
    // the pair co-clusters at the first scale whose first ball covers both:
    // radii lie in [s/16, s/8], so s = 16 is covering and s = 8 is not a.s.
    CHECK(d <= 16.0);
  }
}

TEST_CASE("embed_known_n trace is monotone and non-contractive") {
  Instance inst = gen_instance("uniform-line", {.n = 24}, 77);
  IncrementalConfig cfg;
  cfg.seed = 9;
  EmbeddingTrace tr = embed_known_n(inst.sequence, inst.metric, cfg, false);
  CHECK_FALSE(audit_monotone(tr).has_value());
  ContractionReport rep = audit_contraction(tr, inst.metric);
  CHECK(rep.lambda_c == doctest::Approx(1.0));
  CHECK(rep.lambda_e >= 1.0);
}

TEST_CASE("embed_known_n handles departures as prunes") {
  Instance inst = gen_instance("sliding-window", {.n = 16, .width = 4}, 3);
  IncrementalConfig cfg;
  cfg.seed = 13;
  EmbeddingTrace tr = embed_known_n(inst.sequence, inst.metric, cfg, false);
  CHECK_FALSE(audit_monotone(tr).has_value());
  CHECK(audit_contraction(tr, inst.metric).lambda_c == doctest::Approx(1.0));
}

TEST_CASE("arrivals beyond the declared budget fail") {
  MetricSpace m = MetricSpace::from_line({0, 1, 2});
  IncrementalConfig cfg;
  cfg.n_known = 2;
  CHECK_THROWS_AS(embed_known_n(arrivals_for(m), m, cfg), SequenceError);
}

TEST_CASE("replay determinism: trace is a pure function of the seed") {
  Instance inst = gen_instance("uniform-line", {.n = 12}, 4);
  IncrementalConfig cfg;
  cfg.seed = 21;
  EmbeddingTrace a = embed_known_n(inst.sequence, inst.metric, cfg, false);
  EmbeddingTrace b = embed_known_n(inst.sequence, inst.metric, cfg, false);
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (std::size_t i = 0; i < a.snapshots.size(); ++i)
    CHECK(a.snapshots[i].dists == b.snapshots[i].dists);

  // prefix consistency: running a prefix yields the same snapshots
  std::vector<UpdateEvent> ev(inst.sequence.events().begin(),
                              inst.sequence.events().begin() + 6);
  UpdateSequence prefix = UpdateSequence::from_events(ev);
  EmbeddingTrace p = embed_known_n(prefix, inst.metric, cfg, false);
  for (std::size_t i = 0; i < p.snapshots.size(); ++i)
    CHECK(p.snapshots[i].dists == a.snapshots[i].dists);
}

TEST_CASE("unknown-n phase arithmetic") {
  CHECK(phase_of(1) == 1);
  CHECK(phase_of(4) == 1);
  CHECK(phase_of(5) == 2);
  CHECK(phase_of(16) == 2);
  CHECK(phase_of(17) == 3);
  CHECK(phase_of(256) == 3);
  CHECK(phase_guess(1) == doctest::Approx(4));
  CHECK(phase_guess(3) == doctest::Approx(256));
  CHECK(phase_epsilon(1) == doctest::Approx(std::pow(4.0, -6.0)));
}

TEST_CASE("embed_unknown_n tracks the contraction allowance") {
  Instance inst = gen_instance("uniform-line", {.n = 40}, 8);
  IncrementalConfig cfg;
  cfg.seed = 2;
  EmbeddingTrace tr = embed_unknown_n(inst.sequence, inst.metric, cfg, false);
  CHECK_FALSE(audit_monotone(tr).has_value());
  ContractionReport rep = audit_contraction(tr, inst.metric);
  // 40 arrivals: allowance 2*ceil(log2 log2 40) = 4
  CHECK(rep.lambda_c <= 4.0 + 1e-9);
  CHECK(tr.snapshots.back().alpha == doctest::Approx(4.0));
}

TEST_CASE("unknown-n behaves like known-n with eps=m1^-6 while t <= 4") {
  Instance inst = gen_instance("uniform-line", {.n = 4}, 6);
  IncrementalConfig u;
  u.seed = 31;
  EmbeddingTrace tu = embed_unknown_n(inst.sequence, inst.metric, u, false);
  IncrementalConfig k;
  k.seed = 31;
  k.epsilon = phase_epsilon(1);
  EmbeddingTrace tk = embed_known_n(inst.sequence, inst.metric, k, false);
  REQUIRE(tu.snapshots.size() == tk.snapshots.size());
  for (std::size_t i = 0; i < tu.snapshots.size(); ++i)
    CHECK(tu.snapshots[i].dists == tk.snapshots[i].dists);
}
