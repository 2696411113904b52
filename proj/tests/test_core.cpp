#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "monotree/metric.hpp"
#include "monotree/rng.hpp"
#include "monotree/types.hpp"

using namespace monotree;

namespace {

// Brute-force oracle for relevant_scales: scan an ample level range.
std::set<int> scales_oracle(const MetricSpace& m, const std::vector<PointId>& pts,
                            double eps) {
  std::set<int> out;
  for (int j = -90; j <= 90; ++j)
    for (std::size_t a = 0; a < pts.size(); ++a)
      for (std::size_t b = a + 1; b < pts.size(); ++b) {
        double d = m.dist(pts[a], pts[b]);
        if (d > 0 && eps * std::ldexp(1.0, j - 1) <= d && d < std::ldexp(1.0, j))
          out.insert(j);
      }
  return out;
}

// Interval-sweep oracle for the subset-sum scale count, written against the
// definition directly (dense offset sampling plus exact interval ends).
int subset_count_oracle(const std::vector<double>& a) {
  std::set<int> ks;
  const std::uint32_t full = (1u << a.size()) - 1;
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (mask & (1u << i)) sum += a[i];
    for (int k = -90; k <= 90; ++k) {
      double lo = std::ldexp(1.0, k - 1), hi = std::ldexp(1.0, k);
      // [sum, sum + a0) intersects [lo, hi)?
      if (sum < hi && lo < sum + a[0]) ks.insert(k);
    }
  }
  return static_cast<int>(ks.size());
}

}  // namespace

TEST_CASE("build_metric validates explicit matrices") {
  CHECK_NOTHROW(MetricSpace::from_matrix({{0, 1}, {1, 0}}));
  CHECK_THROWS_AS(MetricSpace::from_matrix({{0, 1}, {2, 0}}), MetricError);
  CHECK_THROWS_AS(MetricSpace::from_matrix({{0, -1}, {-1, 0}}), MetricError);
  CHECK_THROWS_AS(MetricSpace::from_matrix({{0, 1, 5}, {1, 0, 1}, {5, 1, 0}}),
                  MetricError);  // triangle violation
  CHECK_THROWS_AS(MetricSpace::from_matrix({{0, 1}, {1, 0, 3}}), MetricError);
}

TEST_CASE("line and lp coordinate metrics") {
  MetricSpace line = MetricSpace::from_line({0, 1, 4});
  CHECK(line.dist(0, 2) == doctest::Approx(4));
  CHECK(line.dist(1, 2) == doctest::Approx(3));
  MetricSpace l1 = MetricSpace::from_lp({{0, 0}, {1, 2}}, 1);
  CHECK(l1.dist(0, 1) == doctest::Approx(3));
  MetricSpace l2 = MetricSpace::from_lp({{0, 0}, {3, 4}}, 2);
  CHECK(l2.dist(0, 1) == doctest::Approx(5));
  MetricSpace li = MetricSpace::from_lp({{0, 0}, {3, 4}}, 0);
  CHECK(li.dist(0, 1) == doctest::Approx(4));
  CHECK_THROWS_AS(MetricSpace::from_lp({{0}, {1}}, 3), MetricError);
  CHECK_THROWS_AS(MetricSpace::from_lp({{0, 0}, {1}}, 2), MetricError);
}

TEST_CASE("metric_stats") {
  MetricSpace line = MetricSpace::from_line({0, 1, 4});
  std::vector<PointId> pts{0, 1, 2};
  MetricStats st = metric_stats(line, pts);
  CHECK(st.d_max == doctest::Approx(4));
  CHECK(st.d_min == doctest::Approx(1));
  CHECK(st.aspect_ratio == doctest::Approx(4));

  MetricSpace two = MetricSpace::from_line({0, 3});
  std::vector<PointId> pair{0, 1};
  MetricStats st2 = metric_stats(two, pair);
  CHECK(st2.d_max == doctest::Approx(3));
  CHECK(st2.d_min == doctest::Approx(3));
  CHECK(st2.aspect_ratio == doctest::Approx(1));

  std::vector<PointId> one{0};
  CHECK_THROWS_AS(metric_stats(two, one), MetricError);
  MetricSpace zeros = MetricSpace::from_line({5, 5});
  CHECK_THROWS_AS(metric_stats(zeros, pair), MetricError);
}

TEST_CASE("relevant_scales matches the definition") {
  MetricSpace two = MetricSpace::from_line({0, 1});
  std::vector<PointId> p2{0, 1};
  CHECK(relevant_scales(two, p2, 1.0) == std::set<int>{1});

  MetricSpace three = MetricSpace::from_line({0, 1, 4});
  std::vector<PointId> p3{0, 1, 2};
  CHECK(relevant_scales(three, p3, 1.0) == std::set<int>{1, 2, 3});

  MetricSpace eq = MetricSpace::from_line({0, 5, 10});  // distances 5,5,10
  std::vector<PointId> pe{0, 1};
  CHECK(relevant_scales(eq, pe, 1.0).size() == 1);
}

TEST_CASE("relevant_scales equals brute force on random sets") {
  for (int trial = 0; trial < 60; ++trial) {
    RngStream rng(99, {static_cast<std::uint64_t>(trial)});
    int n = 2 + static_cast<int>(rng.uniform_below(11));
    std::vector<double> coords;
    for (int i = 0; i < n; ++i)
      coords.push_back(std::ldexp(rng.uniform(), static_cast<int>(rng.uniform_below(20)) - 10));
    MetricSpace m = MetricSpace::from_line(coords);
    std::vector<PointId> pts(n);
    for (int i = 0; i < n; ++i) pts[i] = i;
    double eps = trial % 3 == 0 ? 1.0 : 0.05 + 0.9 * (trial % 7) / 7.0;
    CHECK(relevant_scales(m, pts, eps) == scales_oracle(m, pts, eps));
    // MST-based bound at eps = 1
    CHECK(static_cast<int>(relevant_scales(m, pts, 1.0).size()) <= 2 * (n - 1));
  }
}

TEST_CASE("subset_scale_count_bound") {
  // Frozen from the sweep oracle: a = [1] hits only [1,2) -> count 1.
  std::vector<double> one{1.0};
  auto [c1, b1] = subset_scale_count_bound(one);
  CHECK(c1 == subset_count_oracle(one));
  CHECK(c1 == 1);
  CHECK(b1 == 2);

  std::vector<double> two{1.0, 1.0};
  auto [c2, b2] = subset_scale_count_bound(two);
  CHECK(c2 == subset_count_oracle(two));
  CHECK(c2 <= 4);
  CHECK(b2 == 4);

  std::vector<double> empty;
  CHECK_THROWS_AS(subset_scale_count_bound(empty), MetricError);
  std::vector<double> big(21, 1.0);
  CHECK_THROWS_AS(subset_scale_count_bound(big), MetricError);

  for (int trial = 0; trial < 40; ++trial) {
    RngStream rng(7, {static_cast<std::uint64_t>(trial)});
    int n = 1 + static_cast<int>(rng.uniform_below(8));
    std::vector<double> a;
    for (int i = 0; i < n; ++i)
      a.push_back(std::ldexp(0.1 + rng.uniform(), static_cast<int>(rng.uniform_below(8)) - 4));
    auto [count, bound] = subset_scale_count_bound(a);
    CHECK(count == subset_count_oracle(a));
    CHECK(count <= bound);
  }
}

TEST_CASE("update sequence replay invariants") {
  std::vector<UpdateEvent> ev{
      {0, Op::Arrive, {0.0}}, {1, Op::Arrive, {1.0}}, {0, Op::Depart, {}},
      {2, Op::Arrive, {2.0}}, {0, Op::Arrive, {}},  // re-arrival keeps the id
  };
  UpdateSequence seq = UpdateSequence::from_events(ev);
  CHECK(seq.length() == 5);
  CHECK(seq.width() == 3);
  CHECK(seq.point_count() == 3);
  CHECK(seq.alive_after(0).empty());
  CHECK(seq.alive_after(3) == std::vector<PointId>{1});
  CHECK(seq.alive_after(5) == std::vector<PointId>{0, 1, 2});
  CHECK(seq.arrival_ordinal(0) == 1);
  CHECK(seq.arrival_ordinal(4) == 2);
  CHECK_FALSE(seq.arrivals_only());

  CHECK_THROWS_AS(UpdateSequence::from_events({{0, Op::Depart, {}}}), SequenceError);
  CHECK_THROWS_AS(
      UpdateSequence::from_events({{0, Op::Arrive, {}}, {0, Op::Arrive, {}}}),
      SequenceError);
  CHECK_THROWS_AS(UpdateSequence::from_events({{1, Op::Arrive, {}}}), SequenceError);
}

TEST_CASE("sequence file round trip") {
  MetricSpace m = MetricSpace::from_line({0, 1, 4});
  std::vector<UpdateEvent> ev{{0, Op::Arrive, {0.0}},
                              {1, Op::Arrive, {1.0}},
                              {2, Op::Arrive, {4.0}},
                              {1, Op::Depart, {}}};
  UpdateSequence seq = UpdateSequence::from_events(ev);
  std::string path = "/tmp/monotree_test_seq.jsonl";
  save_sequence_file(path, seq, m);
  SequenceFile sf = load_sequence_file(path);
  CHECK(sf.sequence.length() == 4);
  CHECK(sf.sequence.width() == 3);
  CHECK(sf.metric.dist(0, 2) == doctest::Approx(4));

  // matrix payloads are rows to previously seen points
  MetricSpace mm = MetricSpace::from_matrix({{0, 1, 2}, {1, 0, 1}, {2, 1, 0}});
  std::vector<UpdateEvent> ev2{{0, Op::Arrive, {}}, {1, Op::Arrive, {}}, {2, Op::Arrive, {}}};
  save_sequence_file(path, UpdateSequence::from_events(ev2), mm);
  SequenceFile sf2 = load_sequence_file(path);
  CHECK(sf2.metric.dist(0, 2) == doctest::Approx(2));
  CHECK(sf2.metric.dist(1, 2) == doctest::Approx(1));
}
