#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "monotree/components.hpp"
#include "monotree/rng.hpp"

using namespace monotree;

namespace {

// Simpson quadrature of the radius density over [s/16, s/8].
double pdf_integral(int j_count, double s, double upto) {
  int steps = 20000;
  double lo = s / 16;
  double h = (upto - lo) / steps;
  double acc = radius_pdf(lo, j_count, s) + radius_pdf(upto, j_count, s);
  for (int i = 1; i < steps; ++i)
    acc += radius_pdf(lo + i * h, j_count, s) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3;
}

// Numeric inverse of the quadrature CDF by bisection.
double quantile_oracle(double u, int j_count, double s) {
  double lo = s / 16, hi = s / 8;
  for (int it = 0; it < 100; ++it) {
    double mid = (lo + hi) / 2;
    if (pdf_integral(j_count, s, mid) < u)
      lo = mid;
    else
      hi = mid;
  }
  return (lo + hi) / 2;
}

}  // namespace

TEST_CASE("radius sampler endpoints and normalization") {
  for (int jc : {1, 3, 16}) {
    CHECK(radius_quantile(0.0, jc, 1.0) == doctest::Approx(1.0 / 16).epsilon(1e-12));
    CHECK(radius_quantile(1 - 1e-12, jc, 1.0) == doctest::Approx(1.0 / 8).epsilon(1e-9));
    CHECK(pdf_integral(jc, 1.0, 1.0 / 8) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(radius_cdf(1.0 / 8, jc, 1.0) == doctest::Approx(1.0));
    CHECK(radius_cdf(1.0 / 16, jc, 1.0) == doctest::Approx(0.0));
  }
  for (int jc : {1, 4}) {
    double s = 2.0;
    CHECK(radius_quantile(0.0, jc, s) == doctest::Approx(s / 16));
  }
}

TEST_CASE("radius quantile matches the quadrature oracle") {
  // Frozen: chi = 2 (one component), s = 1, u = 0.5 -> z ~ 0.0837.
  double z = radius_quantile(0.5, 1, 1.0);
  CHECK(z == doctest::Approx(0.0837).epsilon(1e-3));
  for (double u : {0.1, 0.5, 0.9})
    for (int jc : {1, 4, 16}) {
      CHECK(radius_quantile(u, jc, 1.0) ==
            doctest::Approx(quantile_oracle(u, jc, 1.0)).epsilon(1e-6));
      CHECK(radius_cdf(radius_quantile(u, jc, 1.0), jc, 1.0) ==
            doctest::Approx(u).epsilon(1e-10));
    }
}

TEST_CASE("radius sampler KS distance (quick)") {
  int n = 20000;
  for (int jc : {1, 16}) {
    std::vector<double> xs;
    xs.reserve(n);
    for (int i = 0; i < n; ++i)
      xs.push_back(sample_radius(42, 0, 0, i, 1, jc, 1.0));
    std::sort(xs.begin(), xs.end());
    double ks = 0;
    for (int i = 0; i < n; ++i) {
      double f = radius_cdf(xs[i], jc, 1.0);
      ks = std::max(ks, std::abs(f - (i + 1.0) / n));
      ks = std::max(ks, std::abs(f - static_cast<double>(i) / n));
    }
    CHECK(ks < 0.02);
  }
}

TEST_CASE("cuts predicate") {
  CHECK(cuts(3, 5, 4));
  CHECK_FALSE(cuts(3, 5, 5));  // closed membership: both inside
  CHECK_FALSE(cuts(3, 5, 2));  // both outside
  CHECK(cuts(5, 3, 4));        // symmetric in the pair
  for (double r : {0.0, 1.0, 3.0, 5.0, 7.5})
    CHECK_FALSE(cuts(4, 4, r));  // equal distances never cut
}

TEST_CASE("assignment picks the earliest-birth covering component") {
  MetricSpace m = MetricSpace::from_line({0, 1, 10});
  ScaleState st(5, 32.0);
  SUBCASE("single component centered at u") {
    st.add_component(0, 2.0, 1);
    CHECK(st.assign(m, 0) == 0);
  }
  SUBCASE("two covering components: earliest birth wins") {
    st.add_component(1, 2.0, 3);  // covers 0 (d=1 <= 2)
    st.add_component(0, 2.0, 7);
    CHECK(st.assign(m, 0) == 0);  // component ids in birth order
  }
  SUBCASE("outside the first ball, inside the second") {
    st.add_component(2, 4.0, 1);  // center coord 10, d(10, 0) = 10 > 4
    st.add_component(0, 2.0, 2);
    CHECK(st.assign(m, 0) == 1);
  }
  SUBCASE("no covering component is an internal error") {
    st.add_component(2, 1.0, 1);
    CHECK_THROWS_AS(st.assign(m, 0), ComponentError);
  }
}

TEST_CASE("merge_groups") {
  MetricSpace m = MetricSpace::from_line({0, 1, 2});
  ScaleState st(5, 32.0);
  st.add_component(0, 2.0, 1);
  st.add_component(1, 2.0, 2);
  st.add_component(2, 2.0, 3);
  st.merge_groups(0, 0);  // no-op
  CHECK_FALSE(st.same_group(0, 1));
  st.merge_groups(0, 1);
  CHECK(st.same_group(0, 1));
  st.merge_groups(1, 2);
  CHECK(st.same_group(0, 2));  // transitivity
  CHECK_THROWS_AS(st.merge_groups(0, 9), ComponentError);
}

TEST_CASE("prune_empty") {
  MetricSpace m = MetricSpace::from_line({0, 1, 10});
  SUBCASE("all points of a component depart -> removed") {
    ScaleState st(5, 32.0);
    st.add_component(0, 0.5, 1);
    st.assign(m, 0);
    auto removed = st.prune_empty(0);
    CHECK(removed == std::vector<int>{0});
  }
  SUBCASE("center departs but another alive point is assigned -> stays") {
    ScaleState st(5, 32.0);
    st.add_component(0, 1.5, 1);  // covers points 0 and 1
    st.assign(m, 0);
    st.assign(m, 1);
    auto removed = st.prune_empty(0);  // the center leaves
    CHECK(removed.empty());
    CHECK(st.component_of(1) == 0);
  }
  SUBCASE("no departures -> nothing removed") {
    ScaleState st(5, 32.0);
    st.add_component(0, 0.5, 1);
    st.assign(m, 0);
    auto removed = st.prune_empty(2);  // departing point had no assignment
    CHECK(removed.empty());
  }
}

TEST_CASE("component span bounded by s/4") {
  // radii live in [s/16, s/8], so any component's reach is <= s/4
  for (int jc : {1, 2, 8, 64})
    for (int i = 0; i < 200; ++i) {
      double r = sample_radius(1, 3, 0, i, 1, jc, 8.0);
      CHECK(r >= 8.0 / 16);
      CHECK(r <= 8.0 / 8);
    }
}
