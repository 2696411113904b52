#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "monotree/metric.hpp"
#include "monotree/types.hpp"

namespace monotree {

// Lower-bound instance generators: fixed width-3 and width-O(l) sequences on
// the line, and one adaptive adversary that interrogates a strict embedder.

struct GeneratedSequence {
  UpdateSequence sequence;
  MetricSpace metric;  // line metric over the generated coordinates
};

// Query protocol for the adaptive adversary: after each arrival the embedder
// under test reports its current target distance for any embedded pair, and
// those answers must never change later (strictness is verified).
class StrictEmbedderApi {
 public:
  virtual ~StrictEmbedderApi() = default;
  virtual void arrive(PointId id, double coordinate) = 0;
  virtual double target_distance(PointId u, PointId v) = 0;
};

struct AdversaryResult {
  GeneratedSequence instance;
  PointId witness_u = 0, witness_v = 0;
  double witness_source_dist = 0;
  double witness_target_dist = 0;
  double expansion = 0;
};

// Median attack against deterministic strict embedders: keeps a tracked pair
// whose target distance never drops below the first pair's while its source
// distance halves every step, forcing expansion >= 2^(n-2) after n points.
// Departures of untracked points keep the emitted sequence at width <= 3.
// Throws StrictnessViolation if the embedder changes an answered distance.
AdversaryResult strict_det_adversary(StrictEmbedderApi& embedder, int n);

struct StrictnessViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Random width-3 walk: v_1 = 0, v_2 = 1, v_3 = 1/2, then
// v_{i+1} = v_i + b_i 2^{-(i-1)} with b_i = +-1; after placing v_i only
// v_i and the surviving endpoint stay alive. The alive set always equals
// {l_i, v_i, r_i} with l_i, r_i = v_i -+ 2^{-i+2} (asserted).
GeneratedSequence strict_rand_sequence(int n, std::uint64_t seed);

// Width-3 sliding triple: points arrive at 0, 1, 2, then the middle point
// departs and a point two to the right arrives, until coordinate n appears.
// Any deterministic monotone non-contractive embedding expands some adjacent
// pair by at least n.
GeneratedSequence monotone_det_dynamic_sequence(int n);

// Two points sweep 0..2^l; before each move the alive set is adjusted to the
// encompassing points E(x) plus the movers. Departures are emitted first in
// ascending coordinate order, then arrivals ascending. The evaluation
// distribution is uniform over (x, x+1, t_{x+1}).
struct EncompassingInstance {
  GeneratedSequence instance;
  // step index (1-based, into the sequence) at which the configuration for
  // mover pair (x, x+1) is complete; indexed by x = 0..2^l-1
  std::vector<int> pair_time;
  // point ids of the coordinates 0..2^l
  std::vector<PointId> coord_point;
};

EncompassingInstance encompassing_sequence(int l, std::uint64_t seed = 0);

// E(x) for a given ladder height l: the union over j <= l of
// {floor(x/2^j) 2^j, (floor(x/2^j)+1) 2^j}.
std::vector<std::int64_t> encompassing_points(std::int64_t x, int l);

}  // namespace monotree
