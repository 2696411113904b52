#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "monotree/types.hpp"

namespace monotree {

enum class MetricKind : std::uint8_t { Matrix, Line, Lp };

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Finite point set with a symmetric nonnegative distance oracle. Explicit
// matrices are validated eagerly (symmetry, zero diagonal, triangle
// inequality); coordinate forms are metrics by construction.
class MetricSpace {
 public:
  static MetricSpace from_matrix(std::vector<std::vector<double>> rows);
  static MetricSpace from_line(std::vector<double> coords);
  // p in {1, 2} or 0 meaning the max norm.
  static MetricSpace from_lp(std::vector<std::vector<double>> coords, int p);

  MetricKind kind() const { return kind_; }
  int size() const { return n_; }
  int dim() const { return dim_; }
  int lp_p() const { return lp_p_; }  // 0 = max norm
  double dist(PointId u, PointId v) const;
  double coord(PointId u, int d = 0) const { return coords_[u * dim_ + d]; }
  std::span<const double> coords_of(PointId u) const {
    return {coords_.data() + u * dim_, static_cast<std::size_t>(dim_)};
  }

 private:
  MetricKind kind_ = MetricKind::Line;
  int n_ = 0;
  int dim_ = 1;
  int lp_p_ = 0;
  std::vector<double> coords_;  // line: 1/point, lp: dim/point
  std::vector<double> mat_;     // matrix kind, row-major n*n
};

struct MetricStats {
  double d_max = 0;
  double d_min = 0;  // smallest nonzero distance
  double aspect_ratio = 0;
};

// d_max, d_min and aspect ratio over a subset of at least two points.
MetricStats metric_stats(const MetricSpace& m, std::span<const PointId> subset);

// The integer scales j such that some pair of the subset has distance in
// [eps * 2^(j-1), 2^j). eps in (0, 1].
std::set<int> relevant_scales(const MetricSpace& m, std::span<const PointId> subset,
                              double eps);

// Counts the scales k hit by subset sums with an offset:
//   S(a) = { k : exists nonempty I, 0 <= x < a_0
//            with x + sum_{i in I} a_i in [2^(k-1), 2^k) }.
// Enumerates all subsets (len(a) <= 20) and sweeps the offset interval.
// Returns (|S(a)|, 2 * len(a)); the count never exceeds the bound.
std::pair<int, int> subset_scale_count_bound(std::span<const double> a);

// ---- update-sequence files ------------------------------------------------
//
// JSON lines. The header declares the metric kind:
//   {"kind":"line"|"lp"|"matrix","p":...,"dim":...}
// followed by one event per line:
//   {"op":"+","id":K,"coords":[...]}   (line / lp arrivals)
//   {"op":"+","id":K,"row":[...]}      (matrix arrivals; row holds the
//                                       distances to points 0..K-1)
//   {"op":"-","id":K}

struct SequenceFile {
  UpdateSequence sequence;
  MetricSpace metric;
};

SequenceFile load_sequence_file(const std::string& path);
SequenceFile parse_sequence_stream(std::istream& in);
void save_sequence_file(const std::string& path, const UpdateSequence& seq,
                        const MetricSpace& metric);

}  // namespace monotree
