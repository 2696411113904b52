#include "monotree/metric.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace monotree {

namespace {
constexpr double kValTol = 1e-9;  // absolute tolerance for matrix validation
}

MetricSpace MetricSpace::from_matrix(std::vector<std::vector<double>> rows) {
  MetricSpace m;
  m.kind_ = MetricKind::Matrix;
  m.n_ = static_cast<int>(rows.size());
  m.dim_ = 0;
  m.mat_.assign(static_cast<std::size_t>(m.n_) * m.n_, 0.0);
  for (int i = 0; i < m.n_; ++i) {
    if (static_cast<int>(rows[i].size()) != m.n_)
      throw MetricError("distance matrix is not square");
    for (int j = 0; j < m.n_; ++j) {
      double d = rows[i][j];
      if (!(d >= 0) || !std::isfinite(d))
        throw MetricError("negative or non-finite distance entry");
      m.mat_[i * m.n_ + j] = d;
    }
  }
  for (int i = 0; i < m.n_; ++i) {
    if (m.mat_[i * m.n_ + i] > kValTol)
      throw MetricError("nonzero diagonal entry");
    for (int j = i + 1; j < m.n_; ++j)
      if (std::abs(m.mat_[i * m.n_ + j] - m.mat_[j * m.n_ + i]) > kValTol)
        throw MetricError("asymmetric distance matrix");
  }
  for (int k = 0; k < m.n_; ++k)
    for (int i = 0; i < m.n_; ++i)
      for (int j = 0; j < m.n_; ++j)
        if (m.mat_[i * m.n_ + j] > m.mat_[i * m.n_ + k] + m.mat_[k * m.n_ + j] + kValTol)
          throw MetricError("triangle inequality violated at (" + std::to_string(i) +
                            "," + std::to_string(j) + "," + std::to_string(k) + ")");
  return m;
}

MetricSpace MetricSpace::from_line(std::vector<double> coords) {
  MetricSpace m;
  m.kind_ = MetricKind::Line;
  m.n_ = static_cast<int>(coords.size());
  m.dim_ = 1;
  for (double c : coords)
    if (!std::isfinite(c)) throw MetricError("non-finite line coordinate");
  m.coords_ = std::move(coords);
  return m;
}

MetricSpace MetricSpace::from_lp(std::vector<std::vector<double>> coords, int p) {
  if (p != 1 && p != 2 && p != 0)
    throw MetricError("unsupported norm exponent (want 1, 2 or 0 for max)");
  MetricSpace m;
  m.kind_ = MetricKind::Lp;
  m.lp_p_ = p;
  m.n_ = static_cast<int>(coords.size());
  if (m.n_ == 0) throw MetricError("empty coordinate list");
  m.dim_ = static_cast<int>(coords[0].size());
  if (m.dim_ == 0) throw MetricError("zero-dimensional coordinates");
  m.coords_.reserve(static_cast<std::size_t>(m.n_) * m.dim_);
  for (const auto& c : coords) {
    if (static_cast<int>(c.size()) != m.dim_)
      throw MetricError("ragged coordinate list");
    for (double x : c) {
      if (!std::isfinite(x)) throw MetricError("non-finite coordinate");
      m.coords_.push_back(x);
    }
  }
  return m;
}

double MetricSpace::dist(PointId u, PointId v) const {
  switch (kind_) {
    case MetricKind::Matrix:
      return mat_[static_cast<std::size_t>(u) * n_ + v];
    case MetricKind::Line:
      return std::abs(coords_[u] - coords_[v]);
    case MetricKind::Lp: {
      const double* a = coords_.data() + static_cast<std::size_t>(u) * dim_;
      const double* b = coords_.data() + static_cast<std::size_t>(v) * dim_;
      if (lp_p_ == 1) {
        double s = 0;
        for (int d = 0; d < dim_; ++d) s += std::abs(a[d] - b[d]);
        return s;
      }
      if (lp_p_ == 2) {
        double s = 0;
        for (int d = 0; d < dim_; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
        return std::sqrt(s);
      }
      double s = 0;
      for (int d = 0; d < dim_; ++d) s = std::max(s, std::abs(a[d] - b[d]));
      return s;
    }
  }
  return 0;
}

MetricStats metric_stats(const MetricSpace& m, std::span<const PointId> subset) {
  if (subset.size() < 2) throw MetricError("metric_stats needs at least 2 points");
  MetricStats st;
  st.d_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < subset.size(); ++i)
    for (std::size_t j = i + 1; j < subset.size(); ++j) {
      double d = m.dist(subset[i], subset[j]);
      st.d_max = std::max(st.d_max, d);
      if (d > 0) st.d_min = std::min(st.d_min, d);
    }
  if (!std::isfinite(st.d_min))
    throw MetricError("all pairwise distances are zero; d_min undefined");
  st.aspect_ratio = st.d_max / st.d_min;
  return st;
}

std::set<int> relevant_scales(const MetricSpace& m, std::span<const PointId> subset,
                              double eps) {
  if (!(eps > 0) || eps > 1) throw MetricError("eps must lie in (0,1]");
  if (subset.size() < 2) throw MetricError("relevant_scales needs at least 2 points");
  std::set<int> out;
  for (std::size_t i = 0; i < subset.size(); ++i)
    for (std::size_t j = i + 1; j < subset.size(); ++j) {
      double d = m.dist(subset[i], subset[j]);
      if (d <= 0) continue;
      // d in [eps*2^(k-1), 2^k)  <=>  log2(d) < k <= log2(2d/eps)
      int lo = static_cast<int>(std::floor(std::log2(d))) + 1;
      while (std::ldexp(1.0, lo - 1) > d) --lo;  // guard rounding
      while (std::ldexp(1.0, lo) <= d) ++lo;
      for (int k = lo; eps * std::ldexp(1.0, k - 1) <= d; ++k)
        if (d < std::ldexp(1.0, k)) out.insert(k);
    }
  return out;
}

std::pair<int, int> subset_scale_count_bound(std::span<const double> a) {
  if (a.empty()) throw MetricError("empty input");
  if (a.size() > 20) throw MetricError("input too large for subset enumeration");
  for (double v : a)
    if (!(v > 0)) throw MetricError("entries must be positive");
  const double a0 = a[0];
  std::set<int> scales;
  const std::uint32_t full = (1u << a.size()) - 1;
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (mask & (1u << i)) sum += a[i];
    // offset x in [0, a0): values sweep [sum, sum + a0)
    int k = static_cast<int>(std::floor(std::log2(sum))) + 1;
    while (std::ldexp(1.0, k - 1) > sum) --k;
    while (std::ldexp(1.0, k) <= sum) ++k;
    for (; std::ldexp(1.0, k - 1) < sum + a0; ++k) scales.insert(k);
  }
  return {static_cast<int>(scales.size()), 2 * static_cast<int>(a.size())};
}

// ---- sequence files ---------------------------------------------------------

namespace {

using nlohmann::json;

const char* kind_name(MetricKind k) {
  switch (k) {
    case MetricKind::Matrix: return "matrix";
    case MetricKind::Line: return "line";
    case MetricKind::Lp: return "lp";
  }
  return "?";
}

}  // namespace

SequenceFile parse_sequence_stream(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SequenceError("empty sequence file");
  json header = json::parse(line);
  std::string kind = header.at("kind").get<std::string>();
  int p = header.value("p", 0);
  int dim = header.value("dim", 1);

  std::vector<UpdateEvent> events;
  std::vector<std::vector<double>> coords;   // per point
  std::vector<std::vector<double>> rows;     // matrix lower rows per point
  int seen = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    UpdateEvent e;
    e.point = j.at("id").get<PointId>();
    e.op = j.at("op").get<std::string>() == "+" ? Op::Arrive : Op::Depart;
    if (e.op == Op::Arrive) {
      if (e.point == seen) {  // first arrival carries the payload
        if (kind == "matrix") {
          auto row = j.at("row").get<std::vector<double>>();
          if (static_cast<int>(row.size()) != seen)
            throw SequenceError("matrix arrival row must list distances to the " +
                                std::to_string(seen) + " previously seen points");
          e.payload = row;
          rows.push_back(std::move(row));
        } else {
          auto c = j.at("coords").get<std::vector<double>>();
          if (static_cast<int>(c.size()) != (kind == "line" ? 1 : dim))
            throw SequenceError("malformed coordinates for point " +
                                std::to_string(e.point));
          e.payload = c;
          coords.push_back(std::move(c));
        }
        ++seen;
      }
    }
    events.push_back(std::move(e));
  }

  SequenceFile out;
  out.sequence = UpdateSequence::from_events(std::move(events));
  if (kind == "matrix") {
    int n = seen;
    std::vector<std::vector<double>> full(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j) full[i][j] = full[j][i] = rows[i][j];
    out.metric = MetricSpace::from_matrix(std::move(full));
  } else if (kind == "line") {
    std::vector<double> xs(seen);
    for (int i = 0; i < seen; ++i) xs[i] = coords[i][0];
    out.metric = MetricSpace::from_line(std::move(xs));
  } else if (kind == "lp") {
    out.metric = MetricSpace::from_lp(std::move(coords), p);
  } else {
    throw SequenceError("unknown metric kind '" + kind + "'");
  }
  return out;
}

SequenceFile load_sequence_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SequenceError("cannot open " + path);
  return parse_sequence_stream(in);
}

void save_sequence_file(const std::string& path, const UpdateSequence& seq,
                        const MetricSpace& metric) {
  std::ofstream out(path);
  if (!out) throw SequenceError("cannot write " + path);
  json header;
  header["kind"] = kind_name(metric.kind());
  if (metric.kind() == MetricKind::Lp) {
    header["p"] = metric.lp_p();
    header["dim"] = metric.dim();
  }
  out << header.dump() << "\n";
  std::vector<bool> emitted(static_cast<std::size_t>(metric.size()), false);
  for (const UpdateEvent& e : seq.events()) {
    json j;
    j["op"] = e.op == Op::Arrive ? "+" : "-";
    j["id"] = e.point;
    if (e.op == Op::Arrive && !emitted[e.point]) {
      emitted[e.point] = true;
      if (metric.kind() == MetricKind::Matrix) {
        std::vector<double> row(e.point);
        for (PointId q = 0; q < e.point; ++q) row[q] = metric.dist(e.point, q);
        j["row"] = row;
      } else {
        std::vector<double> c(metric.coords_of(e.point).begin(),
                              metric.coords_of(e.point).end());
        j["coords"] = c;
      }
    }
    out << j.dump() << "\n";
  }
}

}  // namespace monotree
