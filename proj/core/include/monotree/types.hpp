#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace monotree {

// Stable index of a metric point. Ids are dense: the k-th distinct point to
// ever arrive gets id k-1. A point that departs and later re-arrives keeps
// its id (same underlying metric point).
using PointId = std::int32_t;

enum class Op : std::uint8_t { Arrive, Depart };

struct UpdateEvent {
  PointId point = 0;
  Op op = Op::Arrive;
  // Arrival payload: coordinates (line / lp metrics) or the distance row to
  // all previously seen points (explicit-matrix metrics). Empty otherwise.
  std::vector<double> payload;
};

// An ordered arrival/departure sequence together with the derived per-step
// alive sets L_t, seen sets V_t, length n and width l = max_t |L_t|.
class UpdateSequence {
 public:
  UpdateSequence() = default;
  // Validates: departures reference alive points, no double arrival without
  // a departure in between, ids dense in first-arrival order.
  static UpdateSequence from_events(std::vector<UpdateEvent> events);

  const std::vector<UpdateEvent>& events() const { return events_; }
  int length() const { return static_cast<int>(events_.size()); }
  int width() const { return width_; }
  int point_count() const { return point_count_; }

  // L_t / V_t after the first t events, t in [0, length()], sorted by id.
  const std::vector<PointId>& alive_after(int t) const { return alive_[t]; }
  std::vector<PointId> seen_after(int t) const;

  // 1-based arrival count of this point up to and including event t (0-based
  // event index). Used to key replayable randomness per (point, arrival).
  int arrival_ordinal(int event_index) const { return ordinals_[event_index]; }

  bool arrivals_only() const { return arrivals_only_; }

 private:
  std::vector<UpdateEvent> events_;
  std::vector<std::vector<PointId>> alive_;  // length()+1 entries
  std::vector<int> ordinals_;
  int width_ = 0;
  int point_count_ = 0;
  bool arrivals_only_ = true;
};

struct SequenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace monotree
