#include "monotree/types.hpp"

#include <algorithm>
#include <set>

namespace monotree {

UpdateSequence UpdateSequence::from_events(std::vector<UpdateEvent> events) {
  UpdateSequence seq;
  seq.events_ = std::move(events);
  seq.alive_.reserve(seq.events_.size() + 1);
  seq.alive_.push_back({});
  seq.ordinals_.resize(seq.events_.size(), 0);

  std::set<PointId> alive;
  std::vector<int> arrivals_of_point;
  int next_fresh_id = 0;

  for (std::size_t t = 0; t < seq.events_.size(); ++t) {
    const UpdateEvent& e = seq.events_[t];
    if (e.point < 0) throw SequenceError("negative point id at event " + std::to_string(t));
    if (e.op == Op::Arrive) {
      if (alive.count(e.point))
        throw SequenceError("point " + std::to_string(e.point) +
                            " arrives while alive at event " + std::to_string(t));
      if (e.point > next_fresh_id)
        throw SequenceError("point ids must be dense in first-arrival order; got " +
                            std::to_string(e.point) + " before " + std::to_string(next_fresh_id));
      if (e.point == next_fresh_id) {
        ++next_fresh_id;
        arrivals_of_point.push_back(0);
      }
      alive.insert(e.point);
      seq.ordinals_[t] = ++arrivals_of_point[e.point];
    } else {
      if (!alive.count(e.point))
        throw SequenceError("departure of point " + std::to_string(e.point) +
                            " which is not alive at event " + std::to_string(t));
      alive.erase(e.point);
      seq.arrivals_only_ = false;
    }
    seq.alive_.emplace_back(alive.begin(), alive.end());
    seq.width_ = std::max(seq.width_, static_cast<int>(alive.size()));
  }
  seq.point_count_ = next_fresh_id;
  return seq;
}

std::vector<PointId> UpdateSequence::seen_after(int t) const {
  int hi = -1;
  for (int i = 0; i < t; ++i)
    if (events_[i].op == Op::Arrive) hi = std::max(hi, events_[i].point);
  std::vector<PointId> seen(hi + 1);
  for (int i = 0; i <= hi; ++i) seen[i] = i;
  return seen;
}

}  // namespace monotree
