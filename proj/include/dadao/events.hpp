#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dadao/graph.hpp"
#include "dadao/rng.hpp"

namespace dadao {

enum class EventKind : std::uint8_t { GradientSpike, CommSpike };

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::GradientSpike;
  Index a = 0;   // node (gradient) or first edge endpoint
  Index b = -1;  // second edge endpoint; -1 for gradient events

  friend bool operator==(const Event&, const Event&) = default;
};

// Arrival times of a homogeneous Poisson process on [0, t_max]: cumulative
// sums of Exponential(rate) gaps. Throws ParameterError if rate <= 0.
std::vector<double> sample_poisson_stream(double rate, double t_max, CounterRng& rng);

class EventSchedule {
 public:
  EventSchedule() = default;
  // Validates strict time ordering and 0 <= time <= t_max.
  EventSchedule(std::vector<Event> events, double t_max, std::uint64_t seed);

  const std::vector<Event>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  double t_max() const { return t_max_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t count(EventKind kind) const;

  friend bool operator==(const EventSchedule&, const EventSchedule&) = default;

 private:
  std::vector<Event> events_;
  double t_max_ = 0.0;
  std::uint64_t seed_ = 0;
};

// Merges a rate-n gradient stream (uniform node) with a rate-lambda
// communication stream (uniform edge of the graph active at the event time).
// A zero communication rate is allowed and yields gradient events only.
EventSchedule build_schedule(Index n, double comm_rate, const TimeVaryingTopology& topo, double t_max,
                             std::uint64_t seed);

// CSV with header `time,kind,loc_a,loc_b`; kind is `grad` or `comm`.
void write_schedule_csv(std::ostream& os, const EventSchedule& schedule);
void save_schedule_csv(const std::string& path, const EventSchedule& schedule);

}  // namespace dadao
