#include "dadao/events.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "dadao/error.hpp"

namespace dadao {

std::vector<double> sample_poisson_stream(double rate, double t_max, CounterRng& rng) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw ParameterError("poisson stream: rate must be positive");
  if (!(t_max >= 0.0)) throw ParameterError("poisson stream: t_max must be >= 0");
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(rate * t_max * 1.1) + 16);
  double t = rng.exponential(rate);
  while (t <= t_max) {
    times.push_back(t);
    t += rng.exponential(rate);
  }
  return times;
}

EventSchedule::EventSchedule(std::vector<Event> events, double t_max, std::uint64_t seed)
    : events_(std::move(events)), t_max_(t_max), seed_(seed) {
  double prev = -1.0;
  for (const auto& e : events_) {
    if (!(e.time >= 0.0) || e.time > t_max_) throw OrderingError("schedule: event time outside [0, t_max]");
    if (!(e.time > prev)) throw OrderingError("schedule: event times must be strictly increasing");
    prev = e.time;
  }
}

std::size_t EventSchedule::count(EventKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(events_.begin(), events_.end(), [kind](const Event& e) { return e.kind == kind; }));
}

namespace {

bool has_tie(const std::vector<double>& a, const std::vector<double>& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    a[i] < b[j] ? ++i : ++j;
  }
  return false;
}

}  // namespace

EventSchedule build_schedule(Index n, double comm_rate, const TimeVaryingTopology& topo, double t_max,
                             std::uint64_t seed) {
  if (n < 1) throw ParameterError("schedule: n must be positive");
  if (topo.num_nodes() != n) throw ParameterError("schedule: topology size differs from n");
  if (!(comm_rate >= 0.0) || !std::isfinite(comm_rate)) throw ParameterError("schedule: communication rate must be >= 0");

  const CounterRng root(seed);
  CounterRng grad_rng = root.split(streams::kGradientTimes);
  const auto grad_times = sample_poisson_stream(static_cast<double>(n), t_max, grad_rng);

  std::vector<double> comm_times;
  if (comm_rate > 0.0) {
    // Equal times across the two streams have probability zero; if one
    // shows up anyway the communication stream is redrawn.
    for (std::uint64_t attempt = 0;; ++attempt) {
      CounterRng comm_rng = root.split(streams::kCommTimes).split(attempt);
      comm_times = sample_poisson_stream(comm_rate, t_max, comm_rng);
      if (!has_tie(grad_times, comm_times)) break;
    }
  }

  CounterRng node_rng = root.split(streams::kGradientNodes);
  CounterRng edge_rng = root.split(streams::kCommEdges);
  std::vector<Event> events;
  events.reserve(grad_times.size() + comm_times.size());
  std::size_t gi = 0, ci = 0;
  while (gi < grad_times.size() || ci < comm_times.size()) {
    const bool take_grad = ci == comm_times.size() || (gi < grad_times.size() && grad_times[gi] < comm_times[ci]);
    if (take_grad) {
      events.push_back({grad_times[gi++], EventKind::GradientSpike,
                        static_cast<Index>(node_rng.uniform_index(static_cast<std::uint64_t>(n))), -1});
    } else {
      const double t = comm_times[ci++];
      const auto& edges = topo.active(t).edges();
      if (edges.empty()) throw ParameterError("schedule: communication event on a graph without edges");
      const auto& e = edges[edge_rng.uniform_index(edges.size())];
      events.push_back({t, EventKind::CommSpike, e.i, e.j});
    }
  }
  return EventSchedule(std::move(events), t_max, seed);
}

void write_schedule_csv(std::ostream& os, const EventSchedule& schedule) {
  const auto old_precision = os.precision(17);
  os << "time,kind,loc_a,loc_b\n";
  for (const auto& e : schedule.events())
    os << e.time << ',' << (e.kind == EventKind::GradientSpike ? "grad" : "comm") << ',' << e.a << ',' << e.b << '\n';
  os.precision(old_precision);
}

void save_schedule_csv(const std::string& path, const EventSchedule& schedule) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  write_schedule_csv(os, schedule);
}

}  // namespace dadao
