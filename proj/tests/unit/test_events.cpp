#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"
#include "dadao/error.hpp"
#include "dadao/events.hpp"

using namespace dadao;

namespace {

// Chi-square goodness of fit of integer counts against Poisson(mean), using
// bins of roughly equal probability. Returns the p-value.
double poisson_gof_pvalue(const std::vector<std::size_t>& counts, double mean, int bins = 8) {
  boost::math::poisson_distribution<> pois(mean);
  std::vector<double> edges;  // bin k is [edges[k-1], edges[k])
  for (int k = 1; k < bins; ++k) edges.push_back(std::floor(quantile(pois, static_cast<double>(k) / bins)) + 1);
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  const std::size_t nb = edges.size() + 1;
  std::vector<double> observed(nb, 0.0), expected(nb, 0.0);
  for (auto c : counts) {
    const auto k = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), double(c)) - edges.begin());
    observed[k] += 1;
  }
  double prev = 0.0;
  for (std::size_t k = 0; k < nb; ++k) {
    const double upto = k < edges.size() ? cdf(pois, edges[k] - 1) : 1.0;
    expected[k] = (upto - prev) * counts.size();
    prev = upto;
  }
  double stat = 0.0;
  for (std::size_t k = 0; k < nb; ++k) stat += (observed[k] - expected[k]) * (observed[k] - expected[k]) / expected[k];
  boost::math::chi_squared_distribution<> chi(static_cast<double>(nb - 1));
  return 1.0 - cdf(chi, stat);
}

}  // namespace

TEST_CASE("poisson stream basics") {
  CounterRng rng(1);
  CHECK(sample_poisson_stream(3.0, 0.0, rng).empty());
  CHECK_THROWS_AS(sample_poisson_stream(0.0, 1.0, rng), ParameterError);
  CHECK_THROWS_AS(sample_poisson_stream(-1.0, 1.0, rng), ParameterError);

  CounterRng a(9), b(9);
  CHECK(sample_poisson_stream(5.0, 50.0, a) == sample_poisson_stream(5.0, 50.0, b));

  CounterRng c(2);
  const auto times = sample_poisson_stream(5.0, 100.0, c);
  CHECK(std::is_sorted(times.begin(), times.end()));
  CHECK(times.back() <= 100.0);
}

TEST_CASE("poisson stream count over 200 seeds") {
  double sum = 0.0;
  std::vector<std::size_t> counts;
  for (std::uint64_t s = 0; s < 200; ++s) {
    CounterRng rng(s);
    counts.push_back(sample_poisson_stream(5.0, 1000.0, rng).size());
    sum += static_cast<double>(counts.back());
  }
  const double mean = sum / 200.0;
  // sd of the mean count is sqrt(5000 / 200)
  CHECK(std::abs(mean - 5000.0) < 3.0 * std::sqrt(5000.0 / 200.0));
  CHECK(poisson_gof_pvalue(counts, 5000.0) > 0.01);
}

TEST_CASE("schedule counts follow the declared rates") {
  const auto topo = TimeVaryingTopology::fixed(generate({GraphKind::Complete}, 20, 0));
  std::vector<std::size_t> grads, comms;
  double g_sum = 0, c_sum = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto sched = build_schedule(20, 10.0, topo, 100.0, s);
    grads.push_back(sched.count(EventKind::GradientSpike));
    comms.push_back(sched.count(EventKind::CommSpike));
    g_sum += static_cast<double>(grads.back());
    c_sum += static_cast<double>(comms.back());
  }
  CHECK(std::abs(g_sum / 200 - 2000.0) < 3 * std::sqrt(2000.0 / 200));
  CHECK(std::abs(c_sum / 200 - 1000.0) < 3 * std::sqrt(1000.0 / 200));
  CHECK(poisson_gof_pvalue(grads, 2000.0) > 0.01);
  CHECK(poisson_gof_pvalue(comms, 1000.0) > 0.01);
}

TEST_CASE("schedule is sorted, valid and deterministic") {
  const auto topo = TimeVaryingTopology::fixed(generate({GraphKind::Line}, 6, 0));
  const auto a = build_schedule(6, 3.0, topo, 20.0, 77);
  const auto b = build_schedule(6, 3.0, topo, 20.0, 77);
  CHECK(a == b);
  CHECK_FALSE(a == build_schedule(6, 3.0, topo, 20.0, 78));
  double prev = -1;
  for (const auto& e : a.events()) {
    CHECK(e.time > prev);
    prev = e.time;
    if (e.kind == EventKind::GradientSpike) {
      CHECK(e.b == -1);
      CHECK((e.a >= 0 && e.a < 6));
    } else {
      CHECK(topo.active(e.time).has_edge(e.a, e.b));
    }
  }
  CHECK(build_schedule(6, 3.0, topo, 0.0, 1).empty());
  CHECK_THROWS_AS(build_schedule(6, -1.0, topo, 1.0, 1), ParameterError);
  CHECK_THROWS_AS(build_schedule(5, 1.0, topo, 1.0, 1), ParameterError);
  CHECK(build_schedule(6, 0.0, topo, 5.0, 1).count(EventKind::CommSpike) == 0);
}

TEST_CASE("per-edge firing rate is uniform") {
  const auto topo = TimeVaryingTopology::fixed(generate({GraphKind::Star}, 6, 0));
  const double rate = 10.0, t_max = 20000.0;
  const auto sched = build_schedule(6, rate, topo, t_max, 5);
  std::map<std::pair<int, int>, double> fires;
  for (const auto& e : sched.events())
    if (e.kind == EventKind::CommSpike) fires[{e.a, e.b}] += 1;
  REQUIRE(fires.size() == 5);
  for (const auto& [edge, count] : fires) CHECK(std::abs(count / t_max - rate / 5) / (rate / 5) < 0.05);
}

TEST_CASE("communication events use the graph active at their time") {
  // Two edge-disjoint spanning trees on 4 nodes.
  const Graph g0(4, {{0, 1}, {1, 2}, {2, 3}});
  const Graph g1(4, {{0, 2}, {0, 3}, {1, 3}});
  const TimeVaryingTopology topo({g0, g1}, 1.0);
  const auto sched = build_schedule(4, 50.0, topo, 1.99, 3);
  int before = 0, after = 0;
  for (const auto& e : sched.events()) {
    if (e.kind != EventKind::CommSpike) continue;
    if (e.time < 1.0) {
      CHECK(g0.has_edge(e.a, e.b));
      ++before;
    } else {
      CHECK(g1.has_edge(e.a, e.b));
      ++after;
    }
  }
  CHECK(before > 0);
  CHECK(after > 0);
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS(EventSchedule({{1.0, EventKind::GradientSpike, 0}, {0.5, EventKind::GradientSpike, 0}}, 2.0, 0),
                  OrderingError);
  CHECK_THROWS_AS(EventSchedule({{1.0, EventKind::GradientSpike, 0}, {1.0, EventKind::GradientSpike, 1}}, 2.0, 0),
                  OrderingError);
  CHECK_THROWS_AS(EventSchedule({{3.0, EventKind::GradientSpike, 0}}, 2.0, 0), OrderingError);
}

TEST_CASE("schedule csv") {
  const EventSchedule s({{0.5, EventKind::GradientSpike, 2, -1}, {0.75, EventKind::CommSpike, 0, 1}}, 1.0, 0);
  std::ostringstream os;
  write_schedule_csv(os, s);
  CHECK(os.str() == "time,kind,loc_a,loc_b\n0.5,grad,2,-1\n0.75,comm,0,1\n");
}
