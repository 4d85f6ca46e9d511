#include <doctest.h>

#include "fluidq/csv.hpp"
#include "fluidq/des.hpp"

using namespace fluidq;

namespace {

NetworkSpec single_station(std::vector<Rational> weights, double lambda = 1.0, double mu = 1.0) {
  NetworkDescription d;
  d.num_stations = 1;
  for (const auto& w : weights)
    d.flows.push_back({{{0, DistributionSpec::exponential(mu), {}}}, w, DistributionSpec::exponential(lambda)});
  return build_network(d);
}

CountVector counts(std::initializer_list<std::int64_t> v) {
  CountVector c(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (auto x : v) c(i++) = x;
  return c;
}

}  // namespace

TEST_CASE("event order: time, completions first, then id") {
  EventQueue q;
  q.push({1.0, EventKind::arrival, 0});
  q.push({1.0, EventKind::service_completion, 3});
  q.push({1.0, EventKind::service_completion, 1});
  q.push({0.5, EventKind::arrival, 2});
  CHECK(q.pop().time == 0.5);
  const Event a = q.pop();
  CHECK((a.kind == EventKind::service_completion && a.id == 1));
  CHECK(q.pop().id == 3);
  CHECK(q.pop().kind == EventKind::arrival);
  CHECK(q.empty());
}

TEST_CASE("weighted round robin interleaves by virtual slot") {
  const NetworkSpec spec = single_station({{2, 1}, {1, 1}});
  auto rr = RoundRobinSchedule::build(spec, 0);
  CHECK(rr.slots == std::vector<int>{0, 1, 0});

  CountVector q = counts({5, 5});
  std::vector<int> order;
  for (int i = 0; i < 6; ++i) order.push_back(*rr.next(q));
  CHECK(order == std::vector<int>{0, 1, 0, 0, 1, 0});

  SUBCASE("empty queues are skipped and the cursor persists") {
    q = counts({0, 5});
    CHECK(*rr.next(q) == 1);
    q = counts({0, 0});
    CHECK_FALSE(rr.next(q).has_value());
    q = counts({5, 5});
    CHECK(*rr.next(q) == 0);
    CHECK(*rr.next(q) == 0);
    CHECK(*rr.next(q) == 1);
  }
}

TEST_CASE("hysteresis: on at nh, off at nh - g, sticky in between") {
  NetworkSpec spec = single_station({{1, 1}});
  spec.hysteresis_gap.constant = 2.0;
  const Thresholds th = Thresholds::for_scale(spec, 4.0);
  CHECK(th.upper == 4.0);
  CHECK(th.lower == 2.0);
  SimState s = SimState::initial(spec, counts({0}), th);

  for (int i = 0; i < 4; ++i) CHECK(admit_or_discard(s, spec, 0, th) == Admission::admitted);
  CHECK(s.queue(0) == 4);
  CHECK(s.discarding[0] == 1);  // the arrival reaching nh was admitted
  CHECK(admit_or_discard(s, spec, 0, th) == Admission::discarded);
  s.queue(0) = 3;
  update_discarding(s, 0, th);
  CHECK(s.discarding[0] == 1);
  s.queue(0) = 2;
  update_discarding(s, 0, th);
  CHECK(s.discarding[0] == 0);
  s.queue(0) = 3;
  update_discarding(s, 0, th);
  CHECK(s.discarding[0] == 0);
  CHECK(s.exogenous(0) == 5);
  CHECK(s.admitted(0) == 4);
}

TEST_CASE("discarding checks every queue on the route") {
  NetworkDescription d;
  d.num_stations = 2;
  const auto e = DistributionSpec::exponential(1.0);
  d.flows = {{{{0, e, {}}, {1, e, {}}}, {1, 1}, e}};
  const NetworkSpec spec = build_network(d);
  const Thresholds th = Thresholds::for_scale(spec, 3.0);
  SimState s = SimState::initial(spec, counts({0, 3}), th);
  CHECK(s.discarding[1] == 1);
  CHECK(admit_or_discard(s, spec, 0, th) == Admission::discarded);
}

TEST_CASE("long-run rates of a single queue") {
  SimOptions o;
  o.horizon = 2e4;
  o.scale = 50;
  SUBCASE("underloaded: departures match arrivals") {
    const auto trace = run(single_station({{1, 1}}, 0.5, 1.0), o);
    CHECK(trace.flow_departure_rate(0) == doctest::Approx(0.5).epsilon(0.03));
    CHECK(trace.flow_admit_rate(0) == doctest::Approx(0.5).epsilon(0.03));
  }
  SUBCASE("overloaded: the server saturates and the rest is discarded") {
    const auto trace = run(single_station({{1, 1}}, 2.0, 1.0), o);
    CHECK(trace.flow_departure_rate(0) == doctest::Approx(1.0).epsilon(0.03));
    CHECK(trace.final_state.queue(0) <= 50);
    CHECK(trace.final_state.exogenous(0) > trace.final_state.admitted(0));
  }
  SUBCASE("backlogged station splits by weight") {
    const auto trace = run(single_station({{3, 1}, {1, 1}}, 2.0, 1.0), o);
    CHECK(trace.flow_departure_rate(0) == doctest::Approx(0.75).epsilon(0.03));
    CHECK(trace.flow_departure_rate(1) == doctest::Approx(0.25).epsilon(0.05));
  }
}

TEST_CASE("same seed, same path; different seed, different path") {
  const NetworkSpec spec = switch_example_spec();
  SimOptions o;
  o.horizon = 500;
  o.scale = 10;
  o.sample_interval = 1.0;
  o.seed = 3;
  const auto a = run(spec, o);
  const auto b = run(spec, o);
  CHECK(trace_csv(a) == trace_csv(b));
  CHECK(a.events == b.events);
  o.seed = 4;
  CHECK(trace_csv(run(spec, o)) != trace_csv(a));
}

TEST_CASE("samples land on the uniform grid") {
  SimOptions o;
  o.horizon = 10.0;
  o.sample_interval = 2.5;
  const auto trace = run(single_station({{1, 1}}), o);
  REQUIRE(trace.samples.size() == 5);
  CHECK(trace.samples.back().t == 10.0);
  const auto path = scaled_trajectory(trace, 1.0, 10.0, 3);
  CHECK(path.t(1) == 5.0);
  CHECK_THROWS_AS(scaled_trajectory(trace, 2.0, 10.0, 3), std::domain_error);
}

TEST_CASE("bad options and budgets") {
  const NetworkSpec spec = single_station({{1, 1}});
  SimOptions o;
  o.horizon = 0.0;
  CHECK_THROWS_AS(run(spec, o), std::invalid_argument);
  o.horizon = 10.0;
  o.warmup_fraction = 1.0;
  CHECK_THROWS_AS(run(spec, o), std::invalid_argument);
  o.warmup_fraction = 0.2;
  o.initial_queue = counts({-1});
  CHECK_THROWS_AS(run(spec, o), std::invalid_argument);
  o.initial_queue.reset();
  o.horizon = 1e6;
  o.max_events = 100;
  CHECK_THROWS_AS(run(spec, o), BudgetExceeded);
}

TEST_CASE("no idling with work waiting") {
  SimOptions o;
  o.horizon = 2000;
  o.scale = 20;
  o.check_every = 1;
  const auto trace = run(switch_example_spec(), o);
  CHECK(trace.final_state.idle_with_backlog == 0);
  CHECK(check_invariants(trace.final_state, switch_example_spec(), Thresholds::for_scale(switch_example_spec(), 20))
            .empty());
}
