#include <doctest.h>

#include "fluidq/network.hpp"

using namespace fluidq;

TEST_CASE("rational weights parse and reduce") {
  CHECK(parse_rational("3") == Rational{3, 1});
  CHECK(parse_rational("6/4") == Rational{3, 2});
  CHECK(parse_rational("0.25") == Rational{1, 4});
  CHECK(to_string(Rational{3, 2}) == "3/2");
  CHECK_THROWS_AS(parse_rational("1/0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational("x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational("2/3z"), std::invalid_argument);
}

TEST_CASE("switch example matrices") {
  const NetworkSpec spec = switch_example_spec();
  REQUIRE(validate(spec).ok());
  CHECK(spec.num_classes() == 8);
  CHECK(spec.num_flows() == 3);
  CHECK(spec.num_stations == 4);

  Eigen::MatrixXi P = Eigen::MatrixXi::Zero(8, 8);
  P(0, 4) = 1;
  P(1, 6) = 1;
  P(2, 7) = 1;
  CHECK(spec.routing() == P);

  Eigen::MatrixXi C(4, 8);
  C << 1, 1, 0, 0, 0, 0, 0, 0,
       0, 0, 1, 1, 0, 0, 0, 0,
       0, 0, 0, 0, 1, 1, 0, 0,
       0, 0, 0, 0, 0, 0, 1, 1;
  CHECK(spec.constituency() == C);

  CHECK(spec.classes[3].idle);
  CHECK(spec.classes[5].idle);
  CHECK(spec.flow_of(3) == -1);
  CHECK(spec.next_class(1) == 6);
  CHECK(spec.next_class(6) == -1);
  CHECK(spec.egress_class(2) == 7);
  CHECK(spec.arrival_rates().isApprox(Eigen::Vector3d::Constant(0.6)));
  const Eigen::VectorXd load = offered_load(spec);
  CHECK(load(0) == doctest::Approx(1.2));
  CHECK(load(1) == doctest::Approx(0.6));
}

TEST_CASE("class numbering follows flow order with pins and idle slots") {
  NetworkDescription d;
  d.num_stations = 3;
  const auto e = DistributionSpec::exponential(1.0);
  d.flows = {{{{0, e, {}}, {1, e, {}}, {2, e, {}}}, {1, 1}, e}, {{{1, e, {}}, {0, e, 5}}, {1, 1}, e}};
  d.idle_queues = {{2, 2}};
  const NetworkSpec spec = build_network(d);
  REQUIRE(validate(spec).ok());
  CHECK(spec.flows[0].classes == std::vector<int>{0, 3, 4});
  CHECK(spec.flows[1].classes == std::vector<int>{1, 5});
  CHECK(spec.classes[2].idle);

  d.flows[1].hops[1].cls = 0;
  CHECK_THROWS_AS(build_network(d), std::invalid_argument);
}

TEST_CASE("validation catches malformed networks") {
  const auto e = DistributionSpec::exponential(1.0);
  NetworkDescription d;
  d.num_stations = 2;
  d.flows = {{{{0, e, {}}, {0, e, {}}}, {1, 1}, e}};
  CHECK_FALSE(validate(build_network(d)).ok());

  d.flows = {{{{0, e, {}}, {1, e, {}}}, {1, 1}, e}};
  NetworkSpec spec = build_network(d);
  REQUIRE(validate(spec).ok());

  SUBCASE("cycle in routes") {
    spec.flows[0].classes = {0, 1};
    spec.flows.push_back(spec.flows[0]);
    spec.flows[1].classes = {1, 0};
    spec.flows[1].stations = {1, 0};
    CHECK_FALSE(validate(spec).ok());
  }
  SUBCASE("nonpositive rates and weights") {
    spec.classes[1].service.parameter = 0.0;
    spec.flows[0].weight = {0, 1};
    CHECK(validate(spec).errors.size() >= 2);
  }
  SUBCASE("hysteresis gap must be sublinear") {
    spec.hysteresis_gap = {0.0, 1.0, 1.0};
    CHECK_FALSE(validate(spec).ok());
  }
  SUBCASE("deterministic arrivals only warn") {
    spec.flows[0].arrival = DistributionSpec::deterministic(1.0);
    const auto r = validate(spec);
    CHECK(r.ok());
    CHECK(r.warnings.size() == 1);
  }
}

TEST_CASE("visit counts are integer and proportional to weights") {
  const auto e = DistributionSpec::exponential(1.0);
  NetworkDescription d;
  d.num_stations = 1;
  d.flows = {{{{0, e, {}}}, {3, 2}, e}, {{{0, e, {}}}, {1, 2}, e}, {{{0, e, {}}}, {2, 1}, e}};
  const auto visits = build_network(d).visit_counts(0);
  REQUIRE(visits.size() == 3);
  CHECK(visits[0].second == 3);
  CHECK(visits[1].second == 1);
  CHECK(visits[2].second == 4);
}

TEST_CASE("hysteresis gap") {
  HysteresisGap g{1.0, 2.0, 0.5};
  CHECK(g(100.0) == doctest::Approx(21.0));
  CHECK(HysteresisGap{}(50.0) == 0.0);
}
