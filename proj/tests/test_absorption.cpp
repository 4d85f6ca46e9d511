#include <doctest.h>

#include <random>

#include "fluidq/absorption.hpp"
#include "oracles.hpp"

using namespace fluidq;

namespace {

NetworkSpec single_queue(double lambda, double mu) {
  NetworkDescription d;
  d.num_stations = 1;
  d.flows = {{{{0, DistributionSpec::exponential(mu), {}}}, {1, 1}, DistributionSpec::exponential(lambda)}};
  return build_network(d);
}

// Uniform member of a piece at threshold hbar.
Eigen::VectorXd random_member(const SetPiece& p, double hbar, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd q(p.box.size());
  for (std::size_t i = 0; i < p.box.size(); ++i) q(i) = p.box[i].lo + u(gen) * (p.box[i].hi - p.box[i].lo);
  if (p.triangle) {
    double b0 = u(gen), b1 = u(gen);
    if (b0 + b1 > 1.0) {
      b0 = 1.0 - b0;
      b1 = 1.0 - b1;
    }
    const auto& v = p.triangle->vertices;
    const Eigen::Vector2d x = v.col(0) + b0 * (v.col(1) - v.col(0)) + b1 * (v.col(2) - v.col(0));
    q(p.triangle->x) = x(0);
    q(p.triangle->y) = x(1);
  }
  return hbar * q;
}

}  // namespace

TEST_CASE("triangle distance against brute force") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-1.0, 2.5);
  Eigen::Matrix<double, 2, 3> tri;
  tri << 0, 0, 1, 1, 1.5, 1;
  const std::array<std::array<double, 2>, 3> v{{{0, 1}, {0, 1.5}, {1, 1}}};
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d p(u(gen), u(gen));
    CAPTURE(p.transpose());
    CHECK(triangle_distance(p, tri, Norm::l1) ==
          doctest::Approx(oracle::triangle_distance_brute(p(0), p(1), v, true)).epsilon(1e-3).scale(1.0));
    CHECK(triangle_distance(p, tri, Norm::linf) ==
          doctest::Approx(oracle::triangle_distance_brute(p(0), p(1), v, false)).epsilon(1e-3).scale(1.0));
  }
}

TEST_CASE("distance: scale law, projection bound and membership") {
  const NetworkSpec spec = switch_example_spec();
  const EquilibriumSet set = switch_equilibrium_set(0.5);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::uniform_int_distribution<std::size_t> piece(0, set.pieces.size() - 1);
  for (int trial = 0; trial < 20; ++trial) {
    const double hbar = 1.0 + 10.0 * trial;
    FluidState<double> x = FluidState<double>::zero(spec, hbar);
    for (int k = 0; k < 8; ++k) x.queue(k) = hbar * u(gen);
    x.arrival(trial % 3) = 0.1 * trial;
    FluidState<double> unit = x;
    unit.queue /= hbar;
    unit.arrival /= hbar;
    unit.threshold = 1.0;
    const double d = distance(x, set, hbar);
    CHECK(d == doctest::Approx(hbar * distance(unit, set, 1.0)).epsilon(1e-12));
    for (int i = 0; i < 1000; ++i) {
      const Eigen::VectorXd e = random_member(set.pieces[piece(gen)], hbar, gen);
      CHECK(d <= (x.queue - e).lpNorm<1>() + x.arrival.sum() + 1e-9 * hbar);
    }
  }
  for (const auto& m : member_samples(spec, set, 3.0)) {
    CHECK(contains(m, set, 3.0, 1e-9));
    CHECK(distance(m, set, 3.0) <= 1e-12);
  }
  auto outside = FluidState<double>::from_queue(spec, Eigen::VectorXd::Zero(8), 1.0);
  CHECK_FALSE(contains(outside, set, 1.0, 1e-9));
  CHECK(distance(outside, set, 1.0) == doctest::Approx(3.0));
}

TEST_CASE("the enlarged switch set contains the minimal one") {
  const NetworkSpec spec = switch_example_spec();
  const auto big = switch_equilibrium_set(0.5);
  for (const auto& m : member_samples(spec, switch_minimal_set(), 2.0)) CHECK(contains(m, big, 2.0, 1e-12));
  CHECK_THROWS_AS(switch_equilibrium_set(1.0), std::invalid_argument);
  CHECK_THROWS_AS(builtin_set("nope", 0.5), std::invalid_argument);
}

TEST_CASE("C1 reproduces linear hitting times") {
  const NetworkSpec spec = single_queue(1.0, 0.5);
  EquilibriumSet point{"level", 1, {SetPiece{{Interval::point(1.0)}, std::nullopt}}};
  const double hbar = 4.0;
  SampleGroup g{"line", false, {}};
  for (double q : {0.0, 1.0, 3.0, 5.0, 12.0})
    g.states.push_back(FluidState<double>::from_queue(spec, Eigen::VectorXd::Constant(1, q), hbar));
  const auto report = verify_C1(spec, point, hbar, SamplePlan{{g}});
  CHECK(report.passed());
  for (const auto& s : report.samples) {
    const double q = s.start.queue(0);
    REQUIRE(s.hitting_time.has_value());
    // fills at lambda - mu below hbar, drains at mu above; absorbed on entering the tolerance ball
    const double expected = std::max(0.0, std::abs(q - hbar) - 1e-6 * hbar) / 0.5;
    CHECK(std::abs(*s.hitting_time - expected) <= 1e-6);
  }
  CHECK(report.max_ratio == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("tandem sets") {
  const double hbar = 2.0;
  SUBCASE("point set absorbs with bounded ratio") {
    const NetworkSpec spec = tandem_spec(1.0, 0.8, 0.5);
    const auto values = boundary_biased_values(0, 3 * hbar, 6, {hbar}, {1e-2 * hbar});
    SamplePlan plan{{product_group("grid", FluidState<double>::zero(spec, hbar), {0, 1}, {values, values})}};
    const auto report = verify_C1(spec, tandem_point_set(), hbar, plan);
    CHECK(report.passed());
    CHECK(report.group("grid")->absorbed + 1 >= plan.size());  // one start is already in the set
  }
  SUBCASE("segments set blows up when mu1 = mu2") {
    const NetworkSpec spec = tandem_spec(1.0, 0.8, 0.8);
    FluidState<double> base = FluidState<double>::zero(spec, hbar);
    base.queue << hbar, hbar;
    SamplePlan plan{{epsilon_ladder("ladder", base, 1, {0.1 * hbar, 0.01 * hbar, 0.001 * hbar})}};
    const auto report = verify_C1(spec, tandem_segments_set(), hbar, plan);
    CHECK_FALSE(report.passed());
    CHECK(report.group("ladder")->blowup);
  }
  SUBCASE("C2 on the point set") {
    const NetworkSpec spec = tandem_spec(1.0, 0.8, 0.5);
    CHECK(verify_C2(spec, tandem_point_set(), hbar, Eigen::VectorXd::Constant(1, 0.5)).max_deviation <= 1e-12);
    const auto wrong = verify_C2(spec, tandem_point_set(), hbar, Eigen::VectorXd::Constant(1, 0.7));
    CHECK(wrong.max_deviation == doctest::Approx(0.2));
  }
}

TEST_CASE("sample plans") {
  const auto v = boundary_biased_values(0, 3, 4, {1}, {0.01});
  CHECK(std::is_sorted(v.begin(), v.end()));
  CHECK(std::find(v.begin(), v.end(), 0.99) != v.end());
  CHECK(std::find(v.begin(), v.end(), 1.01) != v.end());
  const auto plan = switch_region_plan(switch_example_spec(), 1.0, 0.5);
  REQUIRE(plan.groups.size() == 4);
  for (const auto& s : plan.groups[3].states) CHECK(s.queue(1) == 0.0);
  for (const auto& s : plan.groups[0].states) CHECK((s.queue(1) < 1.0 && s.queue(6) < 1.0));
}
