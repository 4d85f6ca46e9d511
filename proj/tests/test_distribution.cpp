#include <doctest.h>

#include <cmath>

#include "fluidq/distribution.hpp"
#include "fluidq/network.hpp"

using namespace fluidq;

TEST_CASE("heavy-tailed law: survival, quantile and mean") {
  const auto d = DistributionSpec::pareto2(0.6);
  CHECK(d.mean() == doctest::Approx(1.0 / 0.6));
  CHECK(d.rate() == doctest::Approx(0.6));
  for (double s : {0.0, 0.5, 2.0, 30.0}) CHECK(d.survival(s) == doctest::Approx(1.0 / std::pow(0.6 * s + 1.0, 2)));
  for (double u : {0.0, 0.1, 0.5, 0.99}) CHECK(d.survival(d.quantile(u)) == doctest::Approx(1.0 - u));
  CHECK(d.unbounded_spread_out());
}

TEST_CASE("exponential and deterministic laws") {
  const auto e = DistributionSpec::exponential(2.0);
  CHECK(e.mean() == doctest::Approx(0.5));
  CHECK(e.survival(1.0) == doctest::Approx(std::exp(-2.0)));
  CHECK(e.quantile(1.0 - std::exp(-2.0)) == doctest::Approx(1.0));
  const auto c = DistributionSpec::deterministic(0.25);
  CHECK(c.rate() == doctest::Approx(4.0));
  CHECK_FALSE(c.unbounded_spread_out());
  Rng rng(1, 0);
  CHECK(sample(c, rng) == 0.25);
}

TEST_CASE("sample means converge") {
  Rng rng(42, 7);
  const auto e = DistributionSpec::exponential(1.5);
  double sum = 0.0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) sum += sample(e, rng);
  CHECK(sum / n == doctest::Approx(1.0 / 1.5).epsilon(0.01));

  // Infinite variance, so only the empirical survival function is checked.
  const auto p = DistributionSpec::pareto2(0.6);
  int above = 0;
  for (int i = 0; i < n; ++i) above += sample(p, rng) > 5.0;
  CHECK(static_cast<double>(above) / n == doctest::Approx(p.survival(5.0)).epsilon(0.03));
}

TEST_CASE("streams are reproducible and distinct") {
  Rng a(9, 3), b(9, 3), c(9, 4), d(10, 3);
  const double x = a.uniform();
  CHECK(x == b.uniform());
  CHECK(x != c.uniform());
  CHECK(x != d.uniform());

  const NetworkSpec spec = switch_example_spec();
  auto s1 = make_streams(spec, 5);
  auto s2 = make_streams(spec, 5);
  REQUIRE(s1.arrivals.size() == 3);
  REQUIRE(s1.services.size() == 8);
  for (int i = 0; i < 10; ++i) CHECK(s1.arrivals[1].renew() == s2.arrivals[1].renew());
  CHECK(s1.arrivals[0].renew() != s1.arrivals[2].renew());
  CHECK(s1.arrivals[1].count == 10);
}

TEST_CASE("renewal residual runs down to zero") {
  RenewalStream s{DistributionSpec::deterministic(2.0), 0.0, Rng(1, 1)};
  s.renew();
  s.advance(0.5);
  CHECK(s.residual == doctest::Approx(1.5));
  s.advance(5.0);
  CHECK(s.residual == 0.0);
}
