#include <doctest.h>

#include <filesystem>

#include "fluidq/config.hpp"
#include "fluidq/csv.hpp"
#include "fluidq/experiment.hpp"

using namespace fluidq;
using nlohmann::json;

namespace {

json tandem_doc() {
  return json::parse(R"({
    "schema_version": 1,
    "network": {
      "stations": 2, "threshold": 1,
      "flows": [{"weight": "3/2", "arrival": {"exponential": 1},
                 "hops": [{"station": 1, "service": {"exponential": 0.8}},
                          {"station": 2, "service": {"exponential": 0.5}}]}]
    },
    "experiment": {"scales": [5, 20], "horizon": 400, "replications": 3, "target_rates": [0.5]}
  })");
}

}  // namespace

TEST_CASE("config parses and round-trips the network") {
  const Config cfg = parse_config(tandem_doc());
  CHECK(cfg.network.num_classes() == 2);
  CHECK(cfg.network.flows[0].weight == Rational{3, 2});
  CHECK(cfg.experiment.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(cfg.experiment.warmup_fraction == 0.2);
  CHECK_FALSE(cfg.absorption.has_value());

  json doc = tandem_doc();
  doc["network"] = to_json(cfg.description);
  CHECK(parse_config(doc).network == cfg.network);
}

TEST_CASE("config errors name the offending field") {
  auto expect_error = [](json doc, const std::string& fragment) {
    try {
      parse_config(doc);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  json doc = tandem_doc();
  doc["network"]["flows"][0]["colour"] = "red";
  expect_error(doc, "colour");

  doc = tandem_doc();
  doc["schema_version"] = 2;
  expect_error(doc, "schema");

  doc = tandem_doc();
  doc["network"]["flows"][0]["hops"][1]["station"] = 3;
  expect_error(doc, "out of range");

  doc = tandem_doc();
  doc["experiment"]["scales"] = {20, 5};
  expect_error(doc, "increasing");

  doc = tandem_doc();
  doc["experiment"]["horizon"] = 0;
  expect_error(doc, "empty measurement window");

  doc = tandem_doc();
  doc["network"]["flows"][0]["arrival"] = {{"weibull", 1}};
  expect_error(doc, "weibull");

  doc = tandem_doc();
  doc["absorption"] = {{"set", "tandem_point"}, {"plan", {{{"kind", "spiral"}}}}};
  expect_error(doc, "spiral");

  CHECK_THROWS_AS(load_config("/nonexistent/fluidq.json"), IoError);
}

TEST_CASE("absorption section") {
  json doc = tandem_doc();
  doc["absorption"] = json::parse(R"({
    "set": {"pieces": [{"box": [[0, 0], [1, 1]]}]},
    "plan": [{"kind": "grid", "coords": [1, 2], "lo": 0, "hi": 3, "points": 4},
             {"kind": "ladder", "coord": 2, "base_queue": [1, 1], "eps": [0.1, 0.01]}],
    "horizon": 100
  })");
  const Config cfg = parse_config(doc);
  REQUIRE(cfg.absorption);
  CHECK(cfg.absorption->set.pieces.size() == 1);
  CHECK(cfg.absorption->plan.groups.size() == 2);
  CHECK(cfg.absorption->plan.groups[1].ladder);
  CHECK(cfg.absorption->c1.horizon == 100);
  CHECK(verify_C1(cfg.network, cfg.absorption->set, 1.0, cfg.absorption->plan, cfg.absorption->c1).groups.size() == 2);
}

TEST_CASE("sweep is deterministic and bounded by the arrival rate") {
  const Config cfg = parse_config(tandem_doc());
  const auto a = run_sweep(cfg.network, cfg.experiment);
  const auto b = run_sweep(cfg.network, cfg.experiment);
  REQUIRE(a.rows.size() == 6);
  CHECK(rate_table_csv(a) == rate_table_csv(b));
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(fnv1a(rate_table_csv(a)) == fnv1a(rate_table_csv(b)));
  for (const auto& row : a.rows) {
    CHECK(row.error.empty());
    CHECK(row.flow_rate(0) >= 0.0);
    CHECK(row.admit_rate(0) <= 1.0 + 0.25);  // sampling noise over a short window
  }
  CHECK(a.rows[0].scale == 5);
  CHECK(a.rows[3].scale == 20);
}

TEST_CASE("budget failures stay in their cell") {
  const Config cfg = parse_config(tandem_doc());
  ExperimentPlan plan = cfg.experiment;
  plan.max_events = 50;
  const auto table = run_sweep(cfg.network, plan);
  for (const auto& row : table.rows) CHECK_FALSE(row.error.empty());
  CHECK(compare_to_fluid(table, Eigen::VectorXd::Constant(1, 0.5)).rows.empty());
}

TEST_CASE("convergence report") {
  RateTable t;
  t.num_flows = 1;
  auto row = [](double n, std::uint64_t seed, double r) {
    RateRow x;
    x.scale = n;
    x.seed = seed;
    x.flow_rate = Eigen::VectorXd::Constant(1, r);
    x.admit_rate = x.flow_rate;
    return x;
  };
  t.rows = {row(10, 1, 0.40), row(10, 2, 0.44), row(100, 1, 0.49), row(100, 2, 0.47)};
  const auto rep = compare_to_fluid(t, Eigen::VectorXd::Constant(1, 0.5));
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].mean_deviation == doctest::Approx(0.08));
  CHECK(rep.rows[1].mean_deviation == doctest::Approx(0.02));
  CHECK(*rep.strictly_decreasing);

  RateTable single;
  single.num_flows = 1;
  single.rows = {row(10, 1, 0.5)};
  const auto s = compare_to_fluid(single, Eigen::VectorXd::Constant(1, 0.5));
  CHECK(s.rows[0].mean_deviation == 0.0);
  CHECK_FALSE(s.nonincreasing.has_value());
}

TEST_CASE("csv output") {
  RateTable empty;
  empty.num_flows = 2;
  CHECK(rate_table_csv(empty) == "scale,seed,events,rate1,rate2,admit1,admit2,error\n");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-300) == "1e-300");

  const auto dir = std::filesystem::temp_directory_path() / "fluidq_csv_test" / "nested";
  write_text(dir / "x.csv", "a,b\n");
  CHECK(read_text(dir / "x.csv") == "a,b\n");
  std::filesystem::remove_all(dir.parent_path());
  CHECK_THROWS_AS(read_text(dir / "missing.csv"), IoError);
}
