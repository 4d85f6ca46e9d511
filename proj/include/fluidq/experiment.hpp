#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fluidq/absorption.hpp"
#include "fluidq/des.hpp"
#include "fluidq/network.hpp"

namespace fluidq {

struct ExperimentPlan {
  std::vector<double> scales;  // n h values are scales times the network's h
  double horizon = 1e4;
  std::vector<std::uint64_t> seeds;
  double warmup_fraction = 0.2;
  std::optional<Eigen::VectorXd> target_rates;
  double sample_interval = 0.0;
  std::uint64_t max_events = 2'000'000'000ULL;

  /// Seeds base, base + 1, ... base + count - 1.
  static std::vector<std::uint64_t> seed_range(std::uint64_t base, int count);
};

/// Scales positive and increasing, seeds nonempty, horizon positive, warm-up in [0, 1).
ValidationReport validate(const ExperimentPlan& plan, const NetworkSpec& spec);

struct RateRow {
  double scale = 0.0;
  std::uint64_t seed = 0;
  Eigen::VectorXd flow_rate;   // departures at egress over the window
  Eigen::VectorXd admit_rate;  // admitted over the window
  std::uint64_t events = 0;
  double wall_seconds = 0.0;   // kept out of serialized output
  std::string error;           // nonempty when the cell failed
};

struct RateTable {
  int num_flows = 0;
  std::vector<RateRow> rows;  // ordered by (scale, seed)
};

/// Every (scale, seed) cell on a bounded pool (FLUIDQ_WORKERS). A cell that
/// exceeds its event budget records the error and the others go on. Throws
/// std::invalid_argument on an invalid plan.
RateTable run_sweep(const NetworkSpec& spec, const ExperimentPlan& plan);

struct ConvergenceRow {
  double scale = 0.0;
  std::size_t seeds = 0;
  double mean_deviation = 0.0;  // mean over seeds of ||rate - R||_inf
  double spread = 0.0;          // sample standard deviation
  double min_deviation = 0.0;
  double max_deviation = 0.0;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  /// Trend over scales; empty with fewer than two scales.
  std::optional<bool> nonincreasing;
  std::optional<bool> strictly_decreasing;
};

ConvergenceReport compare_to_fluid(const RateTable& table, const Eigen::VectorXd& target);

std::string rate_table_csv(const RateTable& table);
nlohmann::json to_json(const RateTable& table);
nlohmann::json to_json(const ConvergenceReport& report);
nlohmann::json to_json(const C1Report& report);
nlohmann::json to_json(const C2Report& report);
nlohmann::json trace_summary(const SimTrace& trace);
nlohmann::json fluid_summary(const FluidTrajectory<double>& traj, const NetworkSpec& spec);

/// FNV-1a 64-bit hash, used to check byte-identical outputs.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace fluidq
