#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fluidq/absorption.hpp"
#include "fluidq/experiment.hpp"
#include "fluidq/network.hpp"

namespace fluidq {

/// Malformed or inconsistent configuration (CLI exit code 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

struct FluidConfig {
  double threshold = 1.0;  // hbar
  double horizon = 50.0;
  // initial condition in units of hbar; residuals in time units
  std::optional<Eigen::VectorXd> initial_queue;
  std::optional<Eigen::VectorXd> initial_arrival_residual;
  std::optional<Eigen::VectorXd> initial_service_residual;

  FluidState<double> initial_state(const NetworkSpec& spec) const;
};

struct AbsorptionConfig {
  EquilibriumSet set;
  std::string set_name;  // builtin name, empty for explicit pieces
  double a = 0.5;
  double threshold = 1.0;
  std::vector<int> projection;  // 0-based coordinates; empty means full state
  SamplePlan plan;
  C1Options c1;
  std::optional<Eigen::VectorXd> target_rates;
  int member_grid = 5;
};

struct Config {
  NetworkDescription description;
  NetworkSpec network;
  ExperimentPlan experiment;
  FluidConfig fluid;
  std::optional<AbsorptionConfig> absorption;
  nlohmann::json source;  // document as loaded
};

/// Parses a schema-version-1 document. Ids in the file are 1-based. Unknown
/// fields anywhere are rejected. Throws ConfigError.
Config parse_config(const nlohmann::json& doc);
/// Reads and parses a file. Throws IoError when unreadable, ConfigError otherwise.
Config load_config(const std::filesystem::path& path);

DistributionSpec parse_distribution(const nlohmann::json& j, const std::string& where);
nlohmann::json to_json(const DistributionSpec& d);
/// Network description in file form (1-based ids).
nlohmann::json to_json(const NetworkDescription& desc);

}  // namespace fluidq
