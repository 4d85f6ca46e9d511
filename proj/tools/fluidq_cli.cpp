// fluidq: command-line front end.
//
// Exit codes: 0 success, 1 invalid input or failed check, 2 runtime budget or I/O failure.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fluidq/absorption.hpp"
#include "fluidq/config.hpp"
#include "fluidq/csv.hpp"
#include "fluidq/des.hpp"
#include "fluidq/experiment.hpp"
#include "fluidq/fluid.hpp"

namespace fs = std::filesystem;
using namespace fluidq;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "fluidq-out";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file")->required();
  cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
  cmd->add_option("--out", c.out, "output directory");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

Config load_valid(const Common& c) {
  Config cfg = load_config(c.config);
  const auto report = validate(cfg.network);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  if (!report.ok()) throw ConfigError("network is invalid: " + report.errors.front());
  return cfg;
}

int cmd_validate(const Common& c) {
  Config cfg = load_config(c.config);
  const auto report = validate(cfg.network);
  const auto load = offered_load(cfg.network);
  json j{{"valid", report.ok()},
         {"errors", report.errors},
         {"warnings", report.warnings},
         {"flows", cfg.network.num_flows()},
         {"stations", cfg.network.num_stations},
         {"classes", cfg.network.num_classes()},
         {"offered_load", std::vector<double>(load.data(), load.data() + load.size())}};
  write_text(fs::path(c.out) / "validation.json", dump(j));
  for (const auto& e : report.errors) std::cout << "error: " << e << "\n";
  for (const auto& w : report.warnings) std::cout << "warning: " << w << "\n";
  std::cout << (report.ok() ? "valid" : "invalid") << ": " << cfg.network.num_flows() << " flows, "
            << cfg.network.num_stations << " stations, " << cfg.network.num_classes() << " queues\n";
  return report.ok() ? kOk : kInvalid;
}

SimOptions sim_options(const Config& cfg, const Common& c, double scale, std::optional<double> horizon) {
  SimOptions o;
  o.scale = scale;
  o.seed = c.seed.value_or(cfg.experiment.seeds.front());
  o.horizon = horizon.value_or(cfg.experiment.horizon);
  o.warmup_fraction = cfg.experiment.warmup_fraction;
  o.sample_interval = cfg.experiment.sample_interval > 0.0 ? cfg.experiment.sample_interval : o.horizon / 1000.0;
  o.max_events = cfg.experiment.max_events;
  return o;
}

int cmd_simulate(const Common& c, std::optional<double> scale, std::optional<double> horizon) {
  const Config cfg = load_valid(c);
  const SimTrace trace = run(cfg.network, sim_options(cfg, c, scale.value_or(cfg.experiment.scales.front()), horizon));
  write_text(fs::path(c.out) / "trace.csv", trace_csv(trace));
  write_text(fs::path(c.out) / "summary.json", dump(trace_summary(trace)));
  std::cout << "events " << trace.events << "\nflow  departure-rate  admit-rate\n";
  for (int f = 0; f < cfg.network.num_flows(); ++f)
    std::cout << std::setw(4) << f + 1 << "  " << std::setw(14) << trace.flow_departure_rate(f) << "  "
              << std::setw(10) << trace.flow_admit_rate(f) << "\n";
  return kOk;
}

int cmd_fluid(const Common& c, std::optional<double> horizon) {
  const Config cfg = load_valid(c);
  const auto traj = integrate(cfg.fluid.initial_state(cfg.network), cfg.network, horizon.value_or(cfg.fluid.horizon));
  write_text(fs::path(c.out) / "fluid.csv", fluid_csv(traj));
  write_text(fs::path(c.out) / "fluid.json", dump(fluid_summary(traj, cfg.network)));
  const auto rates = traj.points.back().rates.flow_departures(cfg.network);
  std::cout << "breakpoints " << traj.points.size() << "\n";
  if (traj.absorbed_at) std::cout << "absorbed at t=" << *traj.absorbed_at << "\n";
  std::cout << "final flow rates";
  for (int f = 0; f < rates.size(); ++f) std::cout << " " << rates(f);
  std::cout << "\n";
  return kOk;
}

const AbsorptionConfig& need_absorption(const Config& cfg) {
  if (!cfg.absorption) throw ConfigError("config has no 'absorption' section");
  return *cfg.absorption;
}

int cmd_verify_c1(const Common& c) {
  const Config cfg = load_valid(c);
  const AbsorptionConfig& ac = need_absorption(cfg);
  if (ac.plan.empty()) throw ConfigError("absorption.plan has no samples");
  const C1Report report = verify_C1(cfg.network, ac.set, ac.threshold, ac.plan, ac.c1);
  write_text(fs::path(c.out) / "c1.json", dump(to_json(report)));
  std::cout << std::left << std::setw(16) << "group" << std::right << std::setw(9) << "samples" << std::setw(10)
            << "absorbed" << std::setw(14) << "max ratio" << "  blow-up\n";
  for (const auto& g : report.groups)
    std::cout << std::left << std::setw(16) << g.name << std::right << std::setw(9) << g.samples << std::setw(10)
              << g.absorbed << std::setw(14) << g.max_ratio << "  " << (g.blowup ? "yes" : "no") << "\n";
  std::cout << "empirical t0 " << report.max_ratio << "\n";
  for (const auto& v : report.violations) std::cout << "violation: " << v << "\n";
  std::cout << (report.passed() ? "C1 holds on all samples" : "C1 violated") << "\n";
  return report.passed() ? kOk : kInvalid;
}

int cmd_verify_c2(const Common& c) {
  constexpr double kTolerance = 1e-9;
  const Config cfg = load_valid(c);
  const AbsorptionConfig& ac = need_absorption(cfg);
  std::optional<Eigen::VectorXd> target = ac.target_rates ? ac.target_rates : cfg.experiment.target_rates;
  if (!target) throw ConfigError("no target rates (absorption.target_rates or experiment.target_rates)");
  // rates are read on the full set, not a projection
  const EquilibriumSet set = ac.set_name.empty() ? ac.set : builtin_set(ac.set_name, ac.a);
  const C2Report report = verify_C2(cfg.network, set, ac.threshold, *target, {}, ac.member_grid);
  write_text(fs::path(c.out) / "c2.json", dump(to_json(report)));
  std::cout << "member samples " << report.samples.size() << "\nflow  max |rate - R|\n";
  for (int f = 0; f < report.max_deviation_per_flow.size(); ++f)
    std::cout << std::setw(4) << f + 1 << "  " << report.max_deviation_per_flow(f) << "\n";
  const bool ok = report.max_deviation <= kTolerance;
  if (!ok && report.argmax) {
    const auto& s = report.samples[*report.argmax];
    std::cout << "worst member Q=(";
    for (int k = 0; k < s.state.queue.size(); ++k) std::cout << (k ? "," : "") << s.state.queue(k);
    std::cout << ")\n";
  }
  std::cout << (ok ? "C2 holds on all samples" : "C2 violated") << "\n";
  return ok ? kOk : kInvalid;
}

int cmd_sweep(const Common& c) {
  const Config cfg = load_valid(c);
  ExperimentPlan plan = cfg.experiment;
  if (c.seed) plan.seeds = ExperimentPlan::seed_range(*c.seed, static_cast<int>(plan.seeds.size()));
  const RateTable table = run_sweep(cfg.network, plan);
  write_text(fs::path(c.out) / "rates.csv", rate_table_csv(table));
  write_text(fs::path(c.out) / "rates.json", dump(to_json(table)));
  int failed = 0;
  for (const auto& row : table.rows)
    if (!row.error.empty()) {
      ++failed;
      std::cerr << "cell n=" << row.scale << " seed=" << row.seed << ": " << row.error << "\n";
    }
  if (plan.target_rates) {
    const auto conv = compare_to_fluid(table, *plan.target_rates);
    write_text(fs::path(c.out) / "convergence.json", dump(to_json(conv)));
    std::cout << "scale  seeds  mean ||rate-R||inf  spread\n";
    for (const auto& r : conv.rows)
      std::cout << std::setw(5) << r.scale << "  " << std::setw(5) << r.seeds << "  " << std::setw(18)
                << r.mean_deviation << "  " << r.spread << "\n";
    if (conv.nonincreasing) std::cout << "deviation " << (*conv.nonincreasing ? "nonincreasing" : "not monotone") << " in n\n";
  }
  return failed ? kRuntime : kOk;
}

int cmd_export(const Common& c, std::vector<int> queues, std::vector<int> phase) {
  const Config cfg = load_valid(c);
  const int K = cfg.network.num_classes();
  std::vector<int> cls;
  for (int q : queues) {
    if (q < 1 || q > K) throw ConfigError("--queues ids must lie in 1.." + std::to_string(K));
    cls.push_back(q - 1);
  }
  if (cls.empty())
    for (int k = 0; k < K; ++k) cls.push_back(k);
  const fs::path out(c.out);
  for (double n : cfg.experiment.scales) {
    const SimTrace trace = run(cfg.network, sim_options(cfg, c, n, std::nullopt));
    write_text(out / ("queues_n" + format_double(n) + ".csv"), queue_series_csv(trace, cls));
  }
  const auto traj = integrate(cfg.fluid.initial_state(cfg.network), cfg.network, cfg.fluid.horizon);
  write_text(out / "fluid.csv", fluid_csv(traj));
  if (!phase.empty()) {
    if (phase.size() != 2 || phase[0] < 1 || phase[0] > K || phase[1] < 1 || phase[1] > K)
      throw ConfigError("--phase takes two queue ids");
    write_text(out / "phase.csv", phase_csv(traj, phase[0] - 1, phase[1] - 1));
  }
  write_text(out / "network.json", dump(to_json(cfg.description)));
  std::cout << "wrote " << out.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fluidq: queueing networks with ingress discarding, stochastic and fluid"};
  app.require_subcommand(1);
  Common common;
  std::optional<double> scale, horizon;
  std::vector<int> queues, phase;

  auto* validate_cmd = app.add_subcommand("validate", "check a network config");
  auto* simulate_cmd = app.add_subcommand("simulate", "run the discrete-event simulator once");
  auto* fluid_cmd = app.add_subcommand("fluid", "integrate the fluid model");
  auto* c1_cmd = app.add_subcommand("verify-c1", "check linear-time absorption into the set");
  auto* c2_cmd = app.add_subcommand("verify-c2", "check departure rates on the set");
  auto* sweep_cmd = app.add_subcommand("sweep", "rates over threshold scales and seeds");
  auto* export_cmd = app.add_subcommand("export", "CSV data for queue-length and phase plots");
  for (auto* cmd : {validate_cmd, simulate_cmd, fluid_cmd, c1_cmd, c2_cmd, sweep_cmd, export_cmd})
    add_common(cmd, common);
  simulate_cmd->add_option("--scale", scale, "threshold scale n (default: first experiment scale)");
  simulate_cmd->add_option("--horizon", horizon, "simulated time");
  fluid_cmd->add_option("--horizon", horizon, "fluid time");
  export_cmd->add_option("--queues", queues, "queue ids for the time series (default all)");
  export_cmd->add_option("--phase", phase, "two queue ids for the fluid phase polyline")->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*validate_cmd) return cmd_validate(common);
    if (*simulate_cmd) return cmd_simulate(common, scale, horizon);
    if (*fluid_cmd) return cmd_fluid(common, horizon);
    if (*c1_cmd) return cmd_verify_c1(common);
    if (*c2_cmd) return cmd_verify_c2(common);
    if (*sweep_cmd) return cmd_sweep(common);
    if (*export_cmd) return cmd_export(common, queues, phase);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kRuntime;
  } catch (const BudgetExceeded& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kInvalid;
}
