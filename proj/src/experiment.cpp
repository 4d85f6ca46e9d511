#include "fluidq/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "fluidq/csv.hpp"
#include "fluidq/parallel.hpp"

namespace fluidq {

using nlohmann::json;

std::vector<std::uint64_t> ExperimentPlan::seed_range(std::uint64_t base, int count) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < count; ++i) out.push_back(base + static_cast<std::uint64_t>(i));
  return out;
}

ValidationReport validate(const ExperimentPlan& plan, const NetworkSpec& spec) {
  ValidationReport r;
  if (plan.scales.empty()) r.errors.push_back("experiment needs at least one scale");
  for (std::size_t i = 0; i < plan.scales.size(); ++i) {
    if (!(plan.scales[i] > 0.0)) r.errors.push_back("scales must be positive");
    if (i > 0 && !(plan.scales[i] > plan.scales[i - 1])) r.errors.push_back("scales must be increasing");
  }
  if (!(plan.horizon > 0.0) || !std::isfinite(plan.horizon))
    r.errors.push_back("empty measurement window: horizon must be positive");
  if (!(plan.warmup_fraction >= 0.0 && plan.warmup_fraction < 1.0))
    r.errors.push_back("warm-up fraction must lie in [0, 1)");
  if (plan.seeds.empty()) r.errors.push_back("experiment needs at least one seed");
  if (!(plan.sample_interval >= 0.0)) r.errors.push_back("sample interval must be nonnegative");
  if (plan.target_rates && plan.target_rates->size() != spec.num_flows())
    r.errors.push_back("target rates need one entry per flow");
  return r;
}

RateTable run_sweep(const NetworkSpec& spec, const ExperimentPlan& plan) {
  const auto report = validate(plan, spec);
  if (!report.ok()) throw std::invalid_argument(report.errors.front());
  RateTable table;
  table.num_flows = spec.num_flows();
  for (double n : plan.scales)
    for (auto seed : plan.seeds) {
      RateRow row;
      row.scale = n;
      row.seed = seed;
      table.rows.push_back(std::move(row));
    }

  parallel_for(table.rows.size(), [&](std::size_t i) {
    RateRow& row = table.rows[i];
    SimOptions o;
    o.scale = row.scale;
    o.seed = row.seed;
    o.horizon = plan.horizon;
    o.warmup_fraction = plan.warmup_fraction;
    o.max_events = plan.max_events;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const SimTrace trace = run(spec, o);
      row.flow_rate = trace.flow_departure_rate;
      row.admit_rate = trace.flow_admit_rate;
      row.events = trace.events;
    } catch (const BudgetExceeded& e) {
      row.error = e.what();
    } catch (const InvariantViolation& e) {
      row.error = std::string("invariant violated: ") + e.what();
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  return table;
}

ConvergenceReport compare_to_fluid(const RateTable& table, const Eigen::VectorXd& target) {
  ConvergenceReport report;
  std::map<double, std::vector<double>> by_scale;
  for (const auto& row : table.rows) {
    if (!row.error.empty()) continue;
    if (row.flow_rate.size() != target.size()) throw std::invalid_argument("target rate vector has wrong length");
    by_scale[row.scale].push_back((row.flow_rate - target).cwiseAbs().maxCoeff());
  }
  for (const auto& [scale, devs] : by_scale) {
    ConvergenceRow r;
    r.scale = scale;
    r.seeds = devs.size();
    double sum = 0.0;
    for (double d : devs) sum += d;
    r.mean_deviation = sum / static_cast<double>(devs.size());
    double ss = 0.0;
    for (double d : devs) ss += (d - r.mean_deviation) * (d - r.mean_deviation);
    r.spread = devs.size() > 1 ? std::sqrt(ss / static_cast<double>(devs.size() - 1)) : 0.0;
    r.min_deviation = *std::min_element(devs.begin(), devs.end());
    r.max_deviation = *std::max_element(devs.begin(), devs.end());
    report.rows.push_back(r);
  }
  if (report.rows.size() >= 2) {
    bool nonincreasing = true, strict = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
      nonincreasing = nonincreasing && report.rows[i].mean_deviation <= report.rows[i - 1].mean_deviation;
      strict = strict && report.rows[i].mean_deviation < report.rows[i - 1].mean_deviation;
    }
    report.nonincreasing = nonincreasing;
    report.strictly_decreasing = strict;
  }
  return report;
}

std::string rate_table_csv(const RateTable& table) {
  std::string s = "scale,seed,events";
  for (int f = 0; f < table.num_flows; ++f) s += ",rate" + std::to_string(f + 1);
  for (int f = 0; f < table.num_flows; ++f) s += ",admit" + std::to_string(f + 1);
  s += ",error\n";
  for (const auto& row : table.rows) {
    s += format_double(row.scale) + "," + std::to_string(row.seed) + "," + std::to_string(row.events);
    for (int f = 0; f < table.num_flows; ++f) s += "," + (row.error.empty() ? format_double(row.flow_rate(f)) : "");
    for (int f = 0; f < table.num_flows; ++f) s += "," + (row.error.empty() ? format_double(row.admit_rate(f)) : "");
    std::string err = row.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    s += "," + err + "\n";
  }
  return s;
}

namespace {

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json state_json(const FluidState<double>& s) {
  return {{"queue", vec(s.queue)}, {"arrival_residual", vec(s.arrival)}, {"service_residual", vec(s.service)}};
}

json nan_to_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

}  // namespace

json to_json(const RateTable& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json r{{"scale", row.scale}, {"seed", row.seed}, {"events", row.events}};
    if (row.error.empty()) {
      r["flow_rate"] = vec(row.flow_rate);
      r["admit_rate"] = vec(row.admit_rate);
    } else {
      r["error"] = row.error;
    }
    rows.push_back(r);
  }
  return {{"flows", table.num_flows}, {"rows", rows}};
}

json to_json(const ConvergenceReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"scale", r.scale},
                    {"seeds", r.seeds},
                    {"mean_deviation", r.mean_deviation},
                    {"spread", r.spread},
                    {"min_deviation", r.min_deviation},
                    {"max_deviation", r.max_deviation}});
  json j{{"rows", rows}};
  j["nonincreasing"] = report.nonincreasing ? json(*report.nonincreasing) : json(nullptr);
  j["strictly_decreasing"] = report.strictly_decreasing ? json(*report.strictly_decreasing) : json(nullptr);
  return j;
}

json to_json(const C1Report& report) {
  json samples = json::array();
  for (const auto& s : report.samples) {
    json j{{"group", s.group}, {"start", state_json(s.start)}, {"distance", s.distance}, {"stays", s.stays}};
    j["hitting_time"] = s.hitting_time ? json(*s.hitting_time) : json(nullptr);
    j["ratio"] = nan_to_null(s.ratio);
    if (!s.error.empty()) j["error"] = s.error;
    samples.push_back(j);
  }
  json groups = json::array();
  for (const auto& g : report.groups) {
    json j{{"name", g.name}, {"samples", g.samples}, {"absorbed", g.absorbed}, {"max_ratio", g.max_ratio},
           {"blowup", g.blowup}};
    j["argmax"] = g.argmax ? json(*g.argmax) : json(nullptr);
    groups.push_back(j);
  }
  json j{{"passed", report.passed()},     {"max_ratio", report.max_ratio}, {"violations", report.violations},
         {"groups", groups},               {"samples", samples}};
  j["argmax"] = report.argmax ? json(*report.argmax) : json(nullptr);
  return j;
}

json to_json(const C2Report& report) {
  json samples = json::array();
  for (const auto& s : report.samples)
    samples.push_back({{"queue", vec(s.state.queue)}, {"rates", vec(s.rates)}, {"deviation", s.deviation}});
  json j{{"target", vec(report.target)},
         {"max_deviation", report.max_deviation},
         {"max_deviation_per_flow", vec(report.max_deviation_per_flow)},
         {"skipped", report.skipped},
         {"samples", samples}};
  j["argmax"] = report.argmax ? json(*report.argmax) : json(nullptr);
  return j;
}

json trace_summary(const SimTrace& trace) {
  const auto& s = trace.final_state;
  auto ivec = [](const CountVector& v) { return std::vector<std::int64_t>(v.data(), v.data() + v.size()); };
  return {{"scale", trace.scale},
          {"seed", trace.seed},
          {"horizon", trace.horizon},
          {"window_start", trace.window_start},
          {"events", trace.events},
          {"flow_departure_rate", vec(trace.flow_departure_rate)},
          {"flow_admit_rate", vec(trace.flow_admit_rate)},
          {"class_departure_rate", vec(trace.class_departure_rate)},
          {"final_queue", ivec(s.queue)},
          {"exogenous", ivec(s.exogenous)},
          {"admitted", ivec(s.admitted)},
          {"departed", ivec(s.departed)}};
}

json fluid_summary(const FluidTrajectory<double>& traj, const NetworkSpec& spec) {
  const auto& last = traj.points.back();
  json j{{"horizon", traj.horizon},
         {"breakpoints", traj.points.size()},
         {"final", state_json(last.state)},
         {"final_flow_rates", vec(last.rates.flow_departures(spec))},
         {"conservation_residual", conservation_residual(traj, spec)}};
  j["absorbed_at"] = traj.absorbed_at ? json(*traj.absorbed_at) : json(nullptr);
  return j;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace fluidq
