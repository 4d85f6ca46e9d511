#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fluidq/des.hpp"
#include "fluidq/fluid.hpp"

namespace fluidq {

/// File-system failure; the message carries the path (CLI exit code 2).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to the same double.
std::string format_double(double v);

std::string read_text(const std::filesystem::path& path);
/// Writes `text`, creating parent directories. Throws IoError.
void write_text(const std::filesystem::path& path, const std::string& text);

/// t, Q1..QK, D1..DK, Lambda1..LambdaF for every recorded sample.
std::string trace_csv(const SimTrace& trace);
/// t followed by one column per selected queue (0-based ids, 1-based headers).
std::string queue_series_csv(const SimTrace& trace, const std::vector<int>& classes);
/// Breakpoints: t, Q.., admit.., depart.. (rates in force from t on).
std::string fluid_csv(const FluidTrajectory<double>& traj);
/// Phase polyline of two queues: t, Qx, Qy.
std::string phase_csv(const FluidTrajectory<double>& traj, int x, int y);

}  // namespace fluidq
