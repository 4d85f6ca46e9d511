#include "fluidq/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace fluidq {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("read failed on " + path.string());
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed on " + path.string());
}

namespace {

template <class V>
void append_row(std::string& s, const V& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    s += ',';
    if constexpr (std::is_integral_v<typename V::Scalar>)
      s += std::to_string(v(i));
    else
      s += format_double(static_cast<double>(v(i)));
  }
}

void append_header(std::string& s, const char* prefix, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) s += std::string(",") + prefix + std::to_string(i + 1);
}

}  // namespace

std::string trace_csv(const SimTrace& trace) {
  std::string s = "t";
  const Eigen::Index K = trace.final_state.queue.size();
  const Eigen::Index F = trace.final_state.admitted.size();
  append_header(s, "Q", K);
  append_header(s, "D", K);
  append_header(s, "Lambda", F);
  s += '\n';
  for (const auto& smp : trace.samples) {
    s += format_double(smp.t);
    append_row(s, smp.queue);
    append_row(s, smp.departed);
    append_row(s, smp.admitted);
    s += '\n';
  }
  return s;
}

std::string queue_series_csv(const SimTrace& trace, const std::vector<int>& classes) {
  std::string s = "t";
  for (int k : classes) s += ",Q" + std::to_string(k + 1);
  s += '\n';
  for (const auto& smp : trace.samples) {
    s += format_double(smp.t);
    for (int k : classes) s += "," + std::to_string(smp.queue(k));
    s += '\n';
  }
  return s;
}

std::string fluid_csv(const FluidTrajectory<double>& traj) {
  std::string s = "t";
  if (traj.points.empty()) return s + '\n';
  const auto& p0 = traj.points.front();
  append_header(s, "Q", p0.state.queue.size());
  append_header(s, "admit", p0.rates.admit.size());
  append_header(s, "depart", p0.rates.depart.size());
  s += '\n';
  for (const auto& p : traj.points) {
    s += format_double(p.t);
    append_row(s, p.state.queue);
    append_row(s, p.rates.admit);
    append_row(s, p.rates.depart);
    s += '\n';
  }
  return s;
}

std::string phase_csv(const FluidTrajectory<double>& traj, int x, int y) {
  std::string s = "t,Q" + std::to_string(x + 1) + ",Q" + std::to_string(y + 1) + "\n";
  for (const auto& p : traj.points)
    s += format_double(p.t) + "," + format_double(p.state.queue(x)) + "," + format_double(p.state.queue(y)) + "\n";
  return s;
}

}  // namespace fluidq
