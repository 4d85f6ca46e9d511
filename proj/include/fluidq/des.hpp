#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fluidq/distribution.hpp"
#include "fluidq/network.hpp"

namespace fluidq {

using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvariantViolation : std::logic_error {
  using std::logic_error::logic_error;
};

/// Discard-on level nh and discard-off level nh - g(n).
struct Thresholds {
  double upper = 0.0;
  double lower = 0.0;

  static Thresholds for_scale(const NetworkSpec& spec, double n) {
    const double nh = n * spec.threshold_base;
    return {nh, nh - spec.hysteresis_gap(n)};
  }
};

/// Cyclic weighted round-robin visit schedule of one station.
///
/// Each class appears w visits per cycle (integer weights), interleaved by
/// virtual slot (j + 1/2) / w. The cursor survives idle periods.
struct RoundRobinSchedule {
  std::vector<int> slots;
  std::size_t cursor = 0;

  static RoundRobinSchedule build(const NetworkSpec& spec, int station);

  /// Next backlogged class at or after the cursor; advances past it.
  std::optional<int> next(const CountVector& queue);

  friend bool operator==(const RoundRobinSchedule&, const RoundRobinSchedule&) = default;
};

enum class EventKind : std::uint8_t { service_completion = 0, arrival = 1 };

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::arrival;
  int id = 0;  // class for completions, flow for arrivals

  /// Total order: time, then completions before arrivals, then id.
  friend bool operator<(const Event& a, const Event& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.id < b.id;
  }
  friend bool operator>(const Event& a, const Event& b) { return b < a; }
};

class EventQueue {
 public:
  void push(const Event& e) { heap_.push(e); }
  Event pop() {
    Event e = heap_.top();
    heap_.pop();
    return e;
  }
  const Event& top() const { return heap_.top(); }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  std::priority_queue<Event, std::vector<Event>, std::greater<>> heap_;
};

/// Markov state X = [Q; U; V; H] plus cumulative counters.
///
/// Residuals are stored as absolute due times; `arrival_residual` and
/// `service_residual` give U and V.
struct SimState {
  double t = 0.0;
  CountVector queue;          // Q, per class
  CountVector initial_queue;  // Q(0)
  std::vector<std::uint8_t> discarding;  // H, per class
  std::vector<double> arrival_due;       // per flow
  std::vector<double> service_due;       // per station, valid while busy
  std::vector<int> in_service;           // per station, -1 when idle
  std::vector<RoundRobinSchedule> schedules;

  CountVector exogenous;  // E, per flow
  CountVector admitted;   // Lambda, per flow
  CountVector arrived;    // A, per class
  CountVector departed;   // D, per class
  CountVector started;    // services begun, per class
  Eigen::VectorXd busy;   // T, per class
  Eigen::VectorXd idle;   // I, per station

  std::uint64_t idle_with_backlog = 0;  // work-conservation breaches, expected 0

  static SimState initial(const NetworkSpec& spec, const CountVector& q0, const Thresholds& thresholds);

  double arrival_residual(int f) const { return arrival_due[f] - t; }
  double service_residual(const NetworkSpec& spec, int k) const;
  std::int64_t backlog(const NetworkSpec& spec, int station) const;
};

enum class Admission { admitted, discarded };

/// Updates H_k from Q_k: on at Q >= nh, off at Q <= nh - g, unchanged in between.
void update_discarding(SimState& state, int k, const Thresholds& thresholds);

/// Handles an exogenous flow-f arrival at the current time. The decision uses the
/// flags as they stood before this arrival, so the arrival that lifts a queue to
/// nh is itself admitted.
Admission admit_or_discard(SimState& state, const NetworkSpec& spec, int f, const Thresholds& thresholds);

/// Class the station should serve next, or nothing when all its queues are empty.
std::optional<int> next_service_class(SimState& state, int station);

/// Identities A = P^T D + Lambda, Q = Q(0) + A - D, Q >= 0, I = t - C T,
/// D = S(T), Lambda <= E and the hysteresis rules. Returns one line per breach.
std::vector<std::string> check_invariants(const SimState& state, const NetworkSpec& spec,
                                          const Thresholds& thresholds);

struct SimOptions {
  double scale = 1.0;  // n; thresholds are n * h
  std::uint64_t seed = 1;
  double horizon = 1.0;
  double warmup_fraction = 0.2;
  /// Uniform sampling interval for the recorded path; 0 disables sampling.
  double sample_interval = 0.0;
  std::optional<CountVector> initial_queue;
  std::uint64_t max_events = 2'000'000'000ULL;
#ifdef NDEBUG
  std::uint64_t check_every = 1000;
#else
  std::uint64_t check_every = 1;
#endif
  bool log_departures = false;
};

struct SimSample {
  double t = 0.0;
  CountVector queue;
  CountVector departed;
  CountVector admitted;
};

struct DepartureRecord {
  double t = 0.0;
  int cls = 0;
};

struct SimTrace {
  double scale = 1.0;
  std::uint64_t seed = 0;
  double horizon = 0.0;
  double window_start = 0.0;
  std::uint64_t events = 0;
  SimState final_state;
  CountVector departed_at_window;
  CountVector admitted_at_window;
  CountVector exogenous_at_window;
  std::vector<SimSample> samples;
  std::vector<DepartureRecord> departures;

  Eigen::VectorXd class_departure_rate;  // per class over the window
  Eigen::VectorXd flow_departure_rate;   // per flow, at the egress class
  Eigen::VectorXd flow_admit_rate;       // per flow
};

/// Simulates to `options.horizon`. Throws BudgetExceeded past `max_events`,
/// InvariantViolation if a checked identity breaks and std::invalid_argument on
/// bad options (including an empty measurement window).
SimTrace run(const NetworkSpec& spec, const SimOptions& options);

struct ScaledPath {
  Eigen::VectorXd t;
  Eigen::MatrixXd queue;  // row j is Q(n t_j) / n
};

/// Q(n t) / n on `points` uniform times over [0, T], read off the sampled path.
/// Throws std::domain_error when the trace horizon is shorter than n T or the
/// trace has no samples.
ScaledPath scaled_trajectory(const SimTrace& trace, double n, double T, int points);

}  // namespace fluidq
