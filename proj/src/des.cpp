#include "fluidq/des.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fluidq {

RoundRobinSchedule RoundRobinSchedule::build(const NetworkSpec& spec, int station) {
  struct Slot {
    std::int64_t index;   // j
    std::int64_t visits;  // w
    int cls;
  };
  std::vector<Slot> slots;
  for (const auto& [k, v] : spec.visit_counts(station)) {
    if (spec.classes[k].idle) continue;
    for (std::int64_t j = 0; j < v; ++j) slots.push_back({j, v, k});
  }
  // Order by virtual slot (2j + 1) / (2w); exact in integers.
  std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    return (2 * a.index + 1) * b.visits < (2 * b.index + 1) * a.visits;
  });
  RoundRobinSchedule schedule;
  for (const auto& s : slots) schedule.slots.push_back(s.cls);
  return schedule;
}

std::optional<int> RoundRobinSchedule::next(const CountVector& queue) {
  const std::size_t n = slots.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pos = (cursor + i) % n;
    const int k = slots[pos];
    if (queue(k) > 0) {
      cursor = (pos + 1) % n;
      return k;
    }
  }
  return std::nullopt;
}

SimState SimState::initial(const NetworkSpec& spec, const CountVector& q0, const Thresholds& thresholds) {
  const int K = spec.num_classes();
  const int F = spec.num_flows();
  const int d = spec.num_stations;
  SimState s;
  s.queue = q0;
  s.initial_queue = q0;
  s.discarding.assign(K, 0);
  s.arrival_due.assign(F, 0.0);
  s.service_due.assign(d, 0.0);
  s.in_service.assign(d, -1);
  for (int i = 0; i < d; ++i) s.schedules.push_back(RoundRobinSchedule::build(spec, i));
  s.exogenous = CountVector::Zero(F);
  s.admitted = CountVector::Zero(F);
  s.arrived = CountVector::Zero(K);
  s.departed = CountVector::Zero(K);
  s.started = CountVector::Zero(K);
  s.busy = Eigen::VectorXd::Zero(K);
  s.idle = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < K; ++k) s.discarding[k] = static_cast<double>(q0(k)) >= thresholds.upper ? 1 : 0;
  return s;
}

double SimState::service_residual(const NetworkSpec& spec, int k) const {
  const int i = spec.station_of(k);
  return in_service[i] == k ? service_due[i] - t : 0.0;
}

std::int64_t SimState::backlog(const NetworkSpec& spec, int station) const {
  std::int64_t total = 0;
  for (int k = 0; k < spec.num_classes(); ++k)
    if (spec.station_of(k) == station) total += queue(k);
  return total;
}

void update_discarding(SimState& state, int k, const Thresholds& thresholds) {
  const auto q = static_cast<double>(state.queue(k));
  if (q >= thresholds.upper)
    state.discarding[k] = 1;
  else if (q <= thresholds.lower)
    state.discarding[k] = 0;
}

Admission admit_or_discard(SimState& state, const NetworkSpec& spec, int f, const Thresholds& thresholds) {
  ++state.exogenous(f);
  for (int k : spec.flows[f].classes)
    if (state.discarding[k]) return Admission::discarded;
  const int ingress = spec.ingress_class(f);
  ++state.admitted(f);
  ++state.arrived(ingress);
  ++state.queue(ingress);
  update_discarding(state, ingress, thresholds);
  return Admission::admitted;
}

std::optional<int> next_service_class(SimState& state, int station) {
  return state.schedules[station].next(state.queue);
}

std::vector<std::string> check_invariants(const SimState& state, const NetworkSpec& spec,
                                          const Thresholds& thresholds) {
  std::vector<std::string> out;
  const int K = spec.num_classes();
  const int F = spec.num_flows();
  auto at = [&](const char* what, int idx) {
    std::ostringstream os;
    os << what << " [" << idx + 1 << "] at t=" << state.t;
    out.push_back(os.str());
  };

  CountVector inflow = spec.routing().cast<std::int64_t>().transpose() * state.departed;
  for (int f = 0; f < F; ++f) inflow(spec.ingress_class(f)) += state.admitted(f);
  for (int k = 0; k < K; ++k)
    if (inflow(k) != state.arrived(k)) at("A != P^T D + Lambda", k);

  const CountVector expected_q = state.initial_queue + state.arrived - state.departed;
  for (int k = 0; k < K; ++k) {
    if (expected_q(k) != state.queue(k)) at("Q != Q(0) + A - D", k);
    if (state.queue(k) < 0) at("Q < 0", k);
    if (state.busy(k) < 0.0) at("T < 0", k);
    const int i = spec.station_of(k);
    const std::int64_t in_progress = state.in_service[i] == k ? 1 : 0;
    if (state.started(k) - state.departed(k) != in_progress) at("D != S(T)", k);
    if (in_progress && state.queue(k) < 1) at("class in service with empty queue", k);

    const auto q = static_cast<double>(state.queue(k));
    if (q >= thresholds.upper && !state.discarding[k]) at("H = 0 with Q >= nh", k);
    if (q < thresholds.upper && q <= thresholds.lower && state.discarding[k]) at("H = 1 with Q <= nh - g", k);
  }

  const Eigen::VectorXd station_busy = spec.constituency().cast<double>() * state.busy;
  const double tol = 1e-9 * std::max(1.0, state.t);
  for (int i = 0; i < spec.num_stations; ++i) {
    if (std::abs(state.idle(i) - (state.t - station_busy(i))) > tol) at("I != t - C T", i);
    if (state.idle(i) < -tol) at("I < 0", i);
  }
  if (state.idle_with_backlog != 0) out.push_back("station idled with a nonempty queue");

  for (int f = 0; f < F; ++f)
    if (state.admitted(f) > state.exogenous(f)) at("Lambda > E", f);
  return out;
}

namespace {

class Engine {
 public:
  Engine(const NetworkSpec& spec, const SimOptions& options)
      : spec_(spec),
        options_(options),
        thresholds_(Thresholds::for_scale(spec, options.scale)),
        streams_(make_streams(spec, options.seed)) {}

  SimTrace run();

 private:
  void advance(double to);
  void try_start(int station);
  void complete(int k);
  void record_sample(double t);
  void snapshot_window();
  void check();

  const NetworkSpec& spec_;
  const SimOptions& options_;
  Thresholds thresholds_;
  StreamSet streams_;
  SimState state_;
  EventQueue events_;
  SimTrace trace_;
  bool window_taken_ = false;
  std::uint64_t next_sample_ = 0;
};

void Engine::record_sample(double t) {
  trace_.samples.push_back({t, state_.queue, state_.departed, state_.admitted});
}

void Engine::snapshot_window() {
  trace_.departed_at_window = state_.departed;
  trace_.admitted_at_window = state_.admitted;
  trace_.exogenous_at_window = state_.exogenous;
  window_taken_ = true;
}

void Engine::advance(double to) {
  if (!window_taken_ && to > trace_.window_start) snapshot_window();
  if (options_.sample_interval > 0.0) {
    for (;;) {
      const double ts = static_cast<double>(next_sample_) * options_.sample_interval;
      if (!(ts < to) || ts > options_.horizon) break;
      record_sample(ts);
      ++next_sample_;
    }
  }
  const double dt = to - state_.t;
  for (int i = 0; i < spec_.num_stations; ++i) {
    const int k = state_.in_service[i];
    if (k >= 0) {
      state_.busy(k) += dt;
    } else {
      state_.idle(i) += dt;
      if (dt > 0.0 && state_.backlog(spec_, i) > 0) ++state_.idle_with_backlog;
    }
  }
  state_.t = to;
}

void Engine::try_start(int station) {
  if (state_.in_service[station] >= 0) return;
  const auto k = next_service_class(state_, station);
  if (!k) return;
  state_.in_service[station] = *k;
  ++state_.started(*k);
  const double v = streams_.services[*k].renew();
  state_.service_due[station] = state_.t + v;
  events_.push({state_.service_due[station], EventKind::service_completion, *k});
}

void Engine::complete(int k) {
  const int i = spec_.station_of(k);
  ++state_.departed(k);
  --state_.queue(k);
  update_discarding(state_, k, thresholds_);
  state_.in_service[i] = -1;
  if (options_.log_departures) trace_.departures.push_back({state_.t, k});
  if (const int l = spec_.next_class(k); l >= 0) {
    ++state_.arrived(l);
    ++state_.queue(l);
    update_discarding(state_, l, thresholds_);
    try_start(spec_.station_of(l));
  }
  try_start(i);
}

void Engine::check() {
  const auto breaches = check_invariants(state_, spec_, thresholds_);
  if (!breaches.empty()) throw InvariantViolation(breaches.front());
}

SimTrace Engine::run() {
  if (!(options_.scale > 0.0) || !std::isfinite(options_.scale)) throw std::invalid_argument("scale n must be positive");
  if (!(options_.horizon > 0.0) || !std::isfinite(options_.horizon))
    throw std::invalid_argument("empty measurement window: horizon must be positive");
  if (!(options_.warmup_fraction >= 0.0 && options_.warmup_fraction < 1.0))
    throw std::invalid_argument("warm-up fraction must lie in [0, 1)");
  if (!(options_.sample_interval >= 0.0)) throw std::invalid_argument("sample interval must be nonnegative");

  const int K = spec_.num_classes();
  CountVector q0 = options_.initial_queue.value_or(CountVector::Zero(K));
  if (q0.size() != K) throw std::invalid_argument("initial queue has wrong length");
  for (int k = 0; k < K; ++k) {
    if (q0(k) < 0) throw std::invalid_argument("initial queue must be nonnegative");
    if (spec_.classes[k].idle && q0(k) != 0) throw std::invalid_argument("idle queue slot must start empty");
  }

  trace_.scale = options_.scale;
  trace_.seed = options_.seed;
  trace_.horizon = options_.horizon;
  trace_.window_start = options_.warmup_fraction * options_.horizon;
  if (!(trace_.window_start < options_.horizon)) throw std::invalid_argument("empty measurement window");

  state_ = SimState::initial(spec_, q0, thresholds_);
  if (trace_.window_start == 0.0) snapshot_window();

  for (int f = 0; f < spec_.num_flows(); ++f) {
    state_.arrival_due[f] = streams_.arrivals[f].renew();
    events_.push({state_.arrival_due[f], EventKind::arrival, f});
  }
  for (int i = 0; i < spec_.num_stations; ++i) try_start(i);

  std::uint64_t count = 0;
  while (!events_.empty() && events_.top().time <= options_.horizon) {
    const Event e = events_.pop();
    advance(e.time);
    if (e.kind == EventKind::arrival) {
      const int f = e.id;
      if (admit_or_discard(state_, spec_, f, thresholds_) == Admission::admitted)
        try_start(spec_.station_of(spec_.ingress_class(f)));
      state_.arrival_due[f] = state_.t + streams_.arrivals[f].renew();
      events_.push({state_.arrival_due[f], EventKind::arrival, f});
    } else {
      complete(e.id);
    }
    ++count;
    if (count > options_.max_events) {
      std::ostringstream os;
      os << "event budget of " << options_.max_events << " exhausted at t=" << state_.t;
      throw BudgetExceeded(os.str());
    }
    if (options_.check_every != 0 && count % options_.check_every == 0) check();
  }
  advance(options_.horizon);
  if (options_.sample_interval > 0.0) {
    for (;;) {
      const double ts = static_cast<double>(next_sample_) * options_.sample_interval;
      if (ts > options_.horizon) break;
      record_sample(ts);
      ++next_sample_;
    }
  }
  check();

  trace_.events = count;
  const double window = options_.horizon - trace_.window_start;
  trace_.class_departure_rate = (state_.departed - trace_.departed_at_window).cast<double>() / window;
  trace_.flow_admit_rate = (state_.admitted - trace_.admitted_at_window).cast<double>() / window;
  trace_.flow_departure_rate.resize(spec_.num_flows());
  for (int f = 0; f < spec_.num_flows(); ++f)
    trace_.flow_departure_rate(f) = trace_.class_departure_rate(spec_.egress_class(f));
  trace_.final_state = std::move(state_);
  return std::move(trace_);
}

}  // namespace

SimTrace run(const NetworkSpec& spec, const SimOptions& options) { return Engine(spec, options).run(); }

ScaledPath scaled_trajectory(const SimTrace& trace, double n, double T, int points) {
  if (!(n > 0.0)) throw std::domain_error("scale must be positive");
  if (points < 1) throw std::domain_error("need at least one grid point");
  if (trace.horizon < n * T * (1.0 - 1e-12)) throw std::domain_error("insufficient horizon for scaled trajectory");
  if (trace.samples.empty()) throw std::domain_error("trace has no sampled path");
  const auto K = trace.samples.front().queue.size();
  ScaledPath path;
  path.t.resize(points);
  path.queue.resize(points, K);
  for (int j = 0; j < points; ++j) {
    const double tj = points == 1 ? 0.0 : T * static_cast<double>(j) / static_cast<double>(points - 1);
    const double real_t = n * tj;
    auto it = std::upper_bound(trace.samples.begin(), trace.samples.end(), real_t,
                               [](double v, const SimSample& s) { return v < s.t; });
    if (it != trace.samples.begin()) --it;
    path.t(j) = tj;
    path.queue.row(j) = it->queue.cast<double>().transpose() / n;
  }
  return path;
}

}  // namespace fluidq
