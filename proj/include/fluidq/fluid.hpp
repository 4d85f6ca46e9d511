#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fluidq/network.hpp"

namespace fluidq {

template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct FluidError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fluid state [Q; U; V] at threshold hbar. U and V are residuals that run down
/// to 0 at unit rate (V only while its class holds the station).
template <class Scalar>
struct FluidState {
  Vec<Scalar> queue;     // per class
  Vec<Scalar> arrival;   // U, per flow
  Vec<Scalar> service;   // V, per class
  Scalar threshold = Scalar(1);

  static FluidState zero(const NetworkSpec& spec, Scalar hbar) {
    return {Vec<Scalar>::Zero(spec.num_classes()), Vec<Scalar>::Zero(spec.num_flows()),
            Vec<Scalar>::Zero(spec.num_classes()), hbar};
  }
  static FluidState from_queue(const NetworkSpec& spec, const Vec<Scalar>& q, Scalar hbar) {
    FluidState s = zero(spec, hbar);
    s.queue = q;
    return s;
  }
};

template <class Scalar>
struct RateVector {
  Vec<Scalar> admit;   // per flow, in [0, alpha_f]
  Vec<Scalar> depart;  // per class
  Vec<Scalar> busy;    // per class, in [0, 1]
  Vec<Scalar> idle;    // per station
  Vec<Scalar> inflow;  // per class, P^T depart + admit at ingress
  Vec<Scalar> drift;   // per class, inflow - depart

  Vec<Scalar> flow_departures(const NetworkSpec& spec) const;
};

enum class QueueStatus : std::uint8_t { empty, interior, at_threshold, above_threshold };

struct Regime {
  std::vector<QueueStatus> queue;
  std::vector<bool> arrivals_on;  // per flow, U_f = 0
  std::vector<bool> holding;      // per class, V_k > 0

  friend bool operator==(const Regime&, const Regime&) = default;
};

/// Absolute tolerance used to decide empty / at-threshold: 1e-10 max(1, hbar).
template <class Scalar>
Scalar state_tolerance(Scalar hbar);

template <class Scalar>
Regime classify(const FluidState<Scalar>& state, const NetworkSpec& spec);

/// Instantaneous rates at `state`.
///
/// Admission: 0 for flows whose arrivals have not started or with a queue above
/// hbar; alpha_f when all queues are below; otherwise the largest rate in
/// [0, alpha_f] that keeps every at-threshold queue of the flow from rising.
/// Stations split capacity by weighted water-filling: backlogged queues share in
/// weight proportion, empty queues take their inflow up to their fair share.
/// A class with V > 0 holds its station: busy 1, depart 0.
/// Throws FluidError when the allocation does not settle.
template <class Scalar>
RateVector<Scalar> solve_rates(const FluidState<Scalar>& state, const NetworkSpec& spec);

/// Per-class departure rates M^-1 T' and per-flow rates read at the egress classes.
template <class Scalar>
struct DepartureRates {
  Vec<Scalar> per_class;
  Vec<Scalar> per_flow;
};

template <class Scalar>
DepartureRates<Scalar> departure_rates_at(const FluidState<Scalar>& state, const NetworkSpec& spec);

template <class Scalar>
struct Breakpoint {
  Scalar t = Scalar(0);
  FluidState<Scalar> state;
  RateVector<Scalar> rates;  // in force on [t, next t)
  Regime regime;
  // cumulative processes at t
  Vec<Scalar> admitted;  // per flow
  Vec<Scalar> arrived;   // per class
  Vec<Scalar> departed;  // per class
  Vec<Scalar> busy;      // per class
  Vec<Scalar> idle;      // per station
};

template <class Scalar>
struct FluidTrajectory {
  std::vector<Breakpoint<Scalar>> points;
  Scalar horizon = Scalar(0);
  std::optional<Scalar> absorbed_at;

  /// Linear interpolation of the state at time t in [0, horizon].
  FluidState<Scalar> at(Scalar t) const;
  const FluidState<Scalar>& final_state() const { return points.back().state; }
};

struct FluidOptions {
  std::size_t max_breakpoints = 1'000'000;
  /// Zeno guard: abort after this many consecutive steps shorter than min_step.
  std::size_t max_tiny_steps = 10'000;
  double min_step = 1e-13;
};

/// Event-driven integration: rates are constant between breakpoints, which are
/// the times a queue reaches 0 or hbar, a residual runs out, or the horizon.
/// Once no queue moves and no residual is pending, jumps to the horizon.
template <class Scalar>
FluidTrajectory<Scalar> integrate(const FluidState<Scalar>& state0, const NetworkSpec& spec, Scalar horizon,
                                  const FluidOptions& options = {});

/// Largest |Q(t) - Q(0) - A(t) + D(t)| over breakpoints, with A = P^T D + Lambda.
template <class Scalar>
Scalar conservation_residual(const FluidTrajectory<Scalar>& traj, const NetworkSpec& spec);

}  // namespace fluidq
