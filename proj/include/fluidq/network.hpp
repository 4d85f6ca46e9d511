#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fluidq/distribution.hpp"

namespace fluidq {

/// Positive rational flow weight.
struct Rational {
  std::int64_t num = 1;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  Rational reduced() const;

  friend bool operator==(const Rational&, const Rational&) = default;
};

/// Parses "3", "3/2" or a finite decimal such as "0.25".
Rational parse_rational(const std::string& text);
std::string to_string(const Rational& r);

/// Width g(n) = constant + coefficient * n^exponent of the band between the
/// discard-on level nh and the discard-off level nh - g(n). Requires exponent < 1
/// so that g(n)/n -> 0.
struct HysteresisGap {
  double constant = 0.0;
  double coefficient = 0.0;
  double exponent = 0.5;

  double operator()(double n) const;
  friend bool operator==(const HysteresisGap&, const HysteresisGap&) = default;
};

struct Flow {
  std::vector<int> stations;  // route, one entry per hop
  std::vector<int> classes;   // class served at each hop
  Rational weight;
  DistributionSpec arrival;

  friend bool operator==(const Flow&, const Flow&) = default;
};

struct QueueClass {
  int station = 0;
  DistributionSpec service = DistributionSpec::exponential(1.0);
  /// Queue slot that no flow visits. It holds zero customers forever.
  bool idle = false;

  friend bool operator==(const QueueClass&, const QueueClass&) = default;
};

/// Static description of the network. Ids are 0-based; the ingress class of
/// flow f is class f. The struct is plain data: `validate` reports what is wrong
/// with it, and everything else assumes a valid spec.
class NetworkSpec {
 public:
  int num_stations = 0;
  std::vector<Flow> flows;
  std::vector<QueueClass> classes;
  double threshold_base = 1.0;  // h
  HysteresisGap hysteresis_gap;

  int num_flows() const { return static_cast<int>(flows.size()); }
  int num_classes() const { return static_cast<int>(classes.size()); }

  int station_of(int k) const { return classes[k].station; }
  /// Owning flow of class k, or -1 for idle slots.
  int flow_of(int k) const;
  int hop_of(int k) const;
  /// Class entered after service at k, or -1 at egress.
  int next_class(int k) const;
  int ingress_class(int f) const { return flows[f].classes.front(); }
  int egress_class(int f) const { return flows[f].classes.back(); }
  std::vector<int> classes_at(int station) const;

  double arrival_rate(int f) const { return flows[f].arrival.rate(); }
  double service_rate(int k) const { return classes[k].service.rate(); }
  /// Weight of the flow owning class k (1 for idle slots).
  double class_weight(int k) const;

  /// K x K routing matrix P with P(k, l) = 1 when class k feeds class l.
  Eigen::MatrixXi routing() const;
  /// d x K constituency matrix C.
  Eigen::MatrixXi constituency() const;
  Eigen::VectorXd mean_service_times() const;  // diagonal of M
  Eigen::VectorXd arrival_rates() const;       // alpha

  /// Integer visits per class in one round-robin cycle at `station`, proportional
  /// to the flow weights.
  std::vector<std::pair<int, std::int64_t>> visit_counts(int station) const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }
};

ValidationReport validate(const NetworkSpec& spec);

/// Utilisation of each station ignoring discarding: sum over its classes of alpha_ff(k) * m_k.
Eigen::VectorXd offered_load(const NetworkSpec& spec);

/// Hop of a flow description. `cls` pins the class id; otherwise numbering is automatic.
struct HopSpec {
  int station = 0;
  DistributionSpec service = DistributionSpec::exponential(1.0);
  std::optional<int> cls;
};

struct FlowSpec {
  std::vector<HopSpec> hops;
  Rational weight;
  DistributionSpec arrival;
};

struct IdleQueueSpec {
  int cls = 0;
  int station = 0;
};

struct NetworkDescription {
  int num_stations = 0;
  std::vector<FlowSpec> flows;
  std::vector<IdleQueueSpec> idle_queues;
  double threshold_base = 1.0;
  HysteresisGap hysteresis_gap;
};

/// Assigns class ids: flow f enters as class f, then the remaining hops are
/// numbered in flow order then hop order, skipping ids pinned by `cls` or
/// reserved for idle queues. Throws std::invalid_argument on conflicting pins.
NetworkSpec build_network(const NetworkDescription& desc);

/// Two-input, two-output switch: 3 flows, 4 stations, 8 queue slots.
///
///   queue 1 flow 1 @ station 1     queue 5 flow 1 @ station 3
///   queue 2 flow 2 @ station 1     queue 6 idle   @ station 3
///   queue 3 flow 3 @ station 2     queue 7 flow 2 @ station 4
///   queue 4 idle   @ station 2     queue 8 flow 3 @ station 4
///
/// (1-based labels; the C++ ids are one less.) Arrivals are pareto2(0.6),
/// services exponential(1), weights equal, h = 1.
NetworkSpec switch_example_spec();

/// Single flow through two stations in series.
NetworkSpec tandem_spec(double arrival_rate, double service_rate_1, double service_rate_2,
                        DistributionKind arrival_kind = DistributionKind::exponential,
                        DistributionKind service_kind = DistributionKind::exponential);

}  // namespace fluidq
