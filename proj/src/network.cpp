#include "fluidq/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fluidq {

Rational Rational::reduced() const {
  const std::int64_t g = std::gcd(num, den);
  if (g == 0) return *this;
  Rational r{num / g, den / g};
  if (r.den < 0) {
    r.num = -r.num;
    r.den = -r.den;
  }
  return r;
}

Rational parse_rational(const std::string& text) {
  auto parse_int = [&](const std::string& s) -> std::int64_t {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument("malformed rational: " + text);
    return v;
  };
  try {
    if (const auto slash = text.find('/'); slash != std::string::npos) {
      const Rational r{parse_int(text.substr(0, slash)), parse_int(text.substr(slash + 1))};
      if (r.den == 0) throw std::invalid_argument("zero denominator: " + text);
      return r.reduced();
    }
    if (const auto dot = text.find('.'); dot != std::string::npos) {
      const std::string frac = text.substr(dot + 1);
      if (frac.size() > 15) throw std::invalid_argument("too many decimals: " + text);
      std::int64_t den = 1;
      for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
      const std::string digits = text.substr(0, dot) + frac;
      return Rational{parse_int(digits), den}.reduced();
    }
    return Rational{parse_int(text), 1};
  } catch (const std::out_of_range&) {
    throw std::invalid_argument("rational out of range: " + text);
  } catch (const std::invalid_argument& e) {
    if (std::string(e.what()).find(text) != std::string::npos) throw;
    throw std::invalid_argument("malformed rational: " + text);
  }
}

std::string to_string(const Rational& r) {
  return r.den == 1 ? std::to_string(r.num) : std::to_string(r.num) + "/" + std::to_string(r.den);
}

double HysteresisGap::operator()(double n) const {
  return constant + (coefficient == 0.0 ? 0.0 : coefficient * std::pow(n, exponent));
}

int NetworkSpec::flow_of(int k) const {
  for (int f = 0; f < num_flows(); ++f)
    for (int c : flows[f].classes)
      if (c == k) return f;
  return -1;
}

int NetworkSpec::hop_of(int k) const {
  for (const auto& flow : flows)
    for (std::size_t j = 0; j < flow.classes.size(); ++j)
      if (flow.classes[j] == k) return static_cast<int>(j);
  return -1;
}

int NetworkSpec::next_class(int k) const {
  for (const auto& flow : flows)
    for (std::size_t j = 0; j + 1 < flow.classes.size(); ++j)
      if (flow.classes[j] == k) return flow.classes[j + 1];
  return -1;
}

std::vector<int> NetworkSpec::classes_at(int station) const {
  std::vector<int> out;
  for (int k = 0; k < num_classes(); ++k)
    if (classes[k].station == station) out.push_back(k);
  return out;
}

double NetworkSpec::class_weight(int k) const {
  const int f = flow_of(k);
  return f < 0 ? 1.0 : flows[f].weight.value();
}

Eigen::MatrixXi NetworkSpec::routing() const {
  Eigen::MatrixXi P = Eigen::MatrixXi::Zero(num_classes(), num_classes());
  for (const auto& flow : flows)
    for (std::size_t j = 0; j + 1 < flow.classes.size(); ++j) {
      const int from = flow.classes[j];
      const int to = flow.classes[j + 1];
      if (from >= 0 && from < num_classes() && to >= 0 && to < num_classes()) P(from, to) = 1;
    }
  return P;
}

Eigen::MatrixXi NetworkSpec::constituency() const {
  Eigen::MatrixXi C = Eigen::MatrixXi::Zero(num_stations, num_classes());
  for (int k = 0; k < num_classes(); ++k)
    if (classes[k].station >= 0 && classes[k].station < num_stations) C(classes[k].station, k) = 1;
  return C;
}

Eigen::VectorXd NetworkSpec::mean_service_times() const {
  Eigen::VectorXd m(num_classes());
  for (int k = 0; k < num_classes(); ++k) m(k) = classes[k].service.mean();
  return m;
}

Eigen::VectorXd NetworkSpec::arrival_rates() const {
  Eigen::VectorXd a(num_flows());
  for (int f = 0; f < num_flows(); ++f) a(f) = arrival_rate(f);
  return a;
}

std::vector<std::pair<int, std::int64_t>> NetworkSpec::visit_counts(int station) const {
  std::vector<std::pair<int, Rational>> weights;
  for (int k : classes_at(station)) {
    const int f = flow_of(k);
    weights.emplace_back(k, f < 0 ? Rational{1, 1} : flows[f].weight.reduced());
  }
  std::int64_t common_den = 1;
  for (const auto& [k, w] : weights) common_den = std::lcm(common_den, w.den);
  std::vector<std::pair<int, std::int64_t>> visits;
  std::int64_t g = 0;
  for (const auto& [k, w] : weights) {
    const std::int64_t v = w.num * (common_den / w.den);
    visits.emplace_back(k, v);
    g = std::gcd(g, v);
  }
  if (g > 1)
    for (auto& [k, v] : visits) v /= g;
  return visits;
}

namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

ValidationReport validate(const NetworkSpec& spec) {
  ValidationReport report;
  auto error = [&](const std::string& msg) { report.errors.push_back(msg); };
  const int K = spec.num_classes();
  const int F = spec.num_flows();
  const int d = spec.num_stations;

  if (d < 1) error("network has no stations");
  if (F < 1) error("network has no flows");
  if (K < F) error("fewer classes than flows");
  if (!positive_finite(spec.threshold_base)) error("threshold h must be positive");
  const auto& gap = spec.hysteresis_gap;
  if (gap.constant < 0.0 || gap.coefficient < 0.0) error("hysteresis gap must be nonnegative");
  if (gap.coefficient > 0.0 && gap.exponent >= 1.0) error("hysteresis gap must be o(n): exponent < 1");

  std::vector<int> owners(K, 0);
  for (int f = 0; f < F; ++f) {
    const auto& flow = spec.flows[f];
    const std::string name = "flow " + std::to_string(f + 1);
    if (flow.stations.empty()) {
      error(name + ": empty path");
      continue;
    }
    if (flow.stations.size() != flow.classes.size()) error(name + ": path and class list lengths differ");
    std::set<int> seen(flow.stations.begin(), flow.stations.end());
    if (seen.size() != flow.stations.size()) error(name + ": path visits a station more than once");
    for (int s : flow.stations)
      if (s < 0 || s >= d) error(name + ": station id out of range");
    if (!flow.classes.empty() && flow.classes.front() != f)
      error(name + ": ingress class must equal the flow id");
    for (std::size_t j = 0; j < flow.classes.size(); ++j) {
      const int k = flow.classes[j];
      if (k < 0 || k >= K) {
        error(name + ": class id out of range");
        continue;
      }
      ++owners[k];
      if (j < flow.stations.size() && spec.classes[k].station != flow.stations[j])
        error(name + ": class " + std::to_string(k + 1) + " is not served at the hop's station");
    }
    if (!(flow.weight.num > 0 && flow.weight.den > 0)) error(name + ": weight must be positive");
    if (!positive_finite(flow.arrival.parameter)) error(name + ": arrival rate must be positive");
    if (!flow.arrival.unbounded_spread_out())
      report.warnings.push_back(name + ": " + flow.arrival.describe() +
                                " arrivals are neither unbounded nor spread-out");
  }

  for (int k = 0; k < K; ++k) {
    const auto& cls = spec.classes[k];
    const std::string name = "class " + std::to_string(k + 1);
    if (cls.station < 0 || cls.station >= d) error(name + ": station id out of range");
    if (!positive_finite(cls.service.parameter)) error(name + ": service rate must be positive");
    if (cls.idle && owners[k] != 0) error(name + ": idle queue is visited by a flow");
    if (!cls.idle && owners[k] == 0) error(name + ": belongs to no flow");
    if (owners[k] > 1) error(name + ": belongs to more than one (flow, hop)");
  }

  if (K > 0) {
    const Eigen::MatrixXi P = spec.routing();
    for (int k = 0; k < K; ++k)
      if (P.row(k).sum() > 1) error("routing row " + std::to_string(k + 1) + " has more than one successor");
    // Entries stay small: (P^j)_{kl} counts walks of length j.
    Eigen::MatrixXi power = P;
    for (int j = 1; j < K && !power.isZero(); ++j) power = (power * P).unaryExpr([](int v) { return v > 0 ? 1 : 0; });
    if (!power.isZero()) error("routing matrix is not nilpotent (cycle in routes)");
    const Eigen::MatrixXi C = spec.constituency();
    for (int k = 0; k < K; ++k)
      if (C.col(k).sum() != 1) error("constituency column " + std::to_string(k + 1) + " must have exactly one 1");
  }
  return report;
}

Eigen::VectorXd offered_load(const NetworkSpec& spec) {
  Eigen::VectorXd load = Eigen::VectorXd::Zero(spec.num_stations);
  for (int k = 0; k < spec.num_classes(); ++k) {
    const int f = spec.flow_of(k);
    if (f < 0) continue;
    load(spec.station_of(k)) += spec.arrival_rate(f) * spec.classes[k].service.mean();
  }
  return load;
}

NetworkSpec build_network(const NetworkDescription& desc) {
  int hop_total = 0;
  for (const auto& f : desc.flows) hop_total += static_cast<int>(f.hops.size());
  const int K = hop_total + static_cast<int>(desc.idle_queues.size());
  const int F = static_cast<int>(desc.flows.size());

  std::vector<bool> taken(K, false);
  auto claim = [&](int k) {
    if (k < 0 || k >= K) throw std::invalid_argument("class id " + std::to_string(k + 1) + " out of range");
    if (taken[k]) throw std::invalid_argument("class id " + std::to_string(k + 1) + " assigned twice");
    taken[k] = true;
  };
  for (const auto& q : desc.idle_queues) claim(q.cls);
  for (int f = 0; f < F; ++f) {
    const auto& hops = desc.flows[f].hops;
    if (hops.empty()) throw std::invalid_argument("flow " + std::to_string(f + 1) + " has no hops");
    if (hops.front().cls && *hops.front().cls != f)
      throw std::invalid_argument("flow " + std::to_string(f + 1) + ": ingress class must equal the flow id");
    claim(f);
    for (std::size_t j = 1; j < hops.size(); ++j)
      if (hops[j].cls) claim(*hops[j].cls);
  }

  NetworkSpec spec;
  spec.num_stations = desc.num_stations;
  spec.threshold_base = desc.threshold_base;
  spec.hysteresis_gap = desc.hysteresis_gap;
  spec.classes.resize(K);
  for (const auto& q : desc.idle_queues) spec.classes[q.cls] = {q.station, DistributionSpec::exponential(1.0), true};

  int next_free = 0;
  auto fresh = [&] {
    while (next_free < K && taken[next_free]) ++next_free;
    taken[next_free] = true;
    return next_free;
  };
  for (int f = 0; f < F; ++f) {
    const auto& fd = desc.flows[f];
    Flow flow{{}, {}, fd.weight.reduced(), fd.arrival};
    for (std::size_t j = 0; j < fd.hops.size(); ++j) {
      const auto& hop = fd.hops[j];
      const int k = j == 0 ? f : (hop.cls ? *hop.cls : fresh());
      flow.stations.push_back(hop.station);
      flow.classes.push_back(k);
      spec.classes[k] = {hop.station, hop.service, false};
    }
    spec.flows.push_back(std::move(flow));
  }
  return spec;
}

NetworkSpec switch_example_spec() {
  const auto arrival = DistributionSpec::pareto2(0.6);
  const auto service = DistributionSpec::exponential(1.0);
  NetworkDescription desc;
  desc.num_stations = 4;
  desc.threshold_base = 1.0;
  desc.flows = {
      {{{0, service, 0}, {2, service, 4}}, {1, 1}, arrival},
      {{{0, service, 1}, {3, service, 6}}, {1, 1}, arrival},
      {{{1, service, 2}, {3, service, 7}}, {1, 1}, arrival},
  };
  desc.idle_queues = {{3, 1}, {5, 2}};
  return build_network(desc);
}

NetworkSpec tandem_spec(double arrival_rate, double service_rate_1, double service_rate_2,
                        DistributionKind arrival_kind, DistributionKind service_kind) {
  auto make = [](DistributionKind kind, double rate) {
    return kind == DistributionKind::deterministic ? DistributionSpec::deterministic(1.0 / rate)
                                                   : DistributionSpec{kind, rate};
  };
  NetworkDescription desc;
  desc.num_stations = 2;
  desc.flows = {{{{0, make(service_kind, service_rate_1), 0}, {1, make(service_kind, service_rate_2), 1}},
                 {1, 1},
                 make(arrival_kind, arrival_rate)}};
  return build_network(desc);
}

}  // namespace fluidq
