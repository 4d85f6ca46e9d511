#include "fluidq/distribution.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "fluidq/network.hpp"

namespace fluidq {

double DistributionSpec::mean() const {
  switch (kind) {
    case DistributionKind::exponential:
    case DistributionKind::pareto2:
      return parameter > 0.0 ? 1.0 / parameter : std::numeric_limits<double>::infinity();
    case DistributionKind::deterministic:
      return parameter;
  }
  return 0.0;
}

double DistributionSpec::rate() const {
  switch (kind) {
    case DistributionKind::exponential:
    case DistributionKind::pareto2:
      return parameter;
    case DistributionKind::deterministic:
      return parameter > 0.0 ? 1.0 / parameter : 0.0;
  }
  return 0.0;
}

double DistributionSpec::survival(double s) const {
  if (s < 0.0) return 1.0;
  switch (kind) {
    case DistributionKind::exponential:
      return std::exp(-parameter * s);
    case DistributionKind::pareto2: {
      const double base = parameter * s + 1.0;
      return 1.0 / (base * base);
    }
    case DistributionKind::deterministic:
      return s < parameter ? 1.0 : 0.0;
  }
  return 0.0;
}

double DistributionSpec::quantile(double u) const {
  switch (kind) {
    case DistributionKind::exponential:
      return -std::log1p(-u) / parameter;
    case DistributionKind::pareto2:
      // survival(s) = 1 - u  <=>  (rate s + 1)^2 = 1 / (1 - u)
      return (1.0 / std::sqrt(1.0 - u) - 1.0) / parameter;
    case DistributionKind::deterministic:
      return parameter;
  }
  return 0.0;
}

std::string DistributionSpec::describe() const {
  std::ostringstream out;
  switch (kind) {
    case DistributionKind::exponential: out << "exponential(" << parameter << ")"; break;
    case DistributionKind::pareto2: out << "pareto2(" << parameter << ")"; break;
    case DistributionKind::deterministic: out << "deterministic(" << parameter << ")"; break;
  }
  return out.str();
}

Rng::Rng(std::uint64_t master_seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
  engine_.seed(seq);
}

double sample(const DistributionSpec& dist, Rng& rng) {
  if (dist.kind == DistributionKind::deterministic) return dist.parameter;
  return dist.quantile(rng.uniform());
}

StreamSet make_streams(const NetworkSpec& spec, std::uint64_t master_seed) {
  StreamSet set;
  const auto flows = static_cast<std::uint64_t>(spec.num_flows());
  set.arrivals.reserve(spec.num_flows());
  for (int f = 0; f < spec.num_flows(); ++f)
    set.arrivals.push_back({spec.flows[f].arrival, 0.0, Rng(master_seed, static_cast<std::uint64_t>(f)), 0});
  set.services.reserve(spec.num_classes());
  for (int k = 0; k < spec.num_classes(); ++k)
    set.services.push_back({spec.classes[k].service, 0.0, Rng(master_seed, flows + static_cast<std::uint64_t>(k)), 0});
  return set;
}

}  // namespace fluidq
