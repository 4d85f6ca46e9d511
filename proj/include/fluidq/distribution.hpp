#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace fluidq {

class NetworkSpec;

enum class DistributionKind { exponential, pareto2, deterministic };

/// Interarrival or service-time law.
///
/// `pareto2(rate)` is the heavy-tailed law with survival
/// P(xi > s) = 1 / (rate * s + 1)^2, whose mean is 1 / rate.
struct DistributionSpec {
  DistributionKind kind = DistributionKind::exponential;
  double parameter = 1.0;  // rate for exponential/pareto2, value for deterministic

  static DistributionSpec exponential(double rate) { return {DistributionKind::exponential, rate}; }
  static DistributionSpec pareto2(double rate) { return {DistributionKind::pareto2, rate}; }
  static DistributionSpec deterministic(double value) { return {DistributionKind::deterministic, value}; }

  double mean() const;
  /// Reciprocal of the mean. Zero-rate laws report 0.
  double rate() const;
  double survival(double s) const;
  /// Inverse CDF, nondecreasing in u on [0, 1).
  double quantile(double u) const;
  /// Unbounded support and spread-out: false only for deterministic laws.
  bool unbounded_spread_out() const { return kind != DistributionKind::deterministic; }

  std::string describe() const;

  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

/// Seeded 64-bit generator. Sub-streams are derived from (master seed, stream id)
/// through std::seed_seq, so identical seeds replay identical sample paths.
class Rng {
 public:
  explicit Rng(std::uint64_t master_seed = 0, std::uint64_t stream_id = 0);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::mt19937_64 engine_;
};

double sample(const DistributionSpec& dist, Rng& rng);

/// Renewal process driving one flow's arrivals or one class's services.
struct RenewalStream {
  DistributionSpec dist;
  double residual = 0.0;
  Rng rng;
  std::uint64_t count = 0;

  /// Draws a fresh interval, stores it as the residual and counts one renewal.
  double renew() {
    residual = sample(dist, rng);
    ++count;
    return residual;
  }

  /// Lets `dt` time units elapse on the residual clock.
  void advance(double dt) { residual = residual > dt ? residual - dt : 0.0; }
};

struct StreamSet {
  std::vector<RenewalStream> arrivals;  // per flow
  std::vector<RenewalStream> services;  // per class
};

/// Arrival stream f uses stream id f; service stream k uses id F + k.
StreamSet make_streams(const NetworkSpec& spec, std::uint64_t master_seed);

}  // namespace fluidq
