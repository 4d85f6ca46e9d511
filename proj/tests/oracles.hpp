#pragma once

// Reference computations that share no code with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "fluidq/network.hpp"

namespace oracle {

// Explicit Euler on the discontinuous tandem vector field (threshold 1). No
// sliding logic: chattering across the threshold averages out to the sliding
// rate, with O(dt) error.
struct TandemEuler {
  double lambda, mu1, mu2;

  struct Point {
    double t, q1, q2;
  };

  std::vector<Point> run(double q1, double q2, double horizon, double dt = 1e-5, double every = 0.01) const {
    std::vector<Point> out{{0.0, q1, q2}};
    double next_record = every;
    const long steps = std::lround(horizon / dt);
    for (long i = 1; i <= steps; ++i) {
      const double admit = (q1 < 1.0 && q2 < 1.0) ? lambda : 0.0;
      const double d1 = q1 > 0.0 ? mu1 : std::min(admit, mu1);
      const double d2 = q2 > 0.0 ? mu2 : std::min(d1, mu2);
      q1 = std::max(0.0, q1 + dt * (admit - d1));
      q2 = std::max(0.0, q2 + dt * (d1 - d2));
      const double t = static_cast<double>(i) * dt;
      if (t + 0.5 * dt >= next_record) {
        out.push_back({t, q1, q2});
        next_record += every;
      }
    }
    return out;
  }
};

// Tandem lambda > mu1 > mu2, threshold 1, started empty. Worked by hand:
// both queues fill until Q2 = 1 at t = 1 / (mu1 - mu2), Q2 then keeps rising
// while Q1 drains, Q2 drains back to 1 and the state rests at (0, 1).
inline double tandem_from_empty_hitting_time(double lambda, double mu1, double mu2) {
  const double t1 = 1.0 / (mu1 - mu2);
  const double q1 = (lambda - mu1) * t1;
  const double t2 = q1 / mu1;
  const double q2 = 1.0 + (mu1 - mu2) * t2;
  return t1 + t2 + (q2 - 1.0) / mu2;
}

// Rows of the switch phase-portrait table at a = 0.5 after flows 1 and 3 have
// settled, as (Q2 drift, Q7 drift) with Q1 = Q8 = 1 and the rest 0.
struct SwitchRow {
  double q2, q7;
  double d2, d7;
};

inline std::array<SwitchRow, 4> switch_rows() {
  return {{
      {0.4, 0.3, 0.1, 0.0},    // region 1: both below threshold
      {1.3, 0.5, -0.5, 0.0},   // region 2: Q2 above, flow 2 discarded
      {0.5, 1.2, -0.5, 0.0},   // region 3: Q7 above
      {0.0, 1.3, 0.0, -0.5},   // region 4: Q2 empty, Q7 above
  }};
}

// L1 / Linf distance from p to the triangle by dense sampling of its boundary
// and an inside test with signed areas.
inline double triangle_distance_brute(double px, double py, const std::array<std::array<double, 2>, 3>& v, bool l1,
                                      int samples = 20000) {
  auto cross = [](double ax, double ay, double bx, double by, double cx, double cy) {
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
  };
  const double s0 = cross(v[0][0], v[0][1], v[1][0], v[1][1], px, py);
  const double s1 = cross(v[1][0], v[1][1], v[2][0], v[2][1], px, py);
  const double s2 = cross(v[2][0], v[2][1], v[0][0], v[0][1], px, py);
  if ((s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0)) return 0.0;
  double best = INFINITY;
  for (int e = 0; e < 3; ++e) {
    const auto& a = v[e];
    const auto& b = v[(e + 1) % 3];
    for (int i = 0; i <= samples; ++i) {
      const double s = static_cast<double>(i) / samples;
      const double dx = std::abs(a[0] + s * (b[0] - a[0]) - px);
      const double dy = std::abs(a[1] + s * (b[1] - a[1]) - py);
      best = std::min(best, l1 ? dx + dy : std::max(dx, dy));
    }
  }
  return best;
}

// Random valid network description: loop-free routes, no repeated stations on
// a route, rational weights.
inline fluidq::NetworkDescription random_network(std::mt19937_64& gen) {
  using fluidq::DistributionSpec;
  std::uniform_int_distribution<int> n_stations(1, 4), n_flows(1, 4), w(1, 4), kind(0, 2);
  std::uniform_real_distribution<double> rate(0.3, 1.5);
  fluidq::NetworkDescription d;
  d.num_stations = n_stations(gen);
  d.threshold_base = std::uniform_real_distribution<double>(1.0, 4.0)(gen);
  d.hysteresis_gap.constant = std::bernoulli_distribution(0.5)(gen) ? 0.0 : 2.0;
  const int F = n_flows(gen);
  for (int f = 0; f < F; ++f) {
    std::vector<int> stations(d.num_stations);
    for (int s = 0; s < d.num_stations; ++s) stations[s] = s;
    std::shuffle(stations.begin(), stations.end(), gen);
    const int hops = std::uniform_int_distribution<int>(1, d.num_stations)(gen);
    fluidq::FlowSpec fs;
    fs.weight = {w(gen), std::uniform_int_distribution<int>(1, 2)(gen)};
    const int k = kind(gen);
    fs.arrival = k == 0   ? DistributionSpec::exponential(rate(gen))
                 : k == 1 ? DistributionSpec::pareto2(rate(gen))
                          : DistributionSpec::deterministic(1.0 / rate(gen));
    for (int h = 0; h < hops; ++h)
      fs.hops.push_back({stations[h], DistributionSpec::exponential(rate(gen) + 0.3), std::nullopt});
    d.flows.push_back(fs);
  }
  return d;
}

}  // namespace oracle
