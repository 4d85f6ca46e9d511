#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fluidq/fluid.hpp"
#include "fluidq/network.hpp"

namespace fluidq {

enum class Norm { l1, linf };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  static Interval point(double v) { return {v, v}; }
  static Interval free() {
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }
  double distance(double x) const { return x < lo ? lo - x : (x > hi ? x - hi : 0.0); }
  bool bounded() const { return lo > -std::numeric_limits<double>::infinity() && hi < std::numeric_limits<double>::infinity(); }
};

/// Triangle in the plane of queue coordinates (x, y); columns are vertices.
struct Triangle {
  int x = 0;
  int y = 1;
  Eigen::Matrix<double, 2, 3> vertices;
};

/// Box over all queue coordinates, optionally intersected with a triangle in two
/// of them (the box entries for those two are then ignored).
struct SetPiece {
  std::vector<Interval> box;
  std::optional<Triangle> triangle;
};

/// Finite union of pieces in unit-threshold queue coordinates. Members have
/// U = 0 and V = 0; the set scales as hbar E.
struct EquilibriumSet {
  std::string name;
  int dimension = 0;
  std::vector<SetPiece> pieces;

  /// Same set with every coordinate outside `coords` left free.
  EquilibriumSet projected(const std::vector<int>& coords) const;
};

/// Distance from `state` to hbar E: min over pieces of the queue distance, plus
/// the residuals sum U + sum V (L1) or their max (Linf). Requires hbar > 0.
template <class Scalar>
Scalar distance(const FluidState<Scalar>& state, const EquilibriumSet& set, Scalar hbar, Norm norm = Norm::l1);

/// Distance of a point in the unit-threshold plane to a triangle.
double triangle_distance(const Eigen::Vector2d& p, const Eigen::Matrix<double, 2, 3>& tri, Norm norm);

template <class Scalar>
bool contains(const FluidState<Scalar>& state, const EquilibriumSet& set, Scalar hbar, Scalar tol);

/// Enlarged switch set: Q1 = Q8 = 1, Q3..Q6 = 0 and (Q2, Q7) in the band
/// {chi in [0,1], psi in [1 - a chi, 1 + a (1 - chi)]} union {1} x [0,1].
/// Throws std::invalid_argument unless 0 < a < 1.
EquilibriumSet switch_equilibrium_set(double a);
/// Minimal switch set: (Q2, Q7) in [0,1] x {1} union {1} x [0,1].
EquilibriumSet switch_minimal_set();
/// Tandem sets over (Q1, Q2).
EquilibriumSet tandem_point_set();     // {(0, 1)}
EquilibriumSet tandem_segments_set();  // {1} x [0,1] union [0,1] x {1}
EquilibriumSet tandem_wedge_set(double a);
/// Looks up one of the sets above by name: switch, switch_minimal, tandem_point,
/// tandem_segments, tandem_wedge. `a` is used by the parameterised ones.
EquilibriumSet builtin_set(const std::string& name, double a);

struct SampleGroup {
  std::string name;
  /// Ladder groups are initial conditions approaching the set; used for blow-up detection.
  bool ladder = false;
  std::vector<FluidState<double>> states;
};

struct SamplePlan {
  std::vector<SampleGroup> groups;

  std::size_t size() const;
  bool empty() const { return size() == 0; }
};

/// Grid values on [lo, hi] plus points at geometric offsets on both sides of each face.
std::vector<double> boundary_biased_values(double lo, double hi, int grid, const std::vector<double>& faces,
                                           const std::vector<double>& offsets);

/// Cartesian product of per-coordinate values written into copies of `base`.
SampleGroup product_group(std::string name, const FluidState<double>& base, const std::vector<int>& coords,
                          const std::vector<std::vector<double>>& values);

/// base with `coord` raised by each eps (already in absolute units).
SampleGroup epsilon_ladder(std::string name, const FluidState<double>& base, int coord,
                           const std::vector<double>& eps);

/// Switch starts after flows 1 and 3 settle (Q1 = Q8 = hbar, Q3..Q6 = 0), one
/// group per phase-portrait region, biased toward the hbar faces.
SamplePlan switch_region_plan(const NetworkSpec& spec, double hbar, double a, int grid = 6);

struct C1Options {
  double horizon = 200.0;            // fluid time budget per sample
  double tolerance = 1e-6;           // absorbed once distance <= tolerance * hbar
  std::optional<double> ratio_bound;
  Norm norm = Norm::l1;
  double blowup_min_shrink = 10.0;   // ladders must span this distance factor
  FluidOptions fluid;
};

struct C1Sample {
  std::string group;
  FluidState<double> start;
  double distance = 0.0;
  std::optional<double> hitting_time;
  double ratio = std::numeric_limits<double>::quiet_NaN();  // hitting_time / distance
  bool stays = true;
  std::string error;
};

struct C1GroupSummary {
  std::string name;
  std::size_t samples = 0;
  std::size_t absorbed = 0;
  double max_ratio = 0.0;
  std::optional<std::size_t> argmax;  // index into C1Report::samples
  bool blowup = false;
};

struct C1Report {
  std::vector<C1Sample> samples;
  std::vector<C1GroupSummary> groups;
  double max_ratio = 0.0;  // empirical t0
  std::optional<std::size_t> argmax;
  std::vector<std::string> violations;

  bool passed() const { return violations.empty(); }
  const C1GroupSummary* group(const std::string& name) const;
};

/// Integrates from every sample and records the first time the distance drops
/// to tolerance * hbar. Flags budget exhaustion, leaving the set afterwards,
/// ratios above the bound and ladder groups whose ratio grows at least like the
/// square root of the distance shrink.
C1Report verify_C1(const NetworkSpec& spec, const EquilibriumSet& set, double hbar, const SamplePlan& plan,
                   const C1Options& options = {});

/// Member states: vertices, edge points and an interior grid of every piece.
std::vector<FluidState<double>> member_samples(const NetworkSpec& spec, const EquilibriumSet& set, double hbar,
                                               int grid = 5);

struct C2Sample {
  FluidState<double> state;
  Eigen::VectorXd rates;  // per flow
  double deviation = 0.0;
};

struct C2Report {
  Eigen::VectorXd target;
  std::vector<C2Sample> samples;
  std::size_t skipped = 0;  // plan states outside the set
  double max_deviation = 0.0;
  std::optional<std::size_t> argmax;
  Eigen::VectorXd max_deviation_per_flow;
};

/// Departure rates at member states against R. An empty plan means member_samples.
C2Report verify_C2(const NetworkSpec& spec, const EquilibriumSet& set, double hbar, const Eigen::VectorXd& target,
                   const SamplePlan& plan = {}, int grid = 5);

}  // namespace fluidq
