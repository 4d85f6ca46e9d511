#include "fluidq/absorption.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fluidq/parallel.hpp"

namespace fluidq {

namespace {

double combine(double a, double b, Norm norm) { return norm == Norm::l1 ? a + b : std::max(a, b); }

/// Distance of a segment a + s d, s in [0,1], to the point p. Both norms are
/// convex piecewise linear in s, so the minimum sits at one of the kinks.
double segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b, Norm norm) {
  const Eigen::Vector2d r = p - a;
  const Eigen::Vector2d d = b - a;
  std::vector<double> cand{0.0, 1.0};
  for (int c = 0; c < 2; ++c)
    if (d(c) != 0.0) cand.push_back(r(c) / d(c));
  if (norm == Norm::linf) {
    if (d(0) - d(1) != 0.0) cand.push_back((r(0) - r(1)) / (d(0) - d(1)));
    if (d(0) + d(1) != 0.0) cand.push_back((r(0) + r(1)) / (d(0) + d(1)));
  }
  double best = std::numeric_limits<double>::infinity();
  for (double s : cand) {
    s = std::clamp(s, 0.0, 1.0);
    const Eigen::Vector2d e = r - s * d;
    best = std::min(best, norm == Norm::l1 ? e.lpNorm<1>() : e.lpNorm<Eigen::Infinity>());
  }
  return best;
}

/// Unit-coordinate queue distance to one piece.
double piece_distance(const Eigen::VectorXd& x, const SetPiece& piece, Norm norm) {
  double acc = 0.0;
  for (int k = 0; k < x.size(); ++k) {
    if (piece.triangle && (k == piece.triangle->x || k == piece.triangle->y)) continue;
    acc = combine(acc, piece.box[k].distance(x(k)), norm);
  }
  if (piece.triangle) {
    const Eigen::Vector2d p(x(piece.triangle->x), x(piece.triangle->y));
    acc = combine(acc, triangle_distance(p, piece.triangle->vertices, norm), norm);
  }
  return acc;
}

double residual_part(const FluidState<double>& s, Norm norm) {
  if (norm == Norm::l1) return s.arrival.sum() + s.service.sum();
  double m = 0.0;
  if (s.arrival.size()) m = std::max(m, s.arrival.maxCoeff());
  if (s.service.size()) m = std::max(m, s.service.maxCoeff());
  return m;
}

double piece_state_distance(const FluidState<double>& s, const SetPiece& piece, double hbar, Norm norm) {
  return combine(hbar * piece_distance(s.queue / hbar, piece, norm), residual_part(s, norm), norm);
}

void check_set(const EquilibriumSet& set, int K) {
  if (set.dimension != K) {
    std::ostringstream os;
    os << "set '" << set.name << "' has dimension " << set.dimension << " but the network has " << K << " queues";
    throw std::invalid_argument(os.str());
  }
  if (set.pieces.empty()) throw std::invalid_argument("equilibrium set has no pieces");
}

FluidState<double> lerp(const FluidState<double>& a, const FluidState<double>& b, double w) {
  FluidState<double> s = a;
  s.queue = a.queue + w * (b.queue - a.queue);
  s.arrival = a.arrival + w * (b.arrival - a.arrival);
  s.service = a.service + w * (b.service - a.service);
  return s;
}

/// Earliest w in [0, 1] with g(w) <= tol for a convex g, if any.
template <class G>
std::optional<double> first_below(G&& g, double tol) {
  if (g(0.0) <= tol) return 0.0;
  // golden-section search for the minimum
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = 1.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = g(x1), f2 = g(x2);
  double best_w = 1.0, best = g(1.0);
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    if (f1 <= tol) {
      best_w = x1;
      best = f1;
      break;
    }
    if (f2 <= tol) {
      best_w = x2;
      best = f2;
      break;
    }
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = g(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = g(x2);
    }
    if (std::min(f1, f2) < best) {
      best = std::min(f1, f2);
      best_w = f1 < f2 ? x1 : x2;
    }
  }
  if (best > tol) return std::nullopt;
  // g(0) > tol >= g(best_w); bisect for the crossing
  double a = 0.0, b = best_w;
  for (int it = 0; it < 200 && b - a > 1e-17; ++it) {
    const double m = 0.5 * (a + b);
    if (g(m) <= tol)
      b = m;
    else
      a = m;
  }
  return b;
}

}  // namespace

double triangle_distance(const Eigen::Vector2d& p, const Eigen::Matrix<double, 2, 3>& tri, Norm norm) {
  Eigen::Matrix2d T;
  T.col(0) = tri.col(1) - tri.col(0);
  T.col(1) = tri.col(2) - tri.col(0);
  const Eigen::Vector2d lam = T.partialPivLu().solve(p - tri.col(0));
  const double eps = 1e-14;
  if (lam(0) >= -eps && lam(1) >= -eps && lam(0) + lam(1) <= 1.0 + eps) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int e = 0; e < 3; ++e)
    best = std::min(best, segment_distance(p, tri.col(e), tri.col((e + 1) % 3), norm));
  return best;
}

EquilibriumSet EquilibriumSet::projected(const std::vector<int>& coords) const {
  EquilibriumSet out = *this;
  out.name = name + "|projected";
  for (auto& piece : out.pieces) {
    for (int k = 0; k < dimension; ++k) {
      if (std::find(coords.begin(), coords.end(), k) != coords.end()) continue;
      if (piece.triangle && (k == piece.triangle->x || k == piece.triangle->y))
        throw std::invalid_argument("projection must keep both triangle coordinates");
      piece.box[k] = Interval::free();
    }
  }
  return out;
}

template <class Scalar>
Scalar distance(const FluidState<Scalar>& state, const EquilibriumSet& set, Scalar hbar, Norm norm) {
  if (!(hbar > Scalar(0))) throw std::invalid_argument("distance needs hbar > 0");
  check_set(set, static_cast<int>(state.queue.size()));
  const Eigen::VectorXd x = (state.queue / hbar).template cast<double>();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& piece : set.pieces) best = std::min(best, piece_distance(x, piece, norm));
  FluidState<double> s{state.queue.template cast<double>(), state.arrival.template cast<double>(),
                       state.service.template cast<double>(), static_cast<double>(hbar)};
  return static_cast<Scalar>(combine(static_cast<double>(hbar) * best, residual_part(s, norm), norm));
}

template <class Scalar>
bool contains(const FluidState<Scalar>& state, const EquilibriumSet& set, Scalar hbar, Scalar tol) {
  return distance(state, set, hbar) <= tol;
}

template double distance<double>(const FluidState<double>&, const EquilibriumSet&, double, Norm);
template bool contains<double>(const FluidState<double>&, const EquilibriumSet&, double, double);

namespace {

SetPiece box_piece(int K, const std::vector<std::pair<int, Interval>>& fixed) {
  SetPiece p;
  p.box.assign(K, Interval::point(0.0));
  for (auto [k, iv] : fixed) p.box[k] = iv;
  return p;
}

SetPiece triangle_piece(SetPiece base, int x, int y, Eigen::Vector2d a, Eigen::Vector2d b, Eigen::Vector2d c) {
  Triangle t;
  t.x = x;
  t.y = y;
  t.vertices.col(0) = a;
  t.vertices.col(1) = b;
  t.vertices.col(2) = c;
  base.triangle = t;
  return base;
}

// 0-based queue indices of the switch
constexpr int kQ1 = 0, kQ2 = 1, kQ7 = 6, kQ8 = 7, kSwitchK = 8;

std::vector<SetPiece> band_pieces(SetPiece base, int x, int y, double a) {
  // band {chi in [0,1], psi in [1 - a chi, 1 + a(1 - chi)]} as two triangles
  return {triangle_piece(base, x, y, {0, 1}, {0, 1 + a}, {1, 1}),
          triangle_piece(base, x, y, {0, 1}, {1, 1}, {1, 1 - a})};
}

void check_a(double a) {
  if (!(a > 0.0 && a < 1.0)) {
    std::ostringstream os;
    os << "set parameter a must lie in (0, 1), got " << a;
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

EquilibriumSet switch_equilibrium_set(double a) {
  check_a(a);
  const SetPiece base = box_piece(kSwitchK, {{kQ1, Interval::point(1)}, {kQ8, Interval::point(1)}});
  EquilibriumSet set{"switch", kSwitchK, band_pieces(base, kQ2, kQ7, a)};
  SetPiece column = base;
  column.box[kQ2] = Interval::point(1);
  column.box[kQ7] = {0, 1};
  set.pieces.push_back(column);
  return set;
}

EquilibriumSet switch_minimal_set() {
  SetPiece base = box_piece(kSwitchK, {{kQ1, Interval::point(1)}, {kQ8, Interval::point(1)}});
  SetPiece row = base, column = base;
  row.box[kQ2] = {0, 1};
  row.box[kQ7] = Interval::point(1);
  column.box[kQ2] = Interval::point(1);
  column.box[kQ7] = {0, 1};
  return {"switch_minimal", kSwitchK, {row, column}};
}

EquilibriumSet tandem_point_set() { return {"tandem_point", 2, {box_piece(2, {{1, Interval::point(1)}})}}; }

EquilibriumSet tandem_segments_set() {
  return {"tandem_segments", 2,
          {box_piece(2, {{0, Interval::point(1)}, {1, {0, 1}}}), box_piece(2, {{0, {0, 1}}, {1, Interval::point(1)}})}};
}

EquilibriumSet tandem_wedge_set(double a) {
  check_a(a);
  EquilibriumSet set{"tandem_wedge", 2, band_pieces(box_piece(2, {}), 0, 1, a)};
  set.pieces.push_back(box_piece(2, {{0, Interval::point(1)}, {1, {0, 1}}}));
  return set;
}

EquilibriumSet builtin_set(const std::string& name, double a) {
  if (name == "switch") return switch_equilibrium_set(a);
  if (name == "switch_minimal") return switch_minimal_set();
  if (name == "tandem_point") return tandem_point_set();
  if (name == "tandem_segments") return tandem_segments_set();
  if (name == "tandem_wedge") return tandem_wedge_set(a);
  throw std::invalid_argument("unknown builtin set '" + name + "'");
}

std::size_t SamplePlan::size() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.states.size();
  return n;
}

std::vector<double> boundary_biased_values(double lo, double hi, int grid, const std::vector<double>& faces,
                                           const std::vector<double>& offsets) {
  std::vector<double> v;
  if (grid == 1) v.push_back(lo);
  for (int j = 0; grid > 1 && j < grid; ++j) v.push_back(lo + (hi - lo) * j / (grid - 1));
  for (double f : faces)
    for (double off : offsets) {
      v.push_back(f - off);
      v.push_back(f + off);
    }
  std::erase_if(v, [&](double x) { return x < lo || x > hi; });
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

SampleGroup product_group(std::string name, const FluidState<double>& base, const std::vector<int>& coords,
                          const std::vector<std::vector<double>>& values) {
  if (coords.size() != values.size()) throw std::invalid_argument("coords and values differ in length");
  SampleGroup g{std::move(name), false, {}};
  std::vector<std::size_t> idx(coords.size(), 0);
  for (const auto& vals : values)
    if (vals.empty()) return g;
  for (;;) {
    FluidState<double> s = base;
    for (std::size_t c = 0; c < coords.size(); ++c) s.queue(coords[c]) = values[c][idx[c]];
    g.states.push_back(s);
    std::size_t c = 0;
    while (c < coords.size() && ++idx[c] == values[c].size()) idx[c++] = 0;
    if (c == coords.size()) break;
  }
  return g;
}

SampleGroup epsilon_ladder(std::string name, const FluidState<double>& base, int coord,
                           const std::vector<double>& eps) {
  SampleGroup g{std::move(name), true, {}};
  for (double e : eps) {
    FluidState<double> s = base;
    s.queue(coord) += e;
    g.states.push_back(s);
  }
  return g;
}

SamplePlan switch_region_plan(const NetworkSpec& spec, double hbar, double a, int grid) {
  if (spec.num_classes() != kSwitchK) throw std::invalid_argument("switch plan needs the 8-queue switch");
  FluidState<double> base = FluidState<double>::zero(spec, hbar);
  base.queue(kQ1) = hbar;
  base.queue(kQ8) = hbar;
  const std::vector<double> offsets{1e-3 * hbar, 1e-2 * hbar, 0.1 * hbar, a * hbar};
  const double top = 3.0 * hbar;
  auto below = boundary_biased_values(0, hbar, grid, {0, hbar}, offsets);
  std::erase_if(below, [&](double x) { return x >= hbar; });
  auto over = boundary_biased_values(hbar, top, grid, {hbar, (1 + a) * hbar}, offsets);
  std::erase_if(over, [&](double x) { return x <= hbar; });
  auto positive = boundary_biased_values(0, top, grid, {0, hbar}, offsets);
  std::erase_if(positive, [&](double x) { return x <= 0.0; });

  SamplePlan plan;
  plan.groups.push_back(product_group("region1", base, {kQ2, kQ7}, {below, below}));
  plan.groups.push_back(product_group("region2", base, {kQ2, kQ7}, {over, below}));
  plan.groups.push_back(product_group("region3", base, {kQ2, kQ7}, {positive, over}));
  plan.groups.push_back(product_group("region4", base, {kQ2, kQ7}, {{0.0}, over}));
  return plan;
}

const C1GroupSummary* C1Report::group(const std::string& name) const {
  for (const auto& g : groups)
    if (g.name == name) return &g;
  return nullptr;
}

C1Report verify_C1(const NetworkSpec& spec, const EquilibriumSet& set, double hbar, const SamplePlan& plan,
                   const C1Options& options) {
  if (!(hbar > 0.0)) throw std::invalid_argument("verify_C1 needs hbar > 0");
  check_set(set, spec.num_classes());
  const double tol = options.tolerance * hbar;

  C1Report report;
  for (const auto& g : plan.groups)
    for (const auto& s : g.states) {
      C1Sample c;
      c.group = g.name;
      c.start = s;
      report.samples.push_back(std::move(c));
    }

  parallel_for(report.samples.size(), [&](std::size_t i) {
    C1Sample& out = report.samples[i];
    FluidState<double> start = out.start;
    start.threshold = hbar;
    out.distance = distance(start, set, hbar, options.norm);
    FluidTrajectory<double> traj;
    try {
      traj = integrate(start, spec, options.horizon, options.fluid);
    } catch (const std::exception& e) {
      out.error = e.what();
      return;
    }
    std::size_t hit_segment = traj.points.size();
    for (std::size_t j = 0; j < traj.points.size() && !out.hitting_time; ++j) {
      const auto& pa = traj.points[j];
      if (j + 1 == traj.points.size()) {
        if (distance(pa.state, set, hbar, options.norm) <= tol) {
          out.hitting_time = pa.t;
          hit_segment = j;
        }
        break;
      }
      const auto& pb = traj.points[j + 1];
      std::optional<double> best;
      for (const auto& piece : set.pieces) {
        auto g = [&](double w) { return piece_state_distance(lerp(pa.state, pb.state, w), piece, hbar, options.norm); };
        if (auto w = first_below(g, tol)) best = best ? std::min(*best, *w) : *w;
      }
      if (best) {
        out.hitting_time = pa.t + *best * (pb.t - pa.t);
        hit_segment = j;
      }
    }
    if (!out.hitting_time) return;
    if (out.distance > tol) out.ratio = *out.hitting_time / out.distance;
    // absorbed means staying: check every later breakpoint and segment midpoint
    const double slack = tol * (1.0 + 1e-6) + 1e-12 * hbar;
    for (std::size_t j = hit_segment + 1; j < traj.points.size() && out.stays; ++j) {
      if (distance(traj.points[j].state, set, hbar, options.norm) > slack) out.stays = false;
      const auto mid = lerp(traj.points[j - 1].state, traj.points[j].state, 0.5);
      if (j > hit_segment + 1 && distance(mid, set, hbar, options.norm) > slack) out.stays = false;
    }
  });

  auto fmt_state = [](const FluidState<double>& s) {
    std::ostringstream os;
    os << "Q=(";
    for (int k = 0; k < s.queue.size(); ++k) os << (k ? "," : "") << s.queue(k);
    os << ")";
    return os.str();
  };

  for (const auto& g : plan.groups) report.groups.push_back({g.name, 0, 0, 0.0, std::nullopt, false});
  for (std::size_t i = 0; i < report.samples.size(); ++i) {
    const auto& s = report.samples[i];
    auto it = std::find_if(report.groups.begin(), report.groups.end(),
                           [&](const C1GroupSummary& g) { return g.name == s.group; });
    ++it->samples;
    if (!s.error.empty()) {
      report.violations.push_back("integration failed from " + fmt_state(s.start) + ": " + s.error);
      continue;
    }
    if (!s.hitting_time) {
      std::ostringstream os;
      os << "not absorbed within horizon " << options.horizon << " from " << fmt_state(s.start);
      report.violations.push_back(os.str());
      continue;
    }
    ++it->absorbed;
    if (!s.stays) report.violations.push_back("left the set after hitting it, start " + fmt_state(s.start));
    if (std::isnan(s.ratio)) continue;
    if (!it->argmax || s.ratio > it->max_ratio) {
      it->max_ratio = s.ratio;
      it->argmax = i;
    }
    if (!report.argmax || s.ratio > report.max_ratio) {
      report.max_ratio = s.ratio;
      report.argmax = i;
    }
    if (options.ratio_bound && s.ratio > *options.ratio_bound * (1.0 + 1e-9)) {
      std::ostringstream os;
      os << "ratio " << s.ratio << " exceeds bound " << *options.ratio_bound << " from " << fmt_state(s.start);
      report.violations.push_back(os.str());
    }
  }

  for (std::size_t gi = 0; gi < plan.groups.size(); ++gi) {
    if (!plan.groups[gi].ladder) continue;
    std::vector<const C1Sample*> rungs;
    for (const auto& s : report.samples)
      if (s.group == plan.groups[gi].name && !std::isnan(s.ratio)) rungs.push_back(&s);
    if (rungs.size() < 2) continue;
    std::sort(rungs.begin(), rungs.end(), [](auto* a, auto* b) { return a->distance > b->distance; });
    const double shrink = rungs.front()->distance / rungs.back()->distance;
    const double growth = rungs.back()->ratio / rungs.front()->ratio;
    if (shrink >= options.blowup_min_shrink && growth >= std::sqrt(shrink)) {
      report.groups[gi].blowup = true;
      std::ostringstream os;
      os << "ratio blow-up in '" << plan.groups[gi].name << "': distance shrank " << shrink << "x, ratio grew "
         << growth << "x";
      report.violations.push_back(os.str());
    }
  }
  return report;
}

std::vector<FluidState<double>> member_samples(const NetworkSpec& spec, const EquilibriumSet& set, double hbar,
                                               int grid) {
  check_set(set, spec.num_classes());
  if (grid < 2) throw std::invalid_argument("member sampling needs grid >= 2");
  std::vector<FluidState<double>> out;
  const FluidState<double> zero = FluidState<double>::zero(spec, hbar);
  for (const auto& piece : set.pieces) {
    std::vector<int> coords;
    std::vector<std::vector<double>> values;
    FluidState<double> base = zero;
    for (int k = 0; k < set.dimension; ++k) {
      if (piece.triangle && (k == piece.triangle->x || k == piece.triangle->y)) continue;
      const Interval& iv = piece.box[k];
      if (!iv.bounded()) throw std::invalid_argument("cannot sample an unbounded set piece");
      if (iv.lo == iv.hi) {
        base.queue(k) = hbar * iv.lo;
        continue;
      }
      std::vector<double> v;
      for (int j = 0; j < grid; ++j) v.push_back(hbar * (iv.lo + (iv.hi - iv.lo) * j / (grid - 1)));
      coords.push_back(k);
      values.push_back(v);
    }
    std::vector<FluidState<double>> bases = product_group("", base, coords, values).states;
    if (!piece.triangle) {
      out.insert(out.end(), bases.begin(), bases.end());
      continue;
    }
    const Triangle& t = *piece.triangle;
    const int g = grid - 1;
    for (const auto& b : bases)
      for (int i = 0; i <= g; ++i)
        for (int j = 0; i + j <= g; ++j) {
          const double l1 = double(i) / g, l2 = double(j) / g;
          const Eigen::Vector2d p = t.vertices.col(0) + l1 * (t.vertices.col(1) - t.vertices.col(0)) +
                                    l2 * (t.vertices.col(2) - t.vertices.col(0));
          FluidState<double> s = b;
          s.queue(t.x) = hbar * p(0);
          s.queue(t.y) = hbar * p(1);
          out.push_back(s);
        }
  }
  return out;
}

C2Report verify_C2(const NetworkSpec& spec, const EquilibriumSet& set, double hbar, const Eigen::VectorXd& target,
                   const SamplePlan& plan, int grid) {
  if (!(hbar > 0.0)) throw std::invalid_argument("verify_C2 needs hbar > 0");
  if (target.size() != spec.num_flows()) throw std::invalid_argument("target rate vector has wrong length");
  C2Report report;
  report.target = target;
  std::vector<FluidState<double>> states;
  if (plan.empty()) {
    states = member_samples(spec, set, hbar, grid);
  } else {
    const double tol = 1e-9 * hbar;
    for (const auto& g : plan.groups)
      for (auto s : g.states) {
        s.threshold = hbar;
        if (distance(s, set, hbar) <= tol)
          states.push_back(s);
        else
          ++report.skipped;
      }
  }
  report.samples.resize(states.size());
  parallel_for(states.size(), [&](std::size_t i) {
    C2Sample& out = report.samples[i];
    out.state = states[i];
    out.rates = departure_rates_at(out.state, spec).per_flow;
    out.deviation = (out.rates - target).cwiseAbs().maxCoeff();
  });
  report.max_deviation_per_flow = Eigen::VectorXd::Zero(spec.num_flows());
  for (std::size_t i = 0; i < report.samples.size(); ++i) {
    const auto& s = report.samples[i];
    report.max_deviation_per_flow = report.max_deviation_per_flow.cwiseMax((s.rates - target).cwiseAbs());
    if (!report.argmax || s.deviation > report.max_deviation) {
      report.max_deviation = s.deviation;
      report.argmax = i;
    }
  }
  return report;
}

}  // namespace fluidq
