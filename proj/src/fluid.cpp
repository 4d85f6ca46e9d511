#include "fluidq/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fluidq {

template <class Scalar>
Scalar state_tolerance(Scalar hbar) {
  return Scalar(1e-10) * std::max(Scalar(1), hbar);
}

template <class Scalar>
Vec<Scalar> RateVector<Scalar>::flow_departures(const NetworkSpec& spec) const {
  Vec<Scalar> out(spec.num_flows());
  for (int f = 0; f < spec.num_flows(); ++f) out(f) = depart(spec.egress_class(f));
  return out;
}

template <class Scalar>
Regime classify(const FluidState<Scalar>& state, const NetworkSpec& spec) {
  const Scalar tol = state_tolerance(state.threshold);
  const Scalar h = state.threshold;
  Regime r;
  for (int k = 0; k < spec.num_classes(); ++k) {
    const Scalar q = state.queue(k);
    QueueStatus s = QueueStatus::interior;
    if (q > h + tol)
      s = QueueStatus::above_threshold;
    else if (h > tol && std::abs(q - h) <= tol)
      s = QueueStatus::at_threshold;
    else if (q <= tol)
      s = QueueStatus::empty;
    r.queue.push_back(s);
    r.holding.push_back(state.service(k) > Scalar(0));
  }
  for (int f = 0; f < spec.num_flows(); ++f) r.arrivals_on.push_back(!(state.arrival(f) > Scalar(0)));
  return r;
}

namespace {

template <class Scalar>
class Allocator {
 public:
  Allocator(const FluidState<Scalar>& state, const NetworkSpec& spec)
      : spec_(spec), K_(spec.num_classes()), d_(spec.num_stations) {
    const Scalar tol = state_tolerance(state.threshold);
    prev_.assign(K_, -1);
    ingress_flow_.assign(K_, -1);
    backlogged_.assign(K_, false);
    holder_.assign(d_, -1);
    mean_.resize(K_);
    weight_.resize(K_);
    for (int f = 0; f < spec.num_flows(); ++f) {
      const auto& cls = spec.flows[f].classes;
      ingress_flow_[cls.front()] = f;
      for (std::size_t j = 1; j < cls.size(); ++j) prev_[cls[j]] = cls[j - 1];
    }
    for (int k = 0; k < K_; ++k) {
      backlogged_[k] = state.queue(k) > tol;
      mean_(k) = static_cast<Scalar>(spec.classes[k].service.mean());
      weight_(k) = static_cast<Scalar>(spec.class_weight(k));
      if (state.service(k) > Scalar(0)) {
        const int i = spec.station_of(k);
        if (holder_[i] >= 0) {
          std::ostringstream os;
          os << "classes " << holder_[i] + 1 << " and " << k + 1 << " both hold station " << i + 1;
          throw FluidError(os.str());
        }
        holder_[i] = k;
      }
    }
    for (int i = 0; i < d_; ++i) members_.push_back(spec.classes_at(i));
    order_ = station_order();
  }

  /// Departure rates for the given admission rates (fixed point over stations).
  Vec<Scalar> departures(const Vec<Scalar>& admit) const {
    Vec<Scalar> depart = Vec<Scalar>::Zero(K_);
    const int max_sweeps = 4 * K_ + 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      Scalar change = 0;
      for (int i : order_) {
        for (auto [k, x] : fill(i, admit, depart)) {
          change = std::max(change, std::abs(x - depart(k)));
          depart(k) = x;
        }
      }
      if (change <= Scalar(1e-15) * std::max(Scalar(1), depart.cwiseAbs().maxCoeff())) return depart;
    }
    throw FluidError("station allocation did not reach a fixed point");
  }

  Scalar inflow(int k, const Vec<Scalar>& admit, const Vec<Scalar>& depart) const {
    if (ingress_flow_[k] >= 0) return admit(ingress_flow_[k]);
    return prev_[k] >= 0 ? depart(prev_[k]) : Scalar(0);
  }

  int holder(int station) const { return holder_[station]; }
  Scalar mean(int k) const { return mean_(k); }

 private:
  /// Weighted water-fill of station i: x_k = min(demand_k, w_k L), sum m_k x_k <= 1.
  std::vector<std::pair<int, Scalar>> fill(int i, const Vec<Scalar>& admit, const Vec<Scalar>& depart) const {
    std::vector<std::pair<int, Scalar>> out;
    const auto& cls = members_[i];
    if (holder_[i] >= 0) {
      for (int k : cls) out.emplace_back(k, Scalar(0));
      return out;
    }
    const Scalar inf = std::numeric_limits<Scalar>::infinity();
    struct Item {
      int k;
      Scalar demand;
      Scalar level;  // demand / weight
    };
    std::vector<Item> items;
    for (int k : cls) {
      const Scalar demand = backlogged_[k] ? inf : std::max(Scalar(0), inflow(k, admit, depart));
      items.push_back({k, demand, demand / weight_(k)});
    }
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.level < b.level; });
    Scalar budget = 1;
    Scalar weight_left = 0;
    for (const auto& it : items) weight_left += mean_(it.k) * weight_(it.k);
    std::size_t j = 0;
    for (; j < items.size(); ++j) {
      const auto& it = items[j];
      if (it.demand == inf || it.level * weight_left > budget) break;
      out.emplace_back(it.k, it.demand);
      budget -= mean_(it.k) * it.demand;
      weight_left -= mean_(it.k) * weight_(it.k);
    }
    if (j < items.size()) {
      const Scalar level = std::max(Scalar(0), budget) / weight_left;
      for (; j < items.size(); ++j) out.emplace_back(items[j].k, weight_(items[j].k) * level);
    }
    return out;
  }

  /// Stations in topological order of "feeds" when that graph is acyclic,
  /// otherwise natural order (the fixed-point sweep still converges).
  std::vector<int> station_order() const {
    std::vector<std::vector<int>> out(d_);
    std::vector<int> indeg(d_, 0);
    for (int k = 0; k < K_; ++k) {
      if (prev_[k] < 0) continue;
      const int a = spec_.station_of(prev_[k]);
      const int b = spec_.station_of(k);
      out[a].push_back(b);
      ++indeg[b];
    }
    std::vector<int> order;
    std::vector<int> ready;
    for (int i = d_ - 1; i >= 0; --i)
      if (indeg[i] == 0) ready.push_back(i);
    while (!ready.empty()) {
      const int i = ready.back();
      ready.pop_back();
      order.push_back(i);
      for (int b : out[i])
        if (--indeg[b] == 0) ready.push_back(b);
    }
    if (static_cast<int>(order.size()) != d_) {
      order.clear();
      for (int i = 0; i < d_; ++i) order.push_back(i);
    }
    return order;
  }

  const NetworkSpec& spec_;
  int K_;
  int d_;
  std::vector<int> prev_;
  std::vector<int> ingress_flow_;
  std::vector<bool> backlogged_;
  std::vector<int> holder_;
  std::vector<std::vector<int>> members_;
  std::vector<int> order_;
  Vec<Scalar> mean_;
  Vec<Scalar> weight_;
};

}  // namespace

template <class Scalar>
RateVector<Scalar> solve_rates(const FluidState<Scalar>& state, const NetworkSpec& spec) {
  const int F = spec.num_flows();
  const int K = spec.num_classes();
  const Scalar h = state.threshold;
  const Scalar tol = state_tolerance(h);
  const Allocator<Scalar> alloc(state, spec);

  Vec<Scalar> alpha(F);
  for (int f = 0; f < F; ++f) alpha(f) = static_cast<Scalar>(spec.arrival_rate(f));

  Vec<Scalar> admit = Vec<Scalar>::Zero(F);
  std::vector<int> sliding;
  std::vector<std::vector<int>> pinned(F);  // at-threshold classes per sliding flow
  for (int f = 0; f < F; ++f) {
    if (state.arrival(f) > Scalar(0)) continue;
    bool above = false;
    for (int k : spec.flows[f].classes) {
      const Scalar q = state.queue(k);
      if (q > h + tol) above = true;
      else if (q >= h - tol) pinned[f].push_back(k);
    }
    if (above) continue;
    if (pinned[f].empty())
      admit(f) = alpha(f);
    else
      sliding.push_back(f);
  }

  if (!sliding.empty()) {
    Scalar rate_scale = 1;
    for (int f = 0; f < F; ++f) rate_scale = std::max(rate_scale, alpha(f));
    for (int k = 0; k < K; ++k) rate_scale = std::max(rate_scale, Scalar(1) / alloc.mean(k));
    const Scalar drift_tol = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * rate_scale;

    // Worst drift among the pinned queues of f when f admits at rate a.
    auto worst_drift = [&](int f, Scalar a) {
      Vec<Scalar> trial = admit;
      trial(f) = a;
      const Vec<Scalar> depart = alloc.departures(trial);
      Scalar worst = -std::numeric_limits<Scalar>::infinity();
      for (int k : pinned[f]) worst = std::max(worst, alloc.inflow(k, trial, depart) - depart(k));
      return worst;
    };
    auto largest_feasible = [&](int f) -> Scalar {
      if (worst_drift(f, alpha(f)) <= drift_tol) return alpha(f);
      Scalar g_lo = worst_drift(f, Scalar(0));
      if (g_lo > drift_tol) return Scalar(0);
      if (g_lo > Scalar(0)) return Scalar(0);
      Scalar lo = 0;
      Scalar hi = alpha(f);
      Scalar g_hi = worst_drift(f, hi);
      for (int it = 0; it < 200 && hi - lo > std::numeric_limits<Scalar>::epsilon() * alpha(f); ++it) {
        const Scalar mid = lo + (hi - lo) / 2;
        const Scalar g = worst_drift(f, mid);
        if (g <= Scalar(0)) {
          lo = mid;
          g_lo = g;
        } else {
          hi = mid;
          g_hi = g;
        }
      }
      // The drift is piecewise linear in a; one secant step lands on the root.
      if (g_hi > g_lo) {
        const Scalar a = lo - g_lo * (hi - lo) / (g_hi - g_lo);
        if (a >= lo && a <= hi && worst_drift(f, a) <= drift_tol) return a;
      }
      return lo;
    };

    for (int f : sliding) admit(f) = alpha(f);
    bool settled = false;
    for (int round = 0; round < 200 && !settled; ++round) {
      Scalar change = 0;
      for (int f : sliding) {
        const Scalar a = largest_feasible(f);
        change = std::max(change, std::abs(a - admit(f)));
        admit(f) = a;
      }
      settled = change <= Scalar(1e-14) * rate_scale;
    }
    if (!settled) throw FluidError("sliding admission rates did not settle");
  }

  RateVector<Scalar> r;
  r.admit = admit;
  r.depart = alloc.departures(admit);
  r.busy = Vec<Scalar>::Zero(K);
  r.inflow.resize(K);
  for (int k = 0; k < K; ++k) {
    r.inflow(k) = alloc.inflow(k, admit, r.depart);
    r.busy(k) = alloc.holder(spec.station_of(k)) == k ? Scalar(1) : r.depart(k) * alloc.mean(k);
  }
  r.drift = r.inflow - r.depart;
  r.idle.resize(spec.num_stations);
  for (int i = 0; i < spec.num_stations; ++i) {
    Scalar used = 0;
    for (int k : spec.classes_at(i)) used += r.busy(k);
    Scalar idle = Scalar(1) - used;
    if (idle < Scalar(0) && idle > -Scalar(1e-12)) idle = 0;
    r.idle(i) = idle;
  }
  return r;
}

template <class Scalar>
DepartureRates<Scalar> departure_rates_at(const FluidState<Scalar>& state, const NetworkSpec& spec) {
  const RateVector<Scalar> r = solve_rates(state, spec);
  DepartureRates<Scalar> out;
  out.per_class.resize(spec.num_classes());
  for (int k = 0; k < spec.num_classes(); ++k)
    out.per_class(k) = state.service(k) > Scalar(0)
                           ? Scalar(0)
                           : r.busy(k) / static_cast<Scalar>(spec.classes[k].service.mean());
  out.per_flow.resize(spec.num_flows());
  for (int f = 0; f < spec.num_flows(); ++f) out.per_flow(f) = out.per_class(spec.egress_class(f));
  return out;
}

template <class Scalar>
FluidState<Scalar> FluidTrajectory<Scalar>::at(Scalar t) const {
  if (points.empty()) throw FluidError("empty trajectory");
  if (t <= points.front().t) return points.front().state;
  if (t >= points.back().t) return points.back().state;
  auto it = std::upper_bound(points.begin(), points.end(), t,
                             [](Scalar v, const Breakpoint<Scalar>& p) { return v < p.t; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const Scalar span = b.t - a.t;
  const Scalar w = span > Scalar(0) ? (t - a.t) / span : Scalar(0);
  FluidState<Scalar> s = a.state;
  s.queue = a.state.queue + w * (b.state.queue - a.state.queue);
  s.arrival = a.state.arrival + w * (b.state.arrival - a.state.arrival);
  s.service = a.state.service + w * (b.state.service - a.state.service);
  return s;
}

template <class Scalar>
FluidTrajectory<Scalar> integrate(const FluidState<Scalar>& state0, const NetworkSpec& spec, Scalar horizon,
                                  const FluidOptions& options) {
  const int K = spec.num_classes();
  const int F = spec.num_flows();
  const Scalar h = state0.threshold;
  const Scalar tol = state_tolerance(h);
  const Scalar snap = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), h);
  if (!(horizon >= Scalar(0))) throw std::invalid_argument("fluid horizon must be nonnegative");
  if (state0.queue.size() != K || state0.arrival.size() != F || state0.service.size() != K)
    throw std::invalid_argument("fluid state has wrong dimensions");
  if ((state0.queue.array() < Scalar(0)).any() || (state0.arrival.array() < Scalar(0)).any() ||
      (state0.service.array() < Scalar(0)).any())
    throw std::invalid_argument("fluid state must be nonnegative");

  FluidTrajectory<Scalar> traj;
  traj.horizon = horizon;
  FluidState<Scalar> s = state0;
  Scalar t = 0;
  Vec<Scalar> admitted = Vec<Scalar>::Zero(F);
  Vec<Scalar> arrived = Vec<Scalar>::Zero(K);
  Vec<Scalar> departed = Vec<Scalar>::Zero(K);
  Vec<Scalar> busy = Vec<Scalar>::Zero(K);
  Vec<Scalar> idle = Vec<Scalar>::Zero(spec.num_stations);
  std::size_t tiny_steps = 0;

  for (;;) {
    RateVector<Scalar> r = solve_rates(s, spec);
    traj.points.push_back({t, s, r, classify(s, spec), admitted, arrived, departed, busy, idle});
    if (t >= horizon) break;
    if (traj.points.size() >= options.max_breakpoints) {
      std::ostringstream os;
      os << "fluid breakpoint budget of " << options.max_breakpoints << " exhausted at t=" << t;
      throw FluidError(os.str());
    }

    Scalar dt = horizon - t;
    bool pending = false;
    Scalar rate_scale = 1;
    for (int k = 0; k < K; ++k) rate_scale = std::max(rate_scale, std::abs(r.inflow(k)));
    const Scalar still = Scalar(1e-12) * rate_scale;
    for (int k = 0; k < K; ++k) {
      const Scalar q = s.queue(k);
      const Scalar v = r.drift(k);
      if (std::abs(v) > still) pending = true;
      if (v < Scalar(0)) {
        if (q > tol) dt = std::min(dt, q / -v);
        if (q > h + tol) dt = std::min(dt, (q - h) / -v);
      } else if (v > Scalar(0) && q < h - tol) {
        dt = std::min(dt, (h - q) / v);
      }
      if (s.service(k) > Scalar(0)) {
        pending = true;
        dt = std::min(dt, s.service(k));
      }
    }
    for (int f = 0; f < F; ++f) {
      if (s.arrival(f) > Scalar(0)) {
        pending = true;
        dt = std::min(dt, s.arrival(f));
      }
    }
    if (!pending) {
      if (!traj.absorbed_at) traj.absorbed_at = t;
      dt = horizon - t;
    }

    if (dt < Scalar(options.min_step) * std::max(Scalar(1), t)) {
      if (++tiny_steps > options.max_tiny_steps) {
        std::ostringstream os;
        os << "fluid integration stalled near t=" << t << " (" << tiny_steps << " vanishing steps)";
        throw FluidError(os.str());
      }
    } else {
      tiny_steps = 0;
    }

    for (int k = 0; k < K; ++k) {
      const Scalar before = s.queue(k);
      Scalar q = before + r.drift(k) * dt;
      if (std::abs(q) <= snap && r.drift(k) < Scalar(0)) q = 0;
      if (std::abs(q - h) <= snap && (before - h) * r.drift(k) < Scalar(0)) q = h;
      if (q < Scalar(0)) {
        if (q < -tol) {
          std::ostringstream os;
          os << "queue " << k + 1 << " went negative (" << q << ") at t=" << t + dt;
          throw FluidError(os.str());
        }
        q = 0;
      }
      s.queue(k) = q;
      if (s.service(k) > Scalar(0)) {
        s.service(k) -= dt;
        if (s.service(k) <= snap) s.service(k) = 0;
      }
    }
    for (int f = 0; f < F; ++f) {
      if (s.arrival(f) > Scalar(0)) {
        s.arrival(f) -= dt;
        if (s.arrival(f) <= snap) s.arrival(f) = 0;
      }
    }
    admitted += r.admit * dt;
    arrived += r.inflow * dt;
    departed += r.depart * dt;
    busy += r.busy * dt;
    idle += r.idle * dt;
    t = (horizon - t - dt) <= std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), horizon) ? horizon : t + dt;
  }
  return traj;
}

template <class Scalar>
Scalar conservation_residual(const FluidTrajectory<Scalar>& traj, const NetworkSpec& spec) {
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> Pt = spec.routing().cast<Scalar>().transpose();
  Scalar worst = 0;
  if (traj.points.empty()) return worst;
  const Vec<Scalar>& q0 = traj.points.front().state.queue;
  for (const auto& p : traj.points) {
    Vec<Scalar> a = Pt * p.departed;
    for (int f = 0; f < spec.num_flows(); ++f) a(spec.ingress_class(f)) += p.admitted(f);
    worst = std::max(worst, (p.state.queue - q0 - a + p.departed).cwiseAbs().maxCoeff());
  }
  return worst;
}

template double state_tolerance<double>(double);
template struct RateVector<double>;
template Regime classify<double>(const FluidState<double>&, const NetworkSpec&);
template RateVector<double> solve_rates<double>(const FluidState<double>&, const NetworkSpec&);
template DepartureRates<double> departure_rates_at<double>(const FluidState<double>&, const NetworkSpec&);
template struct FluidTrajectory<double>;
template FluidTrajectory<double> integrate<double>(const FluidState<double>&, const NetworkSpec&, double,
                                                   const FluidOptions&);
template double conservation_residual<double>(const FluidTrajectory<double>&, const NetworkSpec&);

}  // namespace fluidq
