// Copyright 2026 The hybridsens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Event-driven integration of the hybrid system: flow within a fixed contact
// mode, localization of constraint activations (a_i -> 0) and deactivations
// (lambda_i -> 0), admissibility checks, velocity resets and word recording.

#ifndef HYBRIDSENS_HYBRID_FLOW_HPP_
#define HYBRIDSENS_HYBRID_FLOW_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hybridsens/contact_dynamics.hpp"
#include "hybridsens/dopri.hpp"
#include "hybridsens/model.hpp"

namespace hybridsens {

enum class EventKind {
  kActivation,
  kDeactivation,
  kImpactWithDeactivation,  // e.g. an elastic bounce
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::kActivation:
      return "activation";
    case EventKind::kDeactivation:
      return "deactivation";
    case EventKind::kImpactWithDeactivation:
      return "impact-with-instant-deactivation";
  }
  return "?";
}

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::kActivation;
  ContactMode constraints;  // every constraint whose status changes
  ContactMode activated;
  ContactMode deactivated;
  ContactMode reset_set;  // constraints whose impulses were applied
  State pre;              // left limit
  State post;             // right limit
  bool admissible = true;
  std::string reason;
};

// Contact mode sequence with its transition times t_0 < ... < t_{m+1}.
// Consecutive modes are equal only across an impact with instant
// deactivation (a bounce).
struct Word {
  std::vector<ContactMode> modes;
  std::vector<double> times;
  std::vector<Event> events;

  std::string signature() const {
    std::string s;
    for (std::size_t i = 0; i < modes.size(); ++i) {
      if (i) s += '>';
      s += modes[i].to_string();
    }
    return s;
  }
};

// One maximal arc of flow in a fixed mode; sensitivity replays these.
struct Segment {
  ContactMode mode;
  State start;
  double t_end = 0.0;
};

struct Trajectory {
  std::vector<State> samples;
  Word word;
  State terminal;
  std::vector<Segment> segments;
  bool terminal_at_event = false;
};

enum class GuardType { kConstraint, kContactForce };

struct GuardRef {
  GuardType type = GuardType::kConstraint;
  int index = 0;
};

// A guard sign change localized to [t_lo, t_hi] inside one accepted step,
// or (touch = true) a tangency of a constraint with the surface at t_lo.
struct Crossing {
  GuardRef guard;
  double t_lo = 0.0;
  double t_hi = 0.0;
  bool touch = false;
};

struct FlowResult {
  State end;
  ContactMode mode;
  std::vector<Crossing> crossings;
  // The stepper positioned on the step that contains the crossings, for
  // evaluating states inside it.
  std::shared_ptr<const AdaptiveStepper> stepper;

  State state_at(double t) const {
    return State::from_stacked(t, stepper->evaluate(t), mode);
  }
};

using StepObserver = std::function<void(const AdaptiveStepper&)>;

namespace detail {

inline double constraint_rate(const ModelSpec& model, int j, const Vector& q,
                              const Vector& v) {
  return model.constraint_gradient(j, q).dot(v);
}

inline double contact_force_component(const ModelSpec& model, const Vector& z,
                                      ContactMode J, int j, double h_fd) {
  const ModeDynamics md =
      mode_dynamics(model, z.head(model.d), z.tail(model.d), J, h_fd);
  const std::vector<int> idx = J.indices();
  const auto pos = std::find(idx.begin(), idx.end(), j) - idx.begin();
  return md.lambda(pos);
}

inline double guard_value(const ModelSpec& model, const GuardRef& g,
                          const Vector& z, ContactMode J, double h_fd) {
  if (g.type == GuardType::kConstraint) {
    return model.constraint(g.index, z.head(model.d));
  }
  return contact_force_component(model, z, J, g.index, h_fd);
}

// Bisection for the sign change of a scalar function of time.
template <typename Fn>
double bisect_sign_change(Fn&& fn, double lo, double hi, double tol) {
  const bool lo_sign = fn(lo) >= 0.0;
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if ((fn(mid) >= 0.0) == lo_sign) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline std::vector<ContactMode> subsets_by_decreasing_size(ContactMode set) {
  const std::vector<int> idx = set.indices();
  const std::size_t k = idx.size();
  std::vector<ContactMode> out;
  if (k > 16) {
    out.push_back(set);
    out.push_back(ContactMode{});
    return out;
  }
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    ContactMode m;
    for (std::size_t b = 0; b < k; ++b) {
      if ((mask >> b) & 1u) m.insert(idx[b]);
    }
    out.push_back(m);
  }
  std::stable_sort(out.begin(), out.end(), [](ContactMode a, ContactMode b) {
    return a.size() > b.size();
  });
  return out;
}

}  // namespace detail

// Chooses which already-active constraints take part in an impact on
// `activating`: the largest subset whose impulses are non-negative and whose
// excluded members do not end up approaching. Decoupled models always keep
// every active constraint (their impulses vanish).
inline ContactMode select_impact_set(const ModelSpec& model, const Vector& q,
                                     const Vector& v, ContactMode active,
                                     ContactMode activating,
                                     const SolverConfig& config) {
  const ContactMode held = active - activating;
  for (ContactMode keep : detail::subsets_by_decreasing_size(held)) {
    const ContactMode S = keep | activating;
    ImpactResult r;
    try {
      r = impact(model, q, v, S);
    } catch (const RankDeficient&) {
      continue;
    }
    const std::vector<int> idx = S.indices();
    const double scale = 1.0 + r.impulse.lpNorm<Eigen::Infinity>();
    bool ok = true;
    for (std::size_t p = 0; p < idx.size() && ok; ++p) {
      if (keep.contains(idx[p]) &&
          r.impulse(static_cast<Eigen::Index>(p)) < -config.tol_graze * scale) {
        ok = false;
      }
    }
    for (int i : (held - keep).indices()) {
      if (!ok) break;
      if (detail::constraint_rate(model, i, q, r.v_post) < -config.tol_graze) {
        ok = false;
      }
    }
    if (ok) return S;
  }
  return held | activating;
}

// Among `candidates` (all at a_i = 0), the constraints that remain active at
// (q, v): drop those separating with positive normal velocity, then pick the
// largest subset with non-negative contact forces whose complement has
// non-negative free acceleration. Throws GrazingDetected when a constraint
// would leave with zero normal velocity and zero acceleration.
inline ContactMode select_contact_mode(const ModelSpec& model, const Vector& q,
                                       const Vector& v, ContactMode candidates,
                                       const SolverConfig& config) {
  ContactMode touching;
  for (int i : candidates.indices()) {
    if (detail::constraint_rate(model, i, q, v) <= config.tol_graze) {
      touching.insert(i);
    }
  }
  for (ContactMode B : detail::subsets_by_decreasing_size(touching)) {
    ModeDynamics md;
    try {
      md = mode_dynamics(model, q, v, B, config.h_fd);
    } catch (const RankDeficient&) {
      continue;
    }
    if (md.lambda.size() > 0 && md.lambda.minCoeff() < -config.tol_graze) {
      continue;
    }
    bool ok = true;
    std::string degenerate;
    for (int i : (touching - B).indices()) {
      const double acc =
          model.constraint_gradient(i, q).dot(md.accel) +
          constraint_curvature(model, i, q, v, config.h_fd);
      if (acc < -config.tol_graze) {
        ok = false;
        break;
      }
      const double rate = detail::constraint_rate(model, i, q, v);
      if (acc <= config.tol_graze && rate <= config.tol_graze) {
        std::ostringstream os;
        os << "constraint " << i + 1
           << " leaves with zero normal velocity and acceleration (rate "
           << rate << ", acceleration " << acc << ")";
        degenerate = os.str();
      }
    }
    if (!ok) continue;
    if (!degenerate.empty()) throw GrazingDetected(degenerate);
    return B;
  }
  throw GrazingDetected("no consistent contact mode among " +
                        touching.to_string());
}

// Integrates z' = F_J(z) from `state` until t_max or the first accepted step
// in which an inactive constraint reaches zero or an active contact force
// changes sign.
inline FlowResult flow_mode(const ModelSpec& model, const State& state,
                            ContactMode J, double t_max,
                            const SolverConfig& config,
                            const StepObserver& observer = {}) {
  const int d = model.d;
  const double h_fd = config.h_fd;
  auto stepper = std::make_shared<AdaptiveStepper>(
      [&model, J, h_fd](const Vector& z) {
        return vector_field(model, z, J, h_fd);
      },
      state.stacked(), state.t, config);

  FlowResult out;
  out.mode = J;
  out.stepper = stepper;

  auto q_of = [d](const Vector& z) { return Vector(z.head(d)); };
  auto v_of = [d](const Vector& z) { return Vector(z.tail(d)); };

  while (stepper->t() < t_max) {
    stepper->advance(t_max);
    const double t0 = stepper->t_prev();
    const double t1 = stepper->t();
    const Vector& z0 = stepper->y_prev();
    const Vector& z1 = stepper->y();

    auto rate_at = [&](int i, double t) {
      const Vector z = stepper->evaluate(t);
      return detail::constraint_rate(model, i, q_of(z), v_of(z));
    };
    auto value_at = [&](int i, double t) {
      return model.constraint(i, q_of(stepper->evaluate(t)));
    };

    for (int i = 0; i < model.n; ++i) {
      if (J.contains(i)) {
        const double drift = model.constraint(i, q_of(z1));
        if (std::abs(drift) > 10.0 * config.tol_a) {
          std::ostringstream os;
          os << "active constraint " << i + 1 << " drifted to " << drift
             << " at t = " << t1;
          throw DriftExceeded(os.str());
        }
        const GuardRef g{GuardType::kContactForce, i};
        const double l1 = detail::guard_value(model, g, z1, J, h_fd);
        if (l1 < 0.0) {
          out.crossings.push_back({g, t0, t1, false});
        }
        continue;
      }
      const GuardRef g{GuardType::kConstraint, i};
      const double g0 = model.constraint(i, q_of(z0));
      const double g1 = model.constraint(i, q_of(z1));
      const double d0 = detail::constraint_rate(model, i, q_of(z0), v_of(z0));
      const double d1 = detail::constraint_rate(model, i, q_of(z1), v_of(z1));
      if (g0 > config.tol_a) {
        if (g1 < 0.0) {
          out.crossings.push_back({g, t0, t1, false});
        } else if (d0 < 0.0 && d1 > 0.0) {
          // Local minimum inside the step: a double crossing or a tangency.
          const double tm = detail::bisect_sign_change(
              [&](double t) { return rate_at(i, t); }, t0, t1,
              config.tol_event);
          const double gm = value_at(i, tm);
          if (gm < 0.0) {
            out.crossings.push_back({g, t0, tm, false});
          } else if (gm <= config.tol_a) {
            out.crossings.push_back({g, tm, tm, true});
          }
        }
      } else if (g1 < -config.tol_a) {
        // Released constraint that came back within one step.
        double tp = t0;
        if (d0 > 0.0 && d1 < 0.0) {
          tp = detail::bisect_sign_change(
              [&](double t) { return rate_at(i, t); }, t0, t1,
              config.tol_event);
        }
        if (value_at(i, tp) < 0.0) {
          std::ostringstream os;
          os << "constraint " << i + 1 << " penetrated to " << g1
             << " at t = " << t1;
          throw Infeasible(os.str());
        }
        out.crossings.push_back({g, tp, t1, false});
      }
    }

    if (!out.crossings.empty()) {
      out.end = State::from_stacked(t1, z1, J);
      return out;
    }
    if (observer) observer(*stepper);
  }
  out.end = State::from_stacked(stepper->t(), stepper->y(), J);
  return out;
}

// Locates the guard zero inside a crossing bracket by bisection to within
// tol_event, then (optionally) polishes with Newton steps using the guard's
// time derivative Dh F along the flow. Without polishing the pre-crossing end
// of the final bracket is returned.
inline double refine_event_time(const ModelSpec& model, const FlowResult& flow,
                                const Crossing& crossing,
                                const SolverConfig& config) {
  if (crossing.touch) return crossing.t_lo;
  const AdaptiveStepper& stepper = *flow.stepper;
  const ContactMode J = flow.mode;
  auto g = [&](double t) {
    return detail::guard_value(model, crossing.guard, stepper.evaluate(t), J,
                               config.h_fd);
  };
  double lo = crossing.t_lo;
  double hi = crossing.t_hi;
  if (g(lo) < 0.0) return lo;  // already across at the start of the bracket
  int it = 0;
  while (hi - lo > config.tol_event) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (++it > 400) throw NoConvergence("event bisection did not converge");
    if (g(mid) >= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (!config.newton_polish) return lo;

  auto slope = [&](double t) {
    if (crossing.guard.type == GuardType::kConstraint) {
      const Vector z = stepper.evaluate(t);
      return detail::constraint_rate(model, crossing.guard.index,
                                     z.head(model.d), z.tail(model.d));
    }
    return (g(hi) - g(lo)) / (hi - lo);
  };
  double t = 0.5 * (lo + hi);
  double gt = g(t);
  for (int k = 0; k < 8; ++k) {
    const double s = slope(t);
    if (!(s != 0.0) || !std::isfinite(s)) break;
    const double next = t - gt / s;
    if (next < lo || next > hi || !std::isfinite(next)) break;
    const double gn = g(next);
    if (std::abs(gn) > std::abs(gt)) break;
    const double step = std::abs(next - t);
    t = next;
    gt = gn;
    if (step <= 4.0 * std::numeric_limits<double>::epsilon() *
                     std::max(1.0, std::abs(t))) {
      break;
    }
  }
  return t;
}

// d/dt lambda_j along F_J, by central differences.
inline double contact_force_rate(const ModelSpec& model, const State& state,
                                 ContactMode J, int j, double h_fd) {
  const Vector z = state.stacked();
  const Vector F = vector_field(model, z, J, h_fd);
  const double h = h_fd * (1.0 + std::abs(state.t));
  return (detail::contact_force_component(model, z + h * F, J, j, h_fd) -
          detail::contact_force_component(model, z - h * F, J, j, h_fd)) /
         (2.0 * h);
}

// Builds the event at `pre` (whose mode is the pre-event mode) for
// constraints reaching zero (`activating`) and contact forces reaching zero
// (`deactivating`), enforcing the strict admissibility inequalities.
inline Event classify_event(const ModelSpec& model, const State& pre,
                            ContactMode activating, ContactMode deactivating,
                            const SolverConfig& config) {
  Event ev;
  ev.t = pre.t;
  ev.pre = pre;
  ev.post = pre;

  auto reject = [&](const std::string& why) {
    ev.admissible = false;
    ev.reason = why;
    std::ostringstream os;
    os << why << " at t = " << pre.t;
    throw GrazingDetected(os.str());
  };

  if (!activating.empty()) {
    for (int i : activating.indices()) {
      const double rate = detail::constraint_rate(model, i, pre.q, pre.v);
      if (rate >= -config.tol_graze) {
        std::ostringstream os;
        os << "grazing activation of constraint " << i + 1
           << " (Da v = " << rate << ")";
        reject(os.str());
      }
    }
    const ContactMode held = pre.mode;
    ev.reset_set =
        select_impact_set(model, pre.q, pre.v, held, activating, config);
    ev.post.v = impact(model, pre.q, pre.v, ev.reset_set).v_post;
    try {
      ev.post.mode = select_contact_mode(model, pre.q, ev.post.v,
                                         held | activating, config);
    } catch (const GrazingDetected& e) {
      reject(e.what());
    }
    ev.activated = activating;
    ev.deactivated = (held | activating) - ev.post.mode;
    ev.kind = ev.deactivated.empty() ? EventKind::kActivation
                                     : EventKind::kImpactWithDeactivation;
  } else {
    for (int i : deactivating.indices()) {
      const double rate =
          contact_force_rate(model, pre, pre.mode, i, config.h_fd);
      if (rate >= -config.tol_graze) {
        std::ostringstream os;
        os << "inadmissible deactivation of constraint " << i + 1
           << " (d lambda/dt = " << rate << ")";
        reject(os.str());
      }
    }
    ev.post.mode = pre.mode - deactivating;
    ev.deactivated = deactivating;
    ev.kind = EventKind::kDeactivation;
  }
  ev.constraints = ev.activated | ev.deactivated;
  ev.admissible = true;
  return ev;
}

// Initial contact mode: active constraints that are neither separating nor
// pulling.
inline State initial_state(const ModelSpec& model, const State& initial,
                           const SolverConfig& config) {
  State s = initial;
  const ContactMode J = active_set(model, s.q, config.tol_a);
  for (int i : J.indices()) {
    const double rate = detail::constraint_rate(model, i, s.q, s.v);
    if (rate < -config.tol_graze) {
      std::ostringstream os;
      os << "initial velocity penetrates active constraint " << i + 1;
      throw Infeasible(os.str());
    }
  }
  s.mode = select_contact_mode(model, s.q, s.v, J, config);
  return s;
}

// Simulates from `initial` for `horizon` seconds. Samples are left
// continuous: a sample taken at an event time is the pre-reset state.
inline Trajectory simulate(const ModelSpec& model, const State& initial,
                           double horizon, const SolverConfig& config) {
  model.require_well_formed();
  config.validate();
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (initial.q.size() != model.d || initial.v.size() != model.d) {
    throw ConfigError("initial state has the wrong dimension");
  }

  Trajectory traj;
  State state = initial_state(model, initial, config);
  const double t_start = state.t;
  const double t_end = t_start + horizon;
  traj.word.modes.push_back(state.mode);
  traj.word.times.push_back(t_start);
  traj.samples.push_back(state);

  long next_sample = 1;
  auto push_sample = [&](const State& s) {
    if (!traj.samples.empty() && s.t <= traj.samples.back().t) return;
    traj.samples.push_back(s);
  };
  auto emit_grid = [&](const AdaptiveStepper& st, ContactMode J, double upto) {
    if (config.sample_dt <= 0.0) return;
    for (;;) {
      const double ts = t_start + static_cast<double>(next_sample) *
                                      config.sample_dt;
      if (ts > upto || ts > t_end) break;
      if (ts > st.t_prev()) {
        push_sample(State::from_stacked(ts, st.evaluate(ts), J));
      }
      ++next_sample;
    }
  };

  for (;;) {
    const State seg_start = state;
    const ContactMode J = state.mode;
    FlowResult flow =
        flow_mode(model, state, J, t_end, config,
                  [&](const AdaptiveStepper& st) {
                    if (config.sample_dt > 0.0) {
                      emit_grid(st, J, st.t());
                    } else {
                      push_sample(State::from_stacked(st.t(), st.y(), J));
                    }
                  });

    if (flow.crossings.empty()) {
      state = flow.end;
      traj.segments.push_back({J, seg_start, state.t});
      break;
    }

    std::vector<double> times;
    double t_star = std::numeric_limits<double>::infinity();
    for (const Crossing& c : flow.crossings) {
      times.push_back(refine_event_time(model, flow, c, config));
      t_star = std::min(t_star, times.back());
    }
    const State pre = flow.state_at(t_star);

    ContactMode activating, deactivating;
    for (std::size_t k = 0; k < flow.crossings.size(); ++k) {
      if (times[k] > t_star + config.tol_cluster) continue;
      const GuardRef& g = flow.crossings[k].guard;
      (g.type == GuardType::kConstraint ? activating : deactivating)
          .insert(g.index);
    }
    if (!activating.empty()) {
      // Constraints about to arrive within the clustering window.
      for (int i = 0; i < model.n; ++i) {
        if (J.contains(i) || activating.contains(i)) continue;
        const double a = model.constraint(i, pre.q);
        const double rate = detail::constraint_rate(model, i, pre.q, pre.v);
        if (a >= -config.tol_a && rate < 0.0 &&
            a <= -rate * config.tol_cluster) {
          activating.insert(i);
        }
      }
    }

    if (config.sample_dt > 0.0) emit_grid(*flow.stepper, J, t_star);
    push_sample(pre);

    traj.segments.push_back({J, seg_start, t_star});
    if (t_star >= t_end - config.tol_event) {
      state = pre;
      traj.terminal_at_event = true;
      break;
    }

    const Event ev = classify_event(model, pre, activating, deactivating,
                                    config);
    traj.word.events.push_back(ev);
    traj.word.times.push_back(t_star);
    traj.word.modes.push_back(ev.post.mode);
    if (static_cast<int>(traj.word.events.size()) > config.max_events) {
      std::ostringstream os;
      os << "more than " << config.max_events << " events before t = "
         << t_star;
      throw ZenoGuard(os.str());
    }
    state = ev.post;
  }

  traj.word.times.push_back(t_end);
  traj.terminal = state;
  push_sample(state);
  return traj;
}

}  // namespace hybridsens

#endif  // HYBRIDSENS_HYBRID_FLOW_HPP_
