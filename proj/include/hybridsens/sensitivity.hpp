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

// First-order sensitivity of the hybrid flow: variational Jacobians within a
// mode, reset Jacobians, saltation matrices at events and their composition
// along a trajectory. Also a central-difference oracle.

#ifndef HYBRIDSENS_SENSITIVITY_HPP_
#define HYBRIDSENS_SENSITIVITY_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridsens/contact_dynamics.hpp"
#include "hybridsens/dopri.hpp"
#include "hybridsens/hybrid_flow.hpp"
#include "hybridsens/model.hpp"

namespace hybridsens {

inline constexpr double kDecouplingFormTolerance = 1e-8;
inline constexpr double kWordIndependenceTolerance = 1e-6;

// Central-difference Jacobian of F_J at the stacked state z.
inline Matrix vector_field_jacobian(const ModelSpec& model, const Vector& z,
                                    ContactMode J, double h_fd) {
  const Eigen::Index n = z.size();
  Matrix D(n, n);
  Vector zp = z;
  Vector zm = z;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double h = detail::fd_step(z(k), h_fd);
    zp(k) = z(k) + h;
    zm(k) = z(k) - h;
    D.col(k) = (vector_field(model, zp, J, h_fd) -
                vector_field(model, zm, J, h_fd)) /
               (zp(k) - zm(k));
    zp(k) = z(k);
    zm(k) = z(k);
  }
  return D;
}

// X(t_end) for X' = DF_J(z(t)) X, X(start.t) = I, integrated alongside the
// state, with error control on both.
inline Matrix mode_jacobian(const ModelSpec& model, const State& start,
                            ContactMode J, double duration,
                            const SolverConfig& config) {
  const Eigen::Index n = 2 * model.d;
  if (!(duration > 0.0)) return Matrix::Identity(n, n);
  const double h_fd = config.h_fd;
  Vector y0(n + n * n);
  y0.head(n) = start.stacked();
  Eigen::Map<Matrix>(y0.data() + n, n, n) = Matrix::Identity(n, n);
  AdaptiveStepper stepper(
      [&model, J, h_fd, n](const Vector& y) {
        const Vector z = y.head(n);
        Vector out(y.size());
        out.head(n) = vector_field(model, z, J, h_fd);
        const Eigen::Map<const Matrix> X(y.data() + n, n, n);
        Eigen::Map<Matrix>(out.data() + n, n, n) =
            vector_field_jacobian(model, z, J, h_fd) * X;
        return out;
      },
      y0, start.t, config);
  const double t_end = start.t + duration;
  while (stepper.t() < t_end) stepper.advance(t_end);
  return Eigen::Map<const Matrix>(stepper.y().data() + n, n, n);
}

inline Matrix mode_jacobian(const ModelSpec& model, const Segment& seg,
                            const SolverConfig& config) {
  return mode_jacobian(model, seg.start, seg.mode, seg.t_end - seg.start.t,
                       config);
}

// DR_J = [[I, 0], [Box, Diamond]] for the reset on J at (q, v).
// Diamond = I - W (Gamma A + diag(A v) dgamma/dv), W = M^-1 A^T G^-1.
// Box is a central difference of the reset velocity in q.
inline Matrix reset_jacobian(const ModelSpec& model, const Vector& q,
                             const Vector& v, ContactMode J, double h_fd) {
  const int d = model.d;
  Matrix DR = Matrix::Identity(2 * d, 2 * d);
  if (J.empty()) return DR;

  Vector qp = q;
  Vector qm = q;
  for (int k = 0; k < d; ++k) {
    const double h = detail::fd_step(q(k), h_fd);
    qp(k) = q(k) + h;
    qm(k) = q(k) - h;
    DR.block(d, k, d, 1) =
        (impact(model, qp, v, J).v_post - impact(model, qm, v, J).v_post) /
        (qp(k) - qm(k));
    qp(k) = q(k);
    qm(k) = q(k);
  }

  const Eigen::LLT<Matrix> llt = factor_mass(model, q);
  const ConstraintBlock b = detail::constraint_block(model, llt, q, J);
  const std::vector<int> idx = J.indices();
  const auto m = static_cast<Eigen::Index>(idx.size());
  const Vector Av = b.A * v;
  Matrix inner(m, d);
  Vector vp = v;
  Vector vm = v;
  for (Eigen::Index r = 0; r < m; ++r) {
    const int j = idx[static_cast<std::size_t>(r)];
    inner.row(r) = (1.0 + model.restitution(j, q, v)) * b.A.row(r);
    for (int k = 0; k < d; ++k) {
      const double h = detail::fd_step(v(k), h_fd);
      vp(k) = v(k) + h;
      vm(k) = v(k) - h;
      const double dg =
          (model.restitution(j, q, vp) - model.restitution(j, q, vm)) /
          (vp(k) - vm(k));
      inner(r, k) += Av(r) * dg;
      vp(k) = v(k);
      vm(k) = v(k);
    }
  }
  DR.block(d, d, d, d) = Matrix::Identity(d, d) -
                         b.minv_at * b.delassus_llt.solve(inner);
  return DR;
}

// Basis of the tangent space of the constrained state space
// {a_J(q) = 0, Da_J(q) v = 0} at (q, v).
inline Matrix mode_tangent_basis(const ModelSpec& model, const Vector& q,
                                 const Vector& v, ContactMode J, double h_fd) {
  const int d = model.d;
  if (J.empty()) return Matrix::Identity(2 * d, 2 * d);
  const std::vector<int> idx = J.indices();
  const auto m = static_cast<Eigen::Index>(idx.size());
  Matrix C = Matrix::Zero(2 * m, 2 * d);
  for (Eigen::Index r = 0; r < m; ++r) {
    const int j = idx[static_cast<std::size_t>(r)];
    const RowVector g = model.constraint_gradient(j, q);
    C.block(r, 0, 1, d) = g;
    C.block(m + r, d, 1, d) = g;
    Vector qp = q;
    Vector qm = q;
    for (int k = 0; k < d; ++k) {
      const double h = detail::fd_step(q(k), h_fd);
      qp(k) = q(k) + h;
      qm(k) = q(k) - h;
      C(m + r, k) = (model.constraint_gradient(j, qp).dot(v) -
                     model.constraint_gradient(j, qm).dot(v)) /
                    (qp(k) - qm(k));
      qp(k) = q(k);
      qm(k) = q(k);
    }
  }
  return Eigen::FullPivLU<Matrix>(C).kernel();
}

struct SaltationMatrix {
  Matrix xi;                       // product form for `ordering`
  std::vector<int> ordering;       // constraint indices, first impact first
  std::vector<Matrix> stage_dr;    // DR-hat of each stage
  std::vector<Matrix> stage_terms; // S_l of each stage
  std::vector<double> denominators;  // Dh_l F_l of each stage
  Matrix dr;                       // DR of the full activating set
  std::vector<Matrix> s_terms;     // order-free rank-one terms, one per k
  Matrix closed_form;              // dr + sum(s_terms)
  double form_gap = 0.0;           // |xi - closed_form| on the tangent space
};

namespace detail {

inline void check_ordering(const std::vector<int>& ordering,
                           ContactMode activated) {
  ContactMode seen;
  for (int j : ordering) {
    if (!activated.contains(j) || seen.contains(j)) {
      throw ConfigError("ordering is not a permutation of the activating set " +
                        activated.to_string());
    }
    seen.insert(j);
  }
  if (!(seen == activated)) {
    throw ConfigError("ordering is not a permutation of the activating set " +
                      activated.to_string());
  }
}

}  // namespace detail

// Saltation matrix of an event. Activations are processed one constraint at
// a time in `ordering` (ascending index by default):
//   Xi = prod_l (DR-hat_l + S_l),
//   S_l = (F_{l+1} - DR-hat_l F_l) Dh_l / (Dh_l F_l),
// with later stages multiplying on the left. A pure deactivation gives I.
inline SaltationMatrix saltation_event(
    const ModelSpec& model, const Event& event, const SolverConfig& config,
    const std::optional<std::vector<int>>& ordering = std::nullopt) {
  const int d = model.d;
  const Eigen::Index n = 2 * d;
  SaltationMatrix out;
  out.xi = Matrix::Identity(n, n);
  out.dr = Matrix::Identity(n, n);
  out.closed_form = out.xi;
  if (event.activated.empty()) return out;

  out.ordering = ordering ? *ordering : event.activated.indices();
  detail::check_ordering(out.ordering, event.activated);

  const Vector& q = event.pre.q;
  const ContactMode J0 = event.pre.mode;
  const double h_fd = config.h_fd;
  auto stacked = [&](const Vector& vel) {
    Vector z(n);
    z << q, vel;
    return z;
  };
  auto guard_row = [&](int k) {
    RowVector Dh = RowVector::Zero(n);
    Dh.head(d) = model.constraint_gradient(k, q);
    return Dh;
  };

  Vector vel = event.pre.v;
  ContactMode mode = J0;
  for (int k : out.ordering) {
    const RowVector Dh = guard_row(k);
    const Vector Fl = vector_field(model, stacked(vel), mode, h_fd);
    const double den = Dh.dot(Fl);
    if (std::abs(den) < config.tol_graze) {
      std::ostringstream os;
      os << "Dh F = " << den << " for constraint " << k + 1 << " at t = "
         << event.t;
      throw GrazingDenominator(os.str());
    }
    if (den > 0.0) {
      std::ostringstream os;
      os << "constraint " << k + 1
         << " separates before its turn in the ordering (Dh F = " << den
         << ")";
      throw UnrealizableOrdering(os.str());
    }
    const ContactMode S =
        select_impact_set(model, q, vel, mode, ContactMode::single(k), config);
    const Matrix DR = reset_jacobian(model, q, vel, S, h_fd);
    const Vector vel_next = impact(model, q, vel, S).v_post;
    const ContactMode mode_next = select_contact_mode(
        model, q, vel_next, mode | ContactMode::single(k), config);
    const Vector Fn = vector_field(model, stacked(vel_next), mode_next, h_fd);
    const Matrix Sl = (Fn - DR * Fl) * Dh / den;
    out.stage_dr.push_back(DR);
    out.stage_terms.push_back(Sl);
    out.denominators.push_back(den);
    out.xi = (DR + Sl) * out.xi;
    vel = vel_next;
    mode = mode_next;
  }

  // Order-free form: every rank-one term is built from the pre-event state.
  const Vector& v0 = event.pre.v;
  const Vector F0 = vector_field(model, stacked(v0), J0, h_fd);
  out.dr = reset_jacobian(
      model, q, v0,
      select_impact_set(model, q, v0, J0, event.activated, config), h_fd);
  out.closed_form = out.dr;
  for (int k : event.activated.indices()) {
    const ContactMode single = ContactMode::single(k);
    const RowVector Dh = guard_row(k);
    const double den = Dh.dot(F0);
    const ContactMode S = select_impact_set(model, q, v0, J0, single, config);
    const Matrix DRk = reset_jacobian(model, q, v0, S, h_fd);
    const Vector vk = impact(model, q, v0, S).v_post;
    Matrix term = Matrix::Zero(n, n);
    try {
      const ContactMode mk =
          select_contact_mode(model, q, vk, J0 | single, config);
      const Vector Fk = vector_field(model, stacked(vk), mk, h_fd);
      term = (Fk - DRk * F0) * Dh / den;
    } catch (const GrazingDetected&) {
      term.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    out.s_terms.push_back(term);
    out.closed_form += term;
  }

  const Matrix T = mode_tangent_basis(model, q, v0, J0, h_fd);
  const Matrix gap = (out.xi - out.closed_form) * T;
  out.form_gap = gap.hasNaN() ? std::numeric_limits<double>::infinity()
                              : gap.lpNorm<Eigen::Infinity>();
  if (model.decoupling && event.activated.size() > 1 &&
      !(out.form_gap <= kDecouplingFormTolerance)) {
    std::ostringstream os;
    os << "product and order-free saltation forms differ by " << out.form_gap
       << " at t = " << event.t;
    throw DecouplingViolated(os.str());
  }
  return out;
}

struct SensitivityResult {
  Matrix d_phi;
  std::vector<Matrix> per_mode;
  std::vector<SaltationMatrix> per_event;
  Word word;
};

// event index -> ordering of its activating constraints
using OrderingOverrides = std::map<std::size_t, std::vector<int>>;

namespace detail {

inline void require_terminal_off_event(const ModelSpec& model,
                                       const Trajectory& traj,
                                       const SolverConfig& config) {
  bool at_event =
      traj.terminal_at_event ||
      (!traj.word.events.empty() &&
       traj.terminal.t - traj.word.events.back().t <= config.tol_event);
  // An arrival the horizon cut off before the crossing was seen.
  const State& s = traj.terminal;
  for (int j = 0; j < model.n && !at_event; ++j) {
    if (s.mode.contains(j)) continue;
    const double a = model.constraint(j, s.q);
    const double rate = model.constraint_gradient(j, s.q).dot(s.v);
    at_event = std::abs(a) <= config.tol_a && rate < -config.tol_graze &&
               a <= -rate * config.tol_cluster;
  }
  if (at_event) {
    std::ostringstream os;
    os << "horizon t = " << traj.terminal.t
       << " coincides with an event; the derivative is one-sided there";
    throw TerminalAtEvent(os.str());
  }
}

inline Matrix chain(const std::vector<Matrix>& per_mode,
                    const std::vector<SaltationMatrix>& per_event) {
  Matrix D = per_mode.front();
  for (std::size_t s = 1; s < per_mode.size(); ++s) {
    D = per_mode[s] * (per_event[s - 1].xi * D);
  }
  return D;
}

}  // namespace detail

// D phi = X_m Xi_m ... X_1 Xi_1 X_0 along the recorded word.
inline SensitivityResult trajectory_derivative(
    const ModelSpec& model, const Trajectory& traj, const SolverConfig& config,
    const OrderingOverrides& orderings = {}) {
  detail::require_terminal_off_event(model, traj, config);
  SensitivityResult out;
  out.word = traj.word;
  for (const Segment& seg : traj.segments) {
    out.per_mode.push_back(mode_jacobian(model, seg, config));
  }
  for (std::size_t e = 0; e < traj.word.events.size(); ++e) {
    const auto it = orderings.find(e);
    out.per_event.push_back(saltation_event(
        model, traj.word.events[e], config,
        it == orderings.end() ? std::nullopt
                              : std::optional<std::vector<int>>(it->second)));
  }
  out.d_phi = detail::chain(out.per_mode, out.per_event);
  return out;
}

// Gradient of the time of event `index` with respect to the initial state,
//   d tau = -Dh X / (Dh F-),
// where X is the derivative of the flow up to the pre-event state and h is
// the guard that triggered the event.
inline RowVector event_time_gradient(const ModelSpec& model,
                                     const Trajectory& traj, std::size_t index,
                                     const SolverConfig& config) {
  if (index >= traj.word.events.size()) {
    throw ConfigError("event index out of range");
  }
  const Event& ev = traj.word.events[index];
  const Eigen::Index n = 2 * model.d;
  Matrix X = Matrix::Identity(n, n);
  for (std::size_t s = 0; s <= index; ++s) {
    X = mode_jacobian(model, traj.segments[s], config) * X;
    if (s < index) {
      X = saltation_event(model, traj.word.events[s], config).xi * X;
    }
  }
  const Vector z = ev.pre.stacked();
  const Vector F = vector_field(model, z, ev.pre.mode, config.h_fd);
  RowVector Dh = RowVector::Zero(n);
  if (!ev.activated.empty()) {
    Dh.head(model.d) =
        model.constraint_gradient(ev.activated.indices().front(), ev.pre.q);
  } else {
    const int j = ev.deactivated.indices().front();
    Vector zp = z;
    Vector zm = z;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double h = detail::fd_step(z(k), config.h_fd);
      zp(k) = z(k) + h;
      zm(k) = z(k) - h;
      Dh(k) = (detail::contact_force_component(model, zp, ev.pre.mode, j,
                                               config.h_fd) -
               detail::contact_force_component(model, zm, ev.pre.mode, j,
                                               config.h_fd)) /
              (zp(k) - zm(k));
      zp(k) = z(k);
      zm(k) = z(k);
    }
  }
  return -(Dh * X) / Dh.dot(F);
}

struct FiniteDifferenceResult {
  Matrix jacobian;
  // Distinct words met by the perturbed runs, in coordinate order.
  std::vector<std::string> words;
};

// Central differences of the terminal state over each coordinate of (q, v).
inline FiniteDifferenceResult finite_difference_derivative(
    const ModelSpec& model, const State& initial, double horizon,
    const SolverConfig& config, double step) {
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be > 0");
  const int d = model.d;
  const Eigen::Index n = 2 * d;
  FiniteDifferenceResult out;
  out.jacobian.resize(n, n);
  std::set<std::string> seen;
  const Vector z0 = initial.stacked();
  for (Eigen::Index k = 0; k < n; ++k) {
    Vector ends[2];
    for (int side = 0; side < 2; ++side) {
      Vector z = z0;
      z(k) += side == 0 ? step : -step;
      const Trajectory tr = simulate(
          model, State::from_stacked(initial.t, z, initial.mode), horizon,
          config);
      ends[side] = tr.terminal.stacked();
      const std::string sig = tr.word.signature();
      if (seen.insert(sig).second) out.words.push_back(sig);
    }
    out.jacobian.col(k) = (ends[0] - ends[1]) / (2.0 * step);
  }
  return out;
}

// Orderings of `set` to evaluate: every permutation up to six elements,
// otherwise the cyclic shifts and their reversals.
inline std::vector<std::vector<int>> candidate_orderings(ContactMode set) {
  std::vector<int> base = set.indices();
  std::vector<std::vector<int>> out;
  if (base.size() <= 6) {
    do {
      out.push_back(base);
    } while (std::next_permutation(base.begin(), base.end()));
    return out;
  }
  for (std::size_t s = 0; s < base.size(); ++s) {
    std::vector<int> shifted(base.begin() + static_cast<long>(s), base.end());
    shifted.insert(shifted.end(), base.begin(),
                   base.begin() + static_cast<long>(s));
    out.push_back(shifted);
    std::reverse(shifted.begin(), shifted.end());
    out.push_back(shifted);
  }
  return out;
}

struct WordIndependenceReport {
  bool declared_decoupled = false;
  int simultaneous_events = 0;
  int orderings_evaluated = 0;
  int orderings_unrealizable = 0;
  double max_difference = 0.0;
  bool pass = true;
  std::vector<std::string> notes;
};

// Recomputes D phi for each ordering of every simultaneous activation and
// reports the largest pairwise difference.
inline WordIndependenceReport word_independence_check(
    const ModelSpec& model, const State& initial, double horizon,
    const SolverConfig& config) {
  WordIndependenceReport rep;
  rep.declared_decoupled = model.decoupling.has_value();
  const Trajectory traj = simulate(model, initial, horizon, config);
  detail::require_terminal_off_event(model, traj, config);

  std::vector<Matrix> per_mode;
  for (const Segment& seg : traj.segments) {
    per_mode.push_back(mode_jacobian(model, seg, config));
  }
  // Without a declaration the cross-check inside saltation_event is skipped;
  // the comparison below is what measures the dependence on the ordering.
  ModelSpec undeclared = model;
  undeclared.decoupling.reset();

  std::vector<SaltationMatrix> base;
  for (const Event& ev : traj.word.events) {
    base.push_back(saltation_event(undeclared, ev, config));
  }
  for (std::size_t e = 0; e < traj.word.events.size(); ++e) {
    const Event& ev = traj.word.events[e];
    if (ev.activated.size() < 2) continue;
    ++rep.simultaneous_events;
    std::vector<Matrix> results;
    for (const std::vector<int>& ord : candidate_orderings(ev.activated)) {
      std::vector<SaltationMatrix> events = base;
      try {
        events[e] = saltation_event(undeclared, ev, config, ord);
      } catch (const UnrealizableOrdering& err) {
        ++rep.orderings_unrealizable;
        rep.notes.push_back(err.what());
        continue;
      } catch (const GrazingDenominator& err) {
        ++rep.orderings_unrealizable;
        rep.notes.push_back(err.what());
        continue;
      }
      ++rep.orderings_evaluated;
      results.push_back(detail::chain(per_mode, events));
    }
    for (std::size_t a = 0; a < results.size(); ++a) {
      for (std::size_t b = a + 1; b < results.size(); ++b) {
        rep.max_difference =
            std::max(rep.max_difference,
                     (results[a] - results[b]).lpNorm<Eigen::Infinity>());
      }
    }
  }
  rep.pass = rep.max_difference < kWordIndependenceTolerance;
  return rep;
}

}  // namespace hybridsens

#endif  // HYBRIDSENS_SENSITIVITY_HPP_
