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

// Data model for mechanical systems subject to unilateral constraints
//
//   M(q) q'' = f(q, q') + c(q, q') q' + Da_J(q)^T lambda_J(q, q')
//   q'+      = Delta_J(q, q'-) q'-
//
// with constraints a_j(q) >= 0, j = 0..n-1, and derived quantities shared by
// the dynamics, flow and sensitivity layers. Constraint indices are 0-based in
// code; contact-mode bitmasks use bit j for constraint j.

#ifndef HYBRIDSENS_MODEL_HPP_
#define HYBRIDSENS_MODEL_HPP_

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hybridsens/errors.hpp"

namespace hybridsens {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr int kMaxConstraints = 63;

// Subset J of {0..n-1} stored as a bitmask.
class ContactMode {
 public:
  constexpr ContactMode() = default;
  constexpr explicit ContactMode(std::uint64_t bits) : bits_(bits) {}

  static ContactMode single(int j) { return ContactMode(std::uint64_t{1} << j); }
  static ContactMode full(int n) {
    return ContactMode(n >= 64 ? ~std::uint64_t{0}
                               : (std::uint64_t{1} << n) - 1);
  }
  static ContactMode of(std::initializer_list<int> js) {
    ContactMode m;
    for (int j : js) m.insert(j);
    return m;
  }

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  int size() const { return std::popcount(bits_); }
  bool contains(int j) const { return (bits_ >> j) & 1u; }
  void insert(int j) { bits_ |= std::uint64_t{1} << j; }
  void erase(int j) { bits_ &= ~(std::uint64_t{1} << j); }

  // Members in increasing order.
  std::vector<int> indices() const {
    std::vector<int> out;
    for (std::uint64_t b = bits_; b != 0; b &= b - 1) {
      out.push_back(std::countr_zero(b));
    }
    return out;
  }

  bool subset_of(ContactMode other) const {
    return (bits_ & ~other.bits_) == 0;
  }

  friend constexpr ContactMode operator|(ContactMode a, ContactMode b) {
    return ContactMode(a.bits_ | b.bits_);
  }
  friend constexpr ContactMode operator&(ContactMode a, ContactMode b) {
    return ContactMode(a.bits_ & b.bits_);
  }
  friend constexpr ContactMode operator-(ContactMode a, ContactMode b) {
    return ContactMode(a.bits_ & ~b.bits_);
  }
  friend constexpr bool operator==(ContactMode, ContactMode) = default;

  // 1-based set notation, e.g. "{1,2}" or "{}".
  std::string to_string() const {
    std::ostringstream os;
    os << '{';
    bool first = true;
    for (int j : indices()) {
      if (!first) os << ',';
      os << j + 1;
      first = false;
    }
    os << '}';
    return os.str();
  }

 private:
  std::uint64_t bits_ = 0;
};

struct State {
  double t = 0.0;
  Vector q;
  Vector v;
  ContactMode mode;

  // (q, v) stacked into one 2d-vector.
  Vector stacked() const {
    Vector z(q.size() + v.size());
    z << q, v;
    return z;
  }
  static State from_stacked(double t, const Vector& z, ContactMode mode) {
    const auto d = z.size() / 2;
    return State{t, z.head(d), z.tail(d), mode};
  }
};

struct SolverConfig {
  double tol_a = 1e-8;         // activation tolerance on constraint values
  double tol_event = 1e-12;    // event-time refinement tolerance (s)
  double tol_cluster = 1e-9;   // crossings this close in time are simultaneous
  double tol_graze = 1e-8;     // strictness margin for admissibility checks
  double h_fd = 1e-6;          // relative finite-difference step
  int max_events = 10000;
  bool newton_polish = true;   // polish bisected event times with Newton

  // Dormand-Prince 5(4) controls.
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_initial = 1e-3;
  double h_max = 0.05;
  double h_min = 1e-13;
  long max_steps = 10'000'000;

  // Sample spacing for Trajectory::samples; 0 records every accepted step.
  double sample_dt = 0.0;

  void validate() const {
    auto positive = [](double x, const char* name) {
      if (!(x > 0.0) || !std::isfinite(x)) {
        throw ConfigError(std::string(name) + " must be strictly positive");
      }
    };
    positive(tol_a, "tol_a");
    positive(tol_event, "tol_event");
    positive(tol_cluster, "tol_cluster");
    positive(tol_graze, "tol_graze");
    positive(h_fd, "h_fd");
    positive(rtol, "rtol");
    positive(atol, "atol");
    positive(h_initial, "h_initial");
    positive(h_max, "h_max");
    positive(h_min, "h_min");
    if (max_events < 1) throw ConfigError("max_events must be >= 1");
    if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (sample_dt < 0.0) throw ConfigError("sample_dt must be >= 0");
  }
};

// Block structure q = (q_0, q_1, ..., q_n): body coordinates plus one limb
// block per constraint.
struct Decoupling {
  std::vector<int> body;
  std::vector<std::vector<int>> limbs;
};

// Optional analytic derivatives; anything left empty is differenced.
struct DerivativeHints {
  // dM/dq_k for k = 0..d-1.
  std::function<std::vector<Matrix>(const Vector& q)> mass_partials;
  // v^T (Hessian of a_j) v, i.e. D(Da_j(q) v) v.
  std::function<double(int j, const Vector& q, const Vector& v)>
      constraint_curvature;
};

struct ModelSpec {
  std::string name;
  int d = 0;
  int n = 0;
  std::function<Matrix(const Vector& q)> mass;
  std::function<Vector(const Vector& q, const Vector& v)> effort;
  std::function<double(int j, const Vector& q)> constraint;
  std::function<RowVector(int j, const Vector& q)> constraint_gradient;
  std::function<double(int j, const Vector& q, const Vector& v)> restitution;
  std::optional<Decoupling> decoupling;
  DerivativeHints hints;

  void require_well_formed() const {
    if (d <= 0) throw ConfigError(name + ": d must be positive");
    if (n < 0 || n > kMaxConstraints) {
      throw ConfigError(name + ": n must be in [0, 63]");
    }
    if (!mass || !effort || (n > 0 && (!constraint || !constraint_gradient ||
                                       !restitution))) {
      throw ConfigError(name + ": missing model function");
    }
  }
};

namespace detail {

inline double fd_step(double x, double h) { return h * (1.0 + std::abs(x)); }

inline void check_dims(const ModelSpec& model, const Vector& q) {
  if (q.size() != model.d) {
    throw ConfigError("configuration has dimension " +
                      std::to_string(q.size()) + ", model expects " +
                      std::to_string(model.d));
  }
}

}  // namespace detail

// Cholesky factor of M(q); throws DegenerateMass if M is not SPD.
inline Eigen::LLT<Matrix> factor_mass(const ModelSpec& model, const Vector& q) {
  Eigen::LLT<Matrix> llt(model.mass(q));
  if (llt.info() != Eigen::Success) {
    throw DegenerateMass(model.name + ": Cholesky of M(q) failed");
  }
  return llt;
}

// dM/dq_k, from hints when available.
inline std::vector<Matrix> mass_partials(const ModelSpec& model,
                                         const Vector& q, double h_fd = 1e-6) {
  if (model.hints.mass_partials) return model.hints.mass_partials(q);
  std::vector<Matrix> out;
  out.reserve(model.d);
  Vector qp = q, qm = q;
  for (int k = 0; k < model.d; ++k) {
    const double h = detail::fd_step(q(k), h_fd);
    qp(k) = q(k) + h;
    qm(k) = q(k) - h;
    out.push_back((model.mass(qp) - model.mass(qm)) / (qp(k) - qm(k)));
    qp(k) = q(k);
    qm(k) = q(k);
  }
  return out;
}

// Coriolis matrix with
//   c_lm = -1/2 sum_k (D_k M_lm + D_m M_lk - D_l M_km) v_k,
// so that c(q, v) v is the velocity-product force on the right-hand side.
inline Matrix coriolis(const ModelSpec& model, const Vector& q, const Vector& v,
                       double h_fd = 1e-6) {
  detail::check_dims(model, q);
  factor_mass(model, q);
  const int d = model.d;
  const std::vector<Matrix> dM = mass_partials(model, q, h_fd);
  Matrix c = Matrix::Zero(d, d);
  for (int l = 0; l < d; ++l) {
    for (int m = 0; m < d; ++m) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        s += (dM[k](l, m) + dM[m](l, k) - dM[l](k, m)) * v(k);
      }
      c(l, m) = -0.5 * s;
    }
  }
  return c;
}

struct GuardValue {
  double value;
  RowVector gradient;  // 1 x 2d; velocity block is identically zero
};

// h_j(q, v) = a_j(q) and its derivative on TQ.
inline GuardValue guard(const ModelSpec& model, int j, const State& state) {
  if (j < 0 || j >= model.n) {
    throw ConfigError("constraint index out of range: " + std::to_string(j));
  }
  GuardValue g{model.constraint(j, state.q), RowVector::Zero(2 * model.d)};
  g.gradient.head(model.d) = model.constraint_gradient(j, state.q);
  return g;
}

inline Vector constraint_values(const ModelSpec& model, const Vector& q) {
  Vector a(model.n);
  for (int j = 0; j < model.n; ++j) a(j) = model.constraint(j, q);
  return a;
}

// Stacked rows Da_j(q) for j in J (increasing order).
inline Matrix constraint_jacobian(const ModelSpec& model, const Vector& q,
                                  ContactMode J) {
  const std::vector<int> idx = J.indices();
  Matrix A(static_cast<Eigen::Index>(idx.size()), model.d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    A.row(static_cast<Eigen::Index>(r)) = model.constraint_gradient(idx[r], q);
  }
  return A;
}

// J = { j : |a_j(q)| <= tol_a }; penetration beyond tol_a is an error.
inline ContactMode active_set(const ModelSpec& model, const Vector& q,
                              double tol_a) {
  detail::check_dims(model, q);
  ContactMode J;
  for (int j = 0; j < model.n; ++j) {
    const double a = model.constraint(j, q);
    if (a < -tol_a) {
      std::ostringstream os;
      os << "constraint " << j + 1 << " violated: a = " << a;
      throw Infeasible(os.str());
    }
    if (a <= tol_a) J.insert(j);
  }
  return J;
}

// v^T Hess(a_j) v; central difference of Da_j along v unless hinted.
inline double constraint_curvature(const ModelSpec& model, int j,
                                   const Vector& q, const Vector& v,
                                   double h_fd = 1e-6) {
  if (model.hints.constraint_curvature) {
    return model.hints.constraint_curvature(j, q, v);
  }
  const double speed = v.lpNorm<Eigen::Infinity>();
  if (speed == 0.0) return 0.0;
  const double h = detail::fd_step(q.lpNorm<Eigen::Infinity>(), h_fd) / speed;
  const RowVector gp = model.constraint_gradient(j, q + h * v);
  const RowVector gm = model.constraint_gradient(j, q - h * v);
  return (gp - gm).dot(v) / (2.0 * h);
}

}  // namespace hybridsens

#endif  // HYBRIDSENS_MODEL_HPP_
