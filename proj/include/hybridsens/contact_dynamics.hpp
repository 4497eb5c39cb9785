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

// Per-mode continuous dynamics and the impact reset map.

#ifndef HYBRIDSENS_CONTACT_DYNAMICS_HPP_
#define HYBRIDSENS_CONTACT_DYNAMICS_HPP_

#include <Eigen/Dense>

#include <sstream>

#include "hybridsens/model.hpp"

namespace hybridsens {

inline constexpr double kMaxDelassusCondition = 1e12;

// Da_J, M^-1 Da_J^T and the factored Delassus matrix Da_J M^-1 Da_J^T.
struct ConstraintBlock {
  Matrix A;
  Matrix minv_at;
  Matrix delassus;
  Eigen::LLT<Matrix> delassus_llt;
};

namespace detail {

inline ConstraintBlock constraint_block(const ModelSpec& model,
                                        const Eigen::LLT<Matrix>& mass_llt,
                                        const Vector& q, ContactMode J) {
  ConstraintBlock b;
  b.A = constraint_jacobian(model, q, J);
  b.minv_at = mass_llt.solve(b.A.transpose());
  b.delassus = b.A * b.minv_at;
  if (J.empty()) return b;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(b.delassus,
                                            Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxDelassusCondition) {
    std::ostringstream os;
    os << "Delassus matrix for J=" << J.to_string()
       << " is singular or ill-conditioned (eigenvalues " << lo << ", " << hi
       << ")";
    throw RankDeficient(os.str());
  }
  b.delassus_llt.compute(b.delassus);
  return b;
}

// f + c(q, v) v
inline Vector free_force(const ModelSpec& model, const Vector& q,
                         const Vector& v, double h_fd) {
  return model.effort(q, v) + coriolis(model, q, v, h_fd) * v;
}

}  // namespace detail

struct ModeDynamics {
  ContactMode J;
  Vector lambda;  // |J| contact forces, ordered like J.indices()
  Vector accel;   // d
  Vector field;   // 2d, (v, accel)
};

// Constraint-maintaining forces: the unique lambda with d^2/dt^2 a_J = 0,
//   lambda = -(A M^-1 A^T)^-1 (A M^-1 (f + c v) + D(A v) v).
inline ModeDynamics mode_dynamics(const ModelSpec& model, const Vector& q,
                                  const Vector& v, ContactMode J,
                                  double h_fd = 1e-6) {
  detail::check_dims(model, q);
  const Eigen::LLT<Matrix> llt = factor_mass(model, q);
  const Vector rhs = detail::free_force(model, q, v, h_fd);
  const Vector free_accel = llt.solve(rhs);

  ModeDynamics out;
  out.J = J;
  if (J.empty()) {
    out.lambda = Vector(0);
    out.accel = free_accel;
  } else {
    const ConstraintBlock b = detail::constraint_block(model, llt, q, J);
    const std::vector<int> idx = J.indices();
    Vector kappa(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      kappa(static_cast<Eigen::Index>(r)) =
          constraint_curvature(model, idx[r], q, v, h_fd);
    }
    out.lambda = -b.delassus_llt.solve(b.A * free_accel + kappa);
    out.accel = free_accel + b.minv_at * out.lambda;
  }
  out.field.resize(2 * model.d);
  out.field << v, out.accel;
  return out;
}

inline ModeDynamics mode_dynamics(const ModelSpec& model, const State& state,
                                  ContactMode J, double h_fd = 1e-6) {
  return mode_dynamics(model, state.q, state.v, J, h_fd);
}

inline Vector contact_force(const ModelSpec& model, const State& state,
                            ContactMode J, double h_fd = 1e-6) {
  return mode_dynamics(model, state, J, h_fd).lambda;
}

// F_J(z) = (v, alpha_J(q, v)) on the stacked state.
inline Vector vector_field(const ModelSpec& model, const Vector& z,
                           ContactMode J, double h_fd = 1e-6) {
  return mode_dynamics(model, z.head(model.d), z.tail(model.d), J, h_fd).field;
}

// P_J = M^-1 Da_J^T (Da_J M^-1 Da_J^T)^-1 Da_J
inline Matrix projection(const ModelSpec& model, const Vector& q,
                         ContactMode J) {
  detail::check_dims(model, q);
  if (J.empty()) return Matrix::Zero(model.d, model.d);
  const Eigen::LLT<Matrix> llt = factor_mass(model, q);
  const ConstraintBlock b = detail::constraint_block(model, llt, q, J);
  return b.minv_at * b.delassus_llt.solve(b.A);
}

struct ImpactResult {
  Vector v_post;
  // Generalized impulse multipliers p with M (v+ - v-) = Da_J^T p; positive
  // entries push the constraint apart.
  Vector impulse;
};

// Velocity reset with per-constraint restitution:
//   v+ = v- - M^-1 A^T G^-1 diag(1 + gamma_j) A v-
// which reduces to (I - (1 + gamma) P_J) v- for a common gamma and gives
// Da_J v+ = -gamma Da_J v- componentwise.
inline ImpactResult impact(const ModelSpec& model, const Vector& q,
                           const Vector& v, ContactMode J) {
  detail::check_dims(model, q);
  if (J.empty()) return {v, Vector(0)};
  const Eigen::LLT<Matrix> llt = factor_mass(model, q);
  const ConstraintBlock b = detail::constraint_block(model, llt, q, J);
  const std::vector<int> idx = J.indices();
  Vector scaled = b.A * v;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    scaled(static_cast<Eigen::Index>(r)) *=
        1.0 + model.restitution(idx[r], q, v);
  }
  ImpactResult out;
  out.impulse = -b.delassus_llt.solve(scaled);
  out.v_post = v + b.minv_at * out.impulse;
  return out;
}

inline Vector reset_velocity(const ModelSpec& model, const State& state,
                             ContactMode J) {
  return impact(model, state.q, state.v, J).v_post;
}

}  // namespace hybridsens

#endif  // HYBRIDSENS_CONTACT_DYNAMICS_HPP_
