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

// Structural checks on a ModelSpec: mass matrix symmetry and definiteness,
// constraint gradients against differences, and the three decoupling
// clauses (block-diagonal mass, limb-local constraints/restitution/effort,
// additive body effort), each probed at a fixed pseudo-random set of states.

#ifndef HYBRIDSENS_VALIDATION_HPP_
#define HYBRIDSENS_VALIDATION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridsens/model.hpp"

namespace hybridsens {

struct CheckItem {
  std::string name;
  bool pass = true;
  double value = 0.0;      // worst observed violation
  double tolerance = 0.0;
  std::string detail;
};

struct DecouplingVerdict {
  bool declared = false;   // the model itself claims the partition
  bool evaluated = false;  // a partition was available to test
  bool pass = false;
  std::vector<CheckItem> clauses;
  std::string failed_clause;  // first failing clause, empty on pass
};

struct ModelCheckReport {
  std::string model;
  int probes = 0;
  std::vector<CheckItem> items;
  DecouplingVerdict decoupling;

  bool pass() const {
    for (const CheckItem& c : items) {
      if (!c.pass) return false;
    }
    return !decoupling.declared || decoupling.pass;
  }
};

inline constexpr std::uint64_t kProbeSeed = 0x5eed'cafe'f00dULL;

// Each seed state plus `per_seed` perturbations of q and v drawn uniformly
// from [-radius, radius].
inline std::vector<State> probe_states(const std::vector<State>& seeds,
                                       int per_seed, double radius = 0.05) {
  std::mt19937_64 rng(kProbeSeed);
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<State> out;
  for (const State& s : seeds) {
    out.push_back(s);
    for (int k = 0; k < per_seed; ++k) {
      State p = s;
      for (Eigen::Index i = 0; i < p.q.size(); ++i) p.q(i) += u(rng);
      for (Eigen::Index i = 0; i < p.v.size(); ++i) p.v(i) += u(rng);
      out.push_back(p);
    }
  }
  return out;
}

namespace detail {

inline CheckItem make_item(std::string name, double value, double tol,
                           std::string detail = {}) {
  CheckItem c;
  c.name = std::move(name);
  c.value = value;
  c.tolerance = tol;
  c.pass = value <= tol;
  c.detail = std::move(detail);
  return c;
}

inline std::vector<int> block_of(const Decoupling& blocks, int d) {
  std::vector<int> owner(static_cast<std::size_t>(d), -2);
  auto claim = [&](int k, int b) {
    if (k < 0 || k >= d) return false;
    if (owner[static_cast<std::size_t>(k)] != -2) return false;
    owner[static_cast<std::size_t>(k)] = b;
    return true;
  };
  for (int k : blocks.body) {
    if (!claim(k, -1)) return {};
  }
  for (std::size_t j = 0; j < blocks.limbs.size(); ++j) {
    if (blocks.limbs[j].empty()) return {};
    for (int k : blocks.limbs[j]) {
      if (!claim(k, static_cast<int>(j))) return {};
    }
  }
  if (std::find(owner.begin(), owner.end(), -2) != owner.end()) return {};
  return owner;
}

inline double sensitivity_to(const std::function<Vector(const Vector&)>& fn,
                             const Vector& x, int k, double h) {
  Vector xp = x;
  Vector xm = x;
  xp(k) += h;
  xm(k) -= h;
  return ((fn(xp) - fn(xm)) / (2.0 * h)).lpNorm<Eigen::Infinity>();
}

}  // namespace detail

// Clause checks for one block partition; `probes` supplies the states.
inline DecouplingVerdict check_decoupling(const ModelSpec& model,
                                          const Decoupling& blocks,
                                          const std::vector<State>& probes) {
  constexpr double kLocal = 1e-9;
  DecouplingVerdict out;
  out.evaluated = true;
  const int d = model.d;
  const std::vector<int> owner = detail::block_of(blocks, d);
  const bool partition_ok =
      !owner.empty() && static_cast<int>(blocks.limbs.size()) == model.n;
  out.clauses.push_back(detail::make_item(
      "partition", partition_ok ? 0.0 : 1.0, 0.0,
      partition_ok ? "" : "blocks must partition the coordinates with one "
                          "limb per constraint"));
  if (!partition_ok) {
    out.failed_clause = "partition";
    return out;
  }
  auto same_block = [&](int i, int k) {
    return owner[static_cast<std::size_t>(i)] ==
           owner[static_cast<std::size_t>(k)];
  };
  const double h = 1e-5;

  // (1) block-diagonal mass, each block a function of its own coordinates.
  double off_block = 0.0;
  double cross_dependence = 0.0;
  for (const State& s : probes) {
    const Matrix M = model.mass(s.q);
    const double scale = 1.0 + M.lpNorm<Eigen::Infinity>();
    for (int i = 0; i < d; ++i) {
      for (int k = 0; k < d; ++k) {
        if (!same_block(i, k)) {
          off_block = std::max(off_block, std::abs(M(i, k)) / scale);
        }
      }
    }
    for (int k = 0; k < d; ++k) {
      Vector qp = s.q;
      Vector qm = s.q;
      qp(k) += h;
      qm(k) -= h;
      const Matrix dM = (model.mass(qp) - model.mass(qm)) / (2.0 * h);
      for (int i = 0; i < d; ++i) {
        for (int l = 0; l < d; ++l) {
          if (same_block(i, l) && !same_block(i, k)) {
            cross_dependence =
                std::max(cross_dependence, std::abs(dM(i, l)) / scale);
          }
        }
      }
    }
  }
  {
    std::ostringstream os;
    os << "max off-block |M_ik| = " << off_block
       << ", max cross-block dependence = " << cross_dependence;
    out.clauses.push_back(detail::make_item(
        "clause1_block_diagonal_mass", std::max(off_block, cross_dependence),
        kLocal, os.str()));
  }

  // (2) a_j, gamma_j local to limb j; f_j depends on body and limb j only.
  double constraint_leak = 0.0;
  double restitution_leak = 0.0;
  double effort_leak = 0.0;
  for (const State& s : probes) {
    for (int j = 0; j < model.n; ++j) {
      const std::vector<int>& limb = blocks.limbs[static_cast<std::size_t>(j)];
      const Vector z = s.stacked();
      for (int k = 0; k < d; ++k) {
        const int ok = owner[static_cast<std::size_t>(k)];
        if (ok == j) continue;
        constraint_leak = std::max(
            constraint_leak,
            detail::sensitivity_to(
                [&](const Vector& q) {
                  return Vector::Constant(1, model.constraint(j, q));
                },
                s.q, k, h));
        for (int part = 0; part < 2; ++part) {
          const int idx = part * d + k;
          restitution_leak = std::max(
              restitution_leak,
              detail::sensitivity_to(
                  [&](const Vector& zz) {
                    return Vector::Constant(
                        1, model.restitution(j, zz.head(d), zz.tail(d)));
                  },
                  z, idx, h));
          if (ok >= 0) {  // another limb's coordinate
            const double leak = detail::sensitivity_to(
                [&](const Vector& zz) {
                  const Vector f = model.effort(zz.head(d), zz.tail(d));
                  Vector out_j(static_cast<Eigen::Index>(limb.size()));
                  for (std::size_t r = 0; r < limb.size(); ++r) {
                    out_j(static_cast<Eigen::Index>(r)) = f(limb[r]);
                  }
                  return out_j;
                },
                z, idx, h);
            effort_leak = std::max(effort_leak, leak);
          }
        }
      }
    }
  }
  {
    std::ostringstream os;
    os << "constraint " << constraint_leak << ", restitution "
       << restitution_leak << ", limb effort " << effort_leak;
    out.clauses.push_back(detail::make_item(
        "clause2_limb_locality",
        std::max({constraint_leak, restitution_leak, effort_leak}), kLocal,
        os.str()));
  }

  // (3) f_0 additive over limbs: every mixed difference between two
  // distinct limbs' states vanishes.
  double mixed = 0.0;
  const double delta = 1e-3;
  if (!blocks.body.empty()) {
    for (const State& s : probes) {
      const Vector z = s.stacked();
      auto f0 = [&](const Vector& zz) {
        const Vector f = model.effort(zz.head(d), zz.tail(d));
        Vector out0(static_cast<Eigen::Index>(blocks.body.size()));
        for (std::size_t r = 0; r < blocks.body.size(); ++r) {
          out0(static_cast<Eigen::Index>(r)) = f(blocks.body[r]);
        }
        return out0;
      };
      const Vector base = f0(z);
      const double scale = 1.0 + base.lpNorm<Eigen::Infinity>();
      for (int a = 0; a < 2 * d; ++a) {
        for (int b = a + 1; b < 2 * d; ++b) {
          const int oa = owner[static_cast<std::size_t>(a % d)];
          const int ob = owner[static_cast<std::size_t>(b % d)];
          if (oa < 0 || ob < 0 || oa == ob) continue;
          Vector zab = z, za = z, zb = z;
          zab(a) += delta;
          zab(b) += delta;
          za(a) += delta;
          zb(b) += delta;
          const Vector m2 = f0(zab) - f0(za) - f0(zb) + base;
          mixed = std::max(mixed, m2.lpNorm<Eigen::Infinity>() /
                                      (delta * delta * scale));
        }
      }
    }
  }
  {
    std::ostringstream os;
    os << "max normalized mixed difference " << mixed;
    out.clauses.push_back(detail::make_item("clause3_additive_body_effort",
                                            mixed, 1e-4, os.str()));
  }

  out.pass = true;
  for (const CheckItem& c : out.clauses) {
    if (!c.pass) {
      out.pass = false;
      out.failed_clause = c.name;
      break;
    }
  }
  return out;
}

inline ModelCheckReport check_model(
    const ModelSpec& model, const std::vector<State>& seeds,
    const std::optional<Decoupling>& candidate = std::nullopt,
    int per_seed = 8) {
  model.require_well_formed();
  ModelCheckReport rep;
  rep.model = model.name;
  const std::vector<State> probes = probe_states(seeds, per_seed);
  rep.probes = static_cast<int>(probes.size());
  const int d = model.d;
  const double h = 1e-6;

  double asym = 0.0;
  double min_eig = std::numeric_limits<double>::infinity();
  double grad_err = 0.0;
  double partial_err = 0.0;
  double gamma_min = std::numeric_limits<double>::infinity();
  double gamma_max = -std::numeric_limits<double>::infinity();
  for (const State& s : probes) {
    const Matrix M = model.mass(s.q);
    asym = std::max(asym, (M - M.transpose()).lpNorm<Eigen::Infinity>() /
                              (1.0 + M.lpNorm<Eigen::Infinity>()));
    const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()),
                                                   Eigen::EigenvaluesOnly);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    for (int j = 0; j < model.n; ++j) {
      const RowVector g = model.constraint_gradient(j, s.q);
      for (int k = 0; k < d; ++k) {
        Vector qp = s.q;
        Vector qm = s.q;
        qp(k) += h;
        qm(k) -= h;
        const double fd =
            (model.constraint(j, qp) - model.constraint(j, qm)) / (2.0 * h);
        grad_err = std::max(grad_err, std::abs(fd - g(k)) /
                                          (1.0 + std::abs(g(k))));
      }
      const double gamma = model.restitution(j, s.q, s.v);
      gamma_min = std::min(gamma_min, gamma);
      gamma_max = std::max(gamma_max, gamma);
    }
    if (model.hints.mass_partials) {
      const std::vector<Matrix> dM = model.hints.mass_partials(s.q);
      for (int k = 0; k < d; ++k) {
        Vector qp = s.q;
        Vector qm = s.q;
        qp(k) += h;
        qm(k) -= h;
        const Matrix fd = (model.mass(qp) - model.mass(qm)) / (2.0 * h);
        partial_err = std::max(
            partial_err, (fd - dM[static_cast<std::size_t>(k)])
                                 .lpNorm<Eigen::Infinity>() /
                             (1.0 + fd.lpNorm<Eigen::Infinity>()));
      }
    }
  }
  rep.items.push_back(detail::make_item("mass_symmetric", asym, 1e-12));
  {
    CheckItem c;
    c.name = "mass_positive_definite";
    c.value = min_eig;
    c.pass = min_eig > 0.0;
    c.detail = "smallest eigenvalue over probes";
    rep.items.push_back(c);
  }
  rep.items.push_back(detail::make_item("constraint_gradient", grad_err, 1e-6));
  if (model.hints.mass_partials) {
    rep.items.push_back(
        detail::make_item("mass_partials_hint", partial_err, 1e-6));
  }
  if (model.n > 0) {
    CheckItem c;
    c.name = "restitution_range";
    c.value = gamma_min;
    c.pass = gamma_min >= 0.0 && gamma_max <= 1.0;
    c.detail = "restitution must lie in [0, 1]";
    rep.items.push_back(c);
  }

  const std::optional<Decoupling>& blocks =
      model.decoupling ? model.decoupling : candidate;
  rep.decoupling.declared = model.decoupling.has_value();
  if (blocks) {
    const bool declared = rep.decoupling.declared;
    rep.decoupling = check_decoupling(model, *blocks, probes);
    rep.decoupling.declared = declared;
  }
  return rep;
}

}  // namespace hybridsens

#endif  // HYBRIDSENS_VALIDATION_HPP_
