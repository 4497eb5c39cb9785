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

// Reference models. All parameters are dimensionless and of order one.
//
//   bouncing-ball   d=1, a = q, unit mass under gravity g.
//   ceiling-mass    d=1, a = q_max - q.
//   decoupled-pair  independent point masses, a_j = q_j; optional body
//                   coordinate tied to every limb by a linear spring, and an
//                   optional off-diagonal mass coupling that breaks
//                   decoupling.
//   soft-trot       planar body (x, z, theta) with two toe masses hung from
//                   the hips by spring-dampers; a_r = z_r, a_f = z_f.
//   rigid-trot      planar body with rigid legs, coordinates (x, y_r, y_f)
//                   at the feet; the mass matrix couples the feet.

#ifndef HYBRIDSENS_ZOO_HPP_
#define HYBRIDSENS_ZOO_HPP_

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybridsens/errors.hpp"
#include "hybridsens/model.hpp"

namespace hybridsens {

using Params = std::map<std::string, double>;

struct Preset {
  std::string name;
  std::string parameter;  // the scalar a sweep varies
  double default_value = 0.0;
  std::function<State(double)> make;
};

struct ZooEntry {
  std::string name;
  std::string description;
  Params params;
  ModelSpec model;
  std::vector<Preset> presets;
  // Block partition tested by the decoupling validator; equals
  // model.decoupling for models that claim it.
  std::optional<Decoupling> candidate_blocks;
  bool expect_decoupled = true;
  double horizon = 1.0;
  std::string outcome_name;
  std::function<double(const State&)> outcome;
  std::vector<std::string> facts;

  const Preset& preset(const std::string& name) const {
    for (const Preset& p : presets) {
      if (p.name == name) return p;
    }
    throw ConfigError(this->name + ": unknown preset '" + name + "'");
  }
};

namespace detail {

inline Params merge_params(const std::string& model, Params defaults,
                           const Params& overrides) {
  for (const auto& [key, value] : overrides) {
    auto it = defaults.find(key);
    if (it == defaults.end()) {
      throw ConfigError(model + ": unknown parameter '" + key + "'");
    }
    if (!std::isfinite(value)) {
      throw ConfigError(model + ": parameter '" + key + "' is not finite");
    }
    it->second = value;
  }
  return defaults;
}

inline void require_positive(const std::string& model, const Params& p,
                             std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (!(p.at(k) > 0.0)) {
      throw ConfigError(model + ": parameter '" + std::string(k) +
                        "' must be positive");
    }
  }
}

inline void require_restitution(const std::string& model, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) {
    throw ConfigError(model + ": restitution must lie in [0, 1]");
  }
}

inline DerivativeHints constant_mass_linear_constraints(int d) {
  DerivativeHints h;
  h.mass_partials = [d](const Vector&) {
    return std::vector<Matrix>(static_cast<std::size_t>(d),
                               Matrix::Zero(d, d));
  };
  h.constraint_curvature = [](int, const Vector&, const Vector&) {
    return 0.0;
  };
  return h;
}

inline RowVector unit_row(int d, int k, double s = 1.0) {
  RowVector r = RowVector::Zero(d);
  r(k) = s;
  return r;
}

inline State make_state(std::initializer_list<double> q,
                        std::initializer_list<double> v) {
  State s;
  s.q = Eigen::Map<const Vector>(q.begin(), static_cast<Eigen::Index>(q.size()));
  s.v = Eigen::Map<const Vector>(v.begin(), static_cast<Eigen::Index>(v.size()));
  return s;
}

}  // namespace detail

inline ZooEntry bouncing_ball(const Params& overrides = {}) {
  ZooEntry e;
  e.name = "bouncing-ball";
  e.description = "unit point mass above a floor";
  e.params = detail::merge_params(e.name, {{"g", 1.0}, {"gamma", 0.0}},
                                  overrides);
  detail::require_positive(e.name, e.params, {"g"});
  const double g = e.params.at("g");
  const double gamma = e.params.at("gamma");
  detail::require_restitution(e.name, gamma);

  ModelSpec& m = e.model;
  m.name = e.name;
  m.d = 1;
  m.n = 1;
  m.mass = [](const Vector&) { return Matrix::Identity(1, 1); };
  m.effort = [g](const Vector&, const Vector&) { return Vector::Constant(1, -g); };
  m.constraint = [](int, const Vector& q) { return q(0); };
  m.constraint_gradient = [](int, const Vector&) {
    return detail::unit_row(1, 0);
  };
  m.restitution = [gamma](int, const Vector&, const Vector&) { return gamma; };
  m.decoupling = Decoupling{{}, {{0}}};
  m.hints = detail::constant_mass_linear_constraints(1);
  e.candidate_blocks = m.decoupling;

  e.presets.push_back({"drop", "height", 1.0, [](double h) {
                         return detail::make_state({h}, {0.0});
                       }});
  e.horizon = 2.0;
  e.outcome_name = "q";
  e.outcome = [](const State& s) { return s.q(0); };
  e.facts = {
      "dropped from rest at height h, impact at t = sqrt(2 h / g) with "
      "speed sqrt(2 g h)",
      "plastic: at rest on the floor after impact; elastic: energy "
      "g q + v^2 / 2 conserved",
      "elastic impact with g = 1, v- = -1: Xi = [[-1, 0], [2, -1]]",
  };
  return e;
}

inline ZooEntry ceiling_mass(const Params& overrides = {}) {
  ZooEntry e;
  e.name = "ceiling-mass";
  e.description = "unit point mass below a ceiling at q_max";
  e.params = detail::merge_params(
      e.name, {{"g", 1.0}, {"gamma", 0.0}, {"q_max", 1.0}}, overrides);
  detail::require_positive(e.name, e.params, {"g"});
  const double g = e.params.at("g");
  const double gamma = e.params.at("gamma");
  const double q_max = e.params.at("q_max");
  detail::require_restitution(e.name, gamma);

  ModelSpec& m = e.model;
  m.name = e.name;
  m.d = 1;
  m.n = 1;
  m.mass = [](const Vector&) { return Matrix::Identity(1, 1); };
  m.effort = [g](const Vector&, const Vector&) { return Vector::Constant(1, -g); };
  m.constraint = [q_max](int, const Vector& q) { return q_max - q(0); };
  m.constraint_gradient = [](int, const Vector&) {
    return detail::unit_row(1, 0, -1.0);
  };
  m.restitution = [gamma](int, const Vector&, const Vector&) { return gamma; };
  m.decoupling = Decoupling{{}, {{0}}};
  m.hints = detail::constant_mass_linear_constraints(1);
  e.candidate_blocks = m.decoupling;

  // Launched from q_max - 1/2 so that the unconstrained apex is
  // q_max + overshoot. Zero overshoot touches the ceiling tangentially.
  auto launch = [q_max, g](double overshoot) {
    const double v0 = std::sqrt(2.0 * g * (0.5 + overshoot));
    return detail::make_state({q_max - 0.5}, {v0});
  };
  e.presets.push_back({"launch", "overshoot", 0.01, launch});
  e.presets.push_back({"graze", "overshoot", 0.0, launch});
  e.horizon = 2.0;
  e.outcome_name = "q";
  e.outcome = [](const State& s) { return s.q(0); };
  e.facts = {
      "launch with overshoot delta reaches the ceiling at speed "
      "sqrt(2 g delta); d(impact time)/d v0 grows like delta^-1/2",
      "overshoot 0 is a tangency and is rejected as grazing",
  };
  return e;
}

// Limbs are point masses with a_j = q_j. With body_stiffness > 0 a body
// coordinate is prepended, tied to limb j by a spring of rest length
// `body_offset`.
inline ZooEntry decoupled_pair(const Params& overrides = {}) {
  ZooEntry e;
  e.name = "decoupled-pair";
  e.description = "independent point masses above a floor";
  Params defaults = {{"limbs", 2.0},        {"g", 1.0},
                     {"coupling", 0.0},     {"body_stiffness", 0.0},
                     {"body_mass", 1.0},    {"body_offset", 0.5},
                     {"height", 1.0}};
  for (int j = 1; j <= 6; ++j) {
    defaults["m" + std::to_string(j)] = 1.0 + 0.5 * (j - 1);
    defaults["gamma" + std::to_string(j)] = 0.0;
  }
  e.params = detail::merge_params(e.name, defaults, overrides);
  const Params& p = e.params;
  detail::require_positive(e.name, p, {"g", "body_mass", "height"});
  const double limbs_d = p.at("limbs");
  if (limbs_d != std::floor(limbs_d) || limbs_d < 1 || limbs_d > 6) {
    throw ConfigError(e.name + ": limbs must be an integer in [1, 6]");
  }
  const int limbs = static_cast<int>(limbs_d);
  const double g = p.at("g");
  const double eps = p.at("coupling");
  const double k = p.at("body_stiffness");
  if (k < 0.0) throw ConfigError(e.name + ": body_stiffness must be >= 0");
  const bool body = k > 0.0;
  const int off = body ? 1 : 0;
  const int d = limbs + off;
  const double L = p.at("body_offset");

  Vector masses(d);
  if (body) masses(0) = p.at("body_mass");
  std::vector<double> gammas;
  for (int j = 0; j < limbs; ++j) {
    masses(off + j) = p.at("m" + std::to_string(j + 1));
    gammas.push_back(p.at("gamma" + std::to_string(j + 1)));
    detail::require_restitution(e.name, gammas.back());
  }
  if (!(masses.minCoeff() > 0.0)) {
    throw ConfigError(e.name + ": masses must be positive");
  }
  if (eps != 0.0 && limbs < 2) {
    throw ConfigError(e.name + ": coupling needs at least two limbs");
  }

  ModelSpec& m = e.model;
  m.name = e.name;
  m.d = d;
  m.n = limbs;
  Matrix M = masses.asDiagonal();
  if (eps != 0.0) {
    M(off, off + 1) = eps;
    M(off + 1, off) = eps;
  }
  m.mass = [M](const Vector&) { return M; };
  // Uniform gravitational acceleration g on every coordinate.
  const Vector weight = g * (M * Vector::Ones(d));
  m.effort = [weight, k, L, off, limbs, body](const Vector& q,
                                              const Vector&) {
    Vector f = -weight;
    if (body) {
      for (int j = 0; j < limbs; ++j) {
        const double stretch = q(0) - q(off + j) - L;
        f(off + j) += k * stretch;
        f(0) -= k * stretch;
      }
    }
    return f;
  };
  m.constraint = [off](int j, const Vector& q) { return q(off + j); };
  m.constraint_gradient = [d, off](int j, const Vector&) {
    return detail::unit_row(d, off + j);
  };
  m.restitution = [gammas](int j, const Vector&, const Vector&) {
    return gammas[static_cast<std::size_t>(j)];
  };
  m.hints = detail::constant_mass_linear_constraints(d);
  Decoupling blocks;
  if (body) blocks.body = {0};
  for (int j = 0; j < limbs; ++j) blocks.limbs.push_back({off + j});
  e.candidate_blocks = blocks;
  if (eps == 0.0) {
    m.decoupling = blocks;
  } else {
    e.expect_decoupled = false;
  }

  // Limb 1 starts `offset` above the others; all at rest.
  const double h = p.at("height");
  e.presets.push_back({"drop", "offset", 0.0, [=](double offset) {
                         State s;
                         s.q = Vector::Constant(d, h);
                         s.v = Vector::Zero(d);
                         if (body) s.q(0) = h + L;
                         s.q(off) += offset;
                         return s;
                       }});
  e.horizon = 2.0;
  e.outcome_name = "q_1";
  e.outcome = [off](const State& s) { return s.q(off); };
  e.facts = {
      "equal heights and velocities: all limbs land together at "
      "t = sqrt(2 h / g)",
      "with coupling = 0 each limb moves independently, so outcomes are "
      "smooth in the initial offset",
  };
  return e;
}

// q = (x, z, theta, z_r, z_f). Hips at heights z - l_r sin(theta) and
// z + l_f sin(theta); each toe hangs from its hip on a spring-damper of rest
// length L0 and carries the contact a = z_toe.
inline ZooEntry soft_trot(const Params& overrides = {}) {
  ZooEntry e;
  e.name = "soft-trot";
  e.description = "planar body on two spring-damper legs with toe masses";
  e.params = detail::merge_params(
      e.name,
      {{"m", 1.0}, {"inertia", 0.3}, {"m_toe", 0.1}, {"k_r", 30.0},
       {"k_f", 24.0}, {"b", 1.0}, {"L0", 0.5}, {"l_r", 0.5}, {"l_f", 0.6},
       {"g", 1.0}, {"height", 1.0}, {"compression", 0.3}},
      overrides);
  const Params& p = e.params;
  detail::require_positive(e.name, p,
                           {"m", "inertia", "m_toe", "k_r", "k_f", "L0",
                            "l_r", "l_f", "g"});
  if (p.at("b") < 0.0) throw ConfigError(e.name + ": b must be >= 0");
  const double mb = p.at("m"), inertia = p.at("inertia"), mt = p.at("m_toe");
  const double kr = p.at("k_r"), kf = p.at("k_f"), b = p.at("b");
  const double L0 = p.at("L0"), lr = p.at("l_r"), lf = p.at("l_f");
  const double g = p.at("g");

  ModelSpec& m = e.model;
  m.name = e.name;
  m.d = 5;
  m.n = 2;
  Vector diag(5);
  diag << mb, mb, inertia, mt, mt;
  const Matrix M = diag.asDiagonal();
  m.mass = [M](const Vector&) { return M; };
  m.effort = [=](const Vector& q, const Vector& v) {
    const double s = std::sin(q(2)), c = std::cos(q(2));
    const double len_r = q(1) - lr * s - q(3);
    const double len_f = q(1) + lf * s - q(4);
    const double rate_r = v(1) - lr * c * v(2) - v(3);
    const double rate_f = v(1) + lf * c * v(2) - v(4);
    const double Fr = kr * (L0 - len_r) - b * rate_r;
    const double Ff = kf * (L0 - len_f) - b * rate_f;
    Vector f(5);
    f << 0.0, Fr + Ff - mb * g, -lr * c * Fr + lf * c * Ff, -Fr - mt * g,
        -Ff - mt * g;
    return f;
  };
  m.constraint = [](int j, const Vector& q) { return q(3 + j); };
  m.constraint_gradient = [](int j, const Vector&) {
    return detail::unit_row(5, 3 + j);
  };
  m.restitution = [](int, const Vector&, const Vector&) { return 0.0; };
  m.hints = detail::constant_mass_linear_constraints(5);
  m.decoupling = Decoupling{{0, 1, 2}, {{3}, {4}}};
  e.candidate_blocks = m.decoupling;

  const double h = p.at("height");
  e.presets.push_back({"drop", "pitch", 0.0, [=](double theta) {
                         const double s = std::sin(theta);
                         return detail::make_state(
                             {0.0, h, theta, h - lr * s - L0, h + lf * s - L0},
                             {0.0, 0.0, 0.0, 0.0, 0.0});
                       }});
  const double comp = p.at("compression");
  e.presets.push_back({"hop", "pitch", 0.0, [=](double theta) {
                         const double s = std::sin(theta);
                         const double z = L0 - comp + std::max(lr, lf) *
                                                          std::abs(s);
                         return detail::make_state(
                             {0.0, z, theta, z - lr * s - (L0 - comp),
                              z + lf * s - (L0 - comp)},
                             {0.0, 0.0, 0.0, 0.0, 0.0});
                       }});
  e.horizon = 1.5;
  e.outcome_name = "pitch_rate";
  e.outcome = [](const State& s) { return s.v(2); };
  e.facts = {
      "limbs interact only through additive spring-damper efforts on the "
      "body, so the decoupling clauses hold",
      "pitch 0 in the drop preset lands both toes together; the sign of the "
      "pitch selects which toe lands first",
  };
  return e;
}

// q = (x, y_r, y_f): horizontal body position and foot heights. With hips
// 2 l apart, sin(theta) = (y_f - y_r) / (2 l) and the body centre sits at
// the mean foot height. The foot block of the mass matrix is
//   [[m/4 + c, m/4 - c], [m/4 - c, m/4 + c]],  c = I / (4 l^2 cos^2 theta),
// which is not block diagonal: an impulse at one foot moves the other.
inline ZooEntry rigid_trot(const Params& overrides = {}) {
  ZooEntry e;
  e.name = "rigid-trot";
  e.description = "planar body on two rigid legs";
  e.params = detail::merge_params(
      e.name,
      {{"m", 1.0}, {"inertia_ratio", 2.0}, {"l", 1.0}, {"g", 1.0},
       {"height", 1.0}},
      overrides);
  const Params& p = e.params;
  detail::require_positive(e.name, p,
                           {"m", "inertia_ratio", "l", "g", "height"});
  const double mb = p.at("m"), l = p.at("l"), g = p.at("g");
  const double inertia = p.at("inertia_ratio") * mb * l * l;

  const std::string label = e.name;
  auto coupling = [=](const Vector& q) {
    const double s = (q(2) - q(1)) / (2.0 * l);
    if (!(std::abs(s) < 1.0)) {
      throw DegenerateMass(label + ": body pitch reached +-90 degrees");
    }
    return inertia / (4.0 * l * l * (1.0 - s * s));
  };
  ModelSpec& m = e.model;
  m.name = e.name;
  m.d = 3;
  m.n = 2;
  m.mass = [=](const Vector& q) {
    const double c = coupling(q);
    Matrix M = Matrix::Zero(3, 3);
    M(0, 0) = mb;
    M(1, 1) = M(2, 2) = mb / 4.0 + c;
    M(1, 2) = M(2, 1) = mb / 4.0 - c;
    return M;
  };
  m.effort = [=](const Vector&, const Vector&) {
    Vector f(3);
    f << 0.0, -0.5 * mb * g, -0.5 * mb * g;
    return f;
  };
  m.constraint = [](int j, const Vector& q) { return q(1 + j); };
  m.constraint_gradient = [](int j, const Vector&) {
    return detail::unit_row(3, 1 + j);
  };
  m.restitution = [](int, const Vector&, const Vector&) { return 0.0; };
  m.hints.mass_partials = [=](const Vector& q) {
    const double s = (q(2) - q(1)) / (2.0 * l);
    const double dc_ds = inertia * 2.0 * s /
                         (4.0 * l * l * (1.0 - s * s) * (1.0 - s * s));
    const double dc_dyf = dc_ds / (2.0 * l);
    Matrix pattern = Matrix::Zero(3, 3);
    pattern(1, 1) = pattern(2, 2) = 1.0;
    pattern(1, 2) = pattern(2, 1) = -1.0;
    return std::vector<Matrix>{Matrix::Zero(3, 3), -dc_dyf * pattern,
                               dc_dyf * pattern};
  };
  m.hints.constraint_curvature = [](int, const Vector&, const Vector&) {
    return 0.0;
  };
  e.candidate_blocks = Decoupling{{0}, {{1}, {2}}};
  e.expect_decoupled = false;

  const double h = p.at("height");
  e.presets.push_back({"drop", "pitch", 0.0, [=](double theta) {
                         const double s = std::sin(theta);
                         return detail::make_state({0.0, h - l * s, h + l * s},
                                                   {0.0, 0.0, 0.0});
                       }});
  e.horizon = 1.6;
  e.outcome_name = "pitch_rate";
  e.outcome = [l](const State& s) {
    const double sn = (s.q(2) - s.q(1)) / (2.0 * l);
    return (s.v(2) - s.v(1)) / (2.0 * l * std::sqrt(1.0 - sn * sn));
  };
  e.facts = {
      "pitch 0: both feet land together and the body comes to rest, pitch "
      "rate 0",
      "pitch +-eps: the second foot's impact lifts the first (inertia ratio "
      "> 1), leaving a pitch rate bounded away from 0",
  };
  return e;
}

inline std::vector<std::string> zoo_names() {
  return {"bouncing-ball", "ceiling-mass", "decoupled-pair", "soft-trot",
          "rigid-trot"};
}

inline ZooEntry make_zoo_entry(const std::string& name,
                               const Params& overrides = {}) {
  if (name == "bouncing-ball") return bouncing_ball(overrides);
  if (name == "ceiling-mass") return ceiling_mass(overrides);
  if (name == "decoupled-pair") return decoupled_pair(overrides);
  if (name == "soft-trot") return soft_trot(overrides);
  if (name == "rigid-trot") return rigid_trot(overrides);
  throw ConfigError("unknown model '" + name + "'");
}

inline std::vector<ZooEntry> zoo() {
  std::vector<ZooEntry> out;
  for (const std::string& name : zoo_names()) out.push_back(make_zoo_entry(name));
  return out;
}

}  // namespace hybridsens

#endif  // HYBRIDSENS_ZOO_HPP_
