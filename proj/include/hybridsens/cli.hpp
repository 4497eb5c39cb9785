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

// Scenario files and the command implementations behind the `hybridsens`
// executable: simulate, sweep, sensitivity and check. Every output is a pure
// function of the scenario; numbers are written with 17 significant digits
// independent of locale, lines end in '\n'.

#ifndef HYBRIDSENS_CLI_HPP_
#define HYBRIDSENS_CLI_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybridsens/hybrid_flow.hpp"
#include "hybridsens/model.hpp"
#include "hybridsens/sensitivity.hpp"
#include "hybridsens/validation.hpp"
#include "hybridsens/zoo.hpp"

namespace hybridsens {

using Json = nlohmann::ordered_json;

struct Sweep {
  std::string parameter;  // preset parameter name, or q_i / v_i
  double from = 0.0;
  double to = 0.0;
  int count = 0;

  double value(int i) const {
    return from + (to - from) * static_cast<double>(i) /
                      static_cast<double>(count - 1);
  }
};

struct Scenario {
  ZooEntry entry;  // for external models only `model` and `name` are set
  bool from_zoo = true;
  std::string preset;  // empty when the initial state is explicit
  double preset_value = 0.0;
  State initial;
  double horizon = 1.0;
  SolverConfig config;
  std::optional<Sweep> sweep;
  double fd_step = 1e-5;

  const ModelSpec& model() const { return entry.model; }
  State initial_for(double value) const;
};

namespace detail {

inline double number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + " must be a number");
  return j.get<double>();
}

inline Vector vector_of(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = number(j[i], what);
  }
  return v;
}

inline void reject_unknown(const Json& obj, std::initializer_list<const char*> keys,
                           const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

// a_j(q) = normal_j . q + offset_j with constant mass and effort.
inline ModelSpec affine_model(const Json& j) {
  reject_unknown(j, {"type", "name", "mass", "effort", "constraints"}, "model");
  ModelSpec m;
  m.name = j.value("name", std::string("affine"));
  if (!j.contains("mass") || !j["mass"].is_array() || j["mass"].empty()) {
    throw ConfigError("affine model needs a square 'mass' matrix");
  }
  const auto d = static_cast<Eigen::Index>(j["mass"].size());
  Matrix M(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    const Vector row = vector_of(j["mass"][static_cast<std::size_t>(r)], "mass row");
    if (row.size() != d) throw ConfigError("mass matrix must be square");
    M.row(r) = row.transpose();
  }
  const Vector f = j.contains("effort") ? vector_of(j["effort"], "effort")
                                        : Vector::Zero(d);
  if (f.size() != d) throw ConfigError("effort has the wrong dimension");
  std::vector<RowVector> normals;
  std::vector<double> offsets, gammas;
  if (j.contains("constraints")) {
    if (!j["constraints"].is_array()) {
      throw ConfigError("'constraints' must be an array");
    }
    for (const Json& c : j["constraints"]) {
      reject_unknown(c, {"normal", "offset", "restitution"}, "constraint");
      const Vector nrm = vector_of(c.at("normal"), "constraint normal");
      if (nrm.size() != d) throw ConfigError("constraint normal has wrong size");
      normals.push_back(nrm.transpose());
      offsets.push_back(c.contains("offset") ? number(c["offset"], "offset") : 0.0);
      gammas.push_back(c.contains("restitution")
                           ? number(c["restitution"], "restitution")
                           : 0.0);
    }
  }
  m.d = static_cast<int>(d);
  m.n = static_cast<int>(normals.size());
  m.mass = [M](const Vector&) { return M; };
  m.effort = [f](const Vector&, const Vector&) { return f; };
  m.constraint = [normals, offsets](int i, const Vector& q) {
    return normals[static_cast<std::size_t>(i)].dot(q) +
           offsets[static_cast<std::size_t>(i)];
  };
  m.constraint_gradient = [normals](int i, const Vector&) {
    return normals[static_cast<std::size_t>(i)];
  };
  m.restitution = [gammas](int i, const Vector&, const Vector&) {
    return gammas[static_cast<std::size_t>(i)];
  };
  m.hints = constant_mass_linear_constraints(m.d);
  return m;
}

inline void apply_config(SolverConfig& c, const Json& j) {
  if (!j.is_object()) throw ConfigError("'config' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const Json& v = it.value();
    if (k == "newton_polish") {
      if (!v.is_boolean()) throw ConfigError("newton_polish must be boolean");
      c.newton_polish = v.get<bool>();
    } else if (k == "max_events") {
      c.max_events = static_cast<int>(number(v, k));
    } else if (k == "max_steps") {
      c.max_steps = static_cast<long>(number(v, k));
    } else {
      static const std::map<std::string, double SolverConfig::*> fields = {
          {"tol_a", &SolverConfig::tol_a},
          {"tol_event", &SolverConfig::tol_event},
          {"tol_cluster", &SolverConfig::tol_cluster},
          {"tol_graze", &SolverConfig::tol_graze},
          {"h_fd", &SolverConfig::h_fd},
          {"rtol", &SolverConfig::rtol},
          {"atol", &SolverConfig::atol},
          {"h_initial", &SolverConfig::h_initial},
          {"h_max", &SolverConfig::h_max},
          {"h_min", &SolverConfig::h_min},
          {"sample_dt", &SolverConfig::sample_dt},
      };
      const auto f = fields.find(k);
      if (f == fields.end()) throw ConfigError("unknown config key '" + k + "'");
      c.*(f->second) = number(v, k);
    }
  }
}

// Index into the stacked state for "q_3" / "v_1" (1-based), or -1.
inline int coordinate_index(const std::string& name, int d) {
  if (name.size() < 3 || (name[0] != 'q' && name[0] != 'v') || name[1] != '_') {
    return -1;
  }
  int k = 0;
  const char* first = name.data() + 2;
  const char* last = name.data() + name.size();
  const auto r = std::from_chars(first, last, k);
  if (r.ec != std::errc() || r.ptr != last || k < 1 || k > d) return -1;
  return (name[0] == 'q' ? 0 : d) + k - 1;
}

}  // namespace detail

inline State Scenario::initial_for(double value) const {
  if (!sweep) return initial;
  const int k = detail::coordinate_index(sweep->parameter, entry.model.d);
  if (k >= 0) {
    Vector z = initial.stacked();
    z(k) = value;
    return State::from_stacked(initial.t, z, ContactMode{});
  }
  return entry.preset(preset).make(value);
}

inline Scenario parse_scenario(const Json& j) {
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  detail::reject_unknown(j, {"model", "initial", "horizon", "config", "sweep",
                             "sensitivity", "description"},
                         "scenario");
  Scenario s;
  if (!j.contains("model")) throw ConfigError("scenario needs a 'model'");
  const Json& mj = j["model"];
  if (mj.is_string()) {
    s.entry = make_zoo_entry(mj.get<std::string>());
  } else if (mj.is_object() && mj.value("type", std::string()) == "affine") {
    s.from_zoo = false;
    s.entry.model = detail::affine_model(mj);
    s.entry.name = s.entry.model.name;
  } else if (mj.is_object() && mj.contains("name")) {
    detail::reject_unknown(mj, {"name", "params"}, "model");
    Params p;
    if (mj.contains("params")) {
      if (!mj["params"].is_object()) {
        throw ConfigError("model params must be an object");
      }
      for (auto it = mj["params"].begin(); it != mj["params"].end(); ++it) {
        p[it.key()] = detail::number(it.value(), "parameter " + it.key());
      }
    }
    s.entry = make_zoo_entry(mj["name"].get<std::string>(), p);
  } else {
    throw ConfigError("'model' must be a zoo name or a model object");
  }
  s.entry.model.require_well_formed();
  const int d = s.entry.model.d;

  const Json init = j.value("initial", Json::object());
  if (!init.is_object()) throw ConfigError("'initial' must be an object");
  detail::reject_unknown(init, {"preset", "value", "q", "v", "t"}, "initial");
  if (init.contains("q") || init.contains("v")) {
    if (init.contains("preset")) {
      throw ConfigError("'initial' takes either a preset or q and v");
    }
    s.initial.q = detail::vector_of(init.value("q", Json::array()), "initial q");
    s.initial.v = detail::vector_of(init.value("v", Json::array()), "initial v");
    if (s.initial.q.size() != d || s.initial.v.size() != d) {
      throw ConfigError("initial q and v must have model dimension");
    }
  } else {
    if (s.entry.presets.empty()) {
      throw ConfigError("model has no presets; give initial q and v");
    }
    s.preset = init.value("preset", s.entry.presets.front().name);
    const Preset& p = s.entry.preset(s.preset);
    s.preset_value = init.contains("value")
                         ? detail::number(init["value"], "initial value")
                         : p.default_value;
    s.initial = p.make(s.preset_value);
  }
  if (init.contains("t")) s.initial.t = detail::number(init["t"], "initial t");

  s.horizon = j.contains("horizon") ? detail::number(j["horizon"], "horizon")
                                    : s.entry.horizon;
  if (!(s.horizon > 0.0) || !std::isfinite(s.horizon)) {
    throw ConfigError("horizon must be positive");
  }
  if (j.contains("config")) detail::apply_config(s.config, j["config"]);

  if (j.contains("sweep")) {
    const Json& sw = j["sweep"];
    if (!sw.is_object()) throw ConfigError("'sweep' must be an object");
    detail::reject_unknown(sw, {"parameter", "from", "to", "count"}, "sweep");
    Sweep w;
    if (!sw.contains("parameter") || !sw["parameter"].is_string()) {
      throw ConfigError("sweep needs a 'parameter'");
    }
    w.parameter = sw["parameter"].get<std::string>();
    w.from = detail::number(sw.value("from", Json()), "sweep from");
    w.to = detail::number(sw.value("to", Json()), "sweep to");
    const double count = detail::number(sw.value("count", Json()), "sweep count");
    if (count != std::floor(count) || count < 2) {
      throw ConfigError("sweep count must be an integer >= 2");
    }
    w.count = static_cast<int>(count);
    if (detail::coordinate_index(w.parameter, d) < 0) {
      if (s.preset.empty() ||
          s.entry.preset(s.preset).parameter != w.parameter) {
        throw ConfigError("sweep parameter '" + w.parameter +
                          "' is neither q_i/v_i nor the preset parameter");
      }
    }
    s.sweep = w;
  }
  if (j.contains("sensitivity")) {
    const Json& sj = j["sensitivity"];
    detail::reject_unknown(sj, {"fd_step"}, "sensitivity");
    if (sj.contains("fd_step")) {
      s.fd_step = detail::number(sj["fd_step"], "fd_step");
      if (!(s.fd_step > 0.0)) throw ConfigError("fd_step must be positive");
    }
  }
  s.config.validate();
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario '" + path + "'");
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError("scenario '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_scenario(j);
}

// ---- output -----------------------------------------------------------

inline std::string format_number(double x) {
  if (x == 0.0) return "0";  // folds -0
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x,
                               std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

inline std::string state_header(int d) {
  std::string h;
  for (int k = 1; k <= d; ++k) h += ",q_" + std::to_string(k);
  for (int k = 1; k <= d; ++k) h += ",v_" + std::to_string(k);
  return h;
}

inline void append_state(std::string& line, const State& s) {
  for (Eigen::Index k = 0; k < s.q.size(); ++k) {
    line += ',';
    line += format_number(s.q(k));
  }
  for (Eigen::Index k = 0; k < s.v.size(); ++k) {
    line += ',';
    line += format_number(s.v(k));
  }
}

inline std::string trajectory_csv(const Trajectory& traj, int d) {
  std::string out = "t" + state_header(d) + ",mode_bitmask\n";
  for (const State& s : traj.samples) {
    std::string line = format_number(s.t);
    append_state(line, s);
    line += ',' + std::to_string(s.mode.bits()) + '\n';
    out += line;
  }
  return out;
}

namespace detail {

inline Json num(double x) {
  if (!std::isfinite(x)) return Json(nullptr);
  return Json(x == 0.0 ? 0.0 : x);
}

inline Json vec(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

inline Json mat(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(num(m(r, c)));
    a.push_back(row);
  }
  return a;
}

inline Json mode(ContactMode J) {
  Json a = Json::array();
  for (int j : J.indices()) a.push_back(j + 1);
  return a;
}

inline Json state(const State& s) {
  Json o = Json::object();
  o["t"] = num(s.t);
  o["q"] = vec(s.q);
  o["v"] = vec(s.v);
  o["mode"] = mode(s.mode);
  return o;
}

}  // namespace detail

inline Json word_json(const Word& w) {
  Json o = Json::object();
  o["signature"] = w.signature();
  Json modes = Json::array();
  for (ContactMode m : w.modes) modes.push_back(detail::mode(m));
  o["modes"] = modes;
  Json bits = Json::array();
  for (ContactMode m : w.modes) bits.push_back(m.bits());
  o["mode_bitmasks"] = bits;
  Json times = Json::array();
  for (double t : w.times) times.push_back(detail::num(t));
  o["times"] = times;
  Json events = Json::array();
  for (const Event& e : w.events) {
    Json ev = Json::object();
    ev["t"] = detail::num(e.t);
    ev["kind"] = to_string(e.kind);
    ev["activated"] = detail::mode(e.activated);
    ev["deactivated"] = detail::mode(e.deactivated);
    ev["reset_set"] = detail::mode(e.reset_set);
    ev["admissible"] = e.admissible;
    ev["pre"] = detail::state(e.pre);
    ev["post"] = detail::state(e.post);
    events.push_back(ev);
  }
  o["events"] = events;
  return o;
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline std::filesystem::path prepare_out(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "'");
  return p;
}

// ---- commands ---------------------------------------------------------

inline void cmd_simulate(const Scenario& s, const std::string& out_dir) {
  const Trajectory traj = simulate(s.model(), s.initial, s.horizon, s.config);
  const auto dir = prepare_out(out_dir);
  write_text(dir / "trajectory.csv", trajectory_csv(traj, s.model().d));
  Json w = word_json(traj.word);
  w["model"] = s.entry.name;
  w["horizon"] = detail::num(s.horizon);
  w["terminal"] = detail::state(traj.terminal);
  w["terminal_at_event"] = traj.terminal_at_event;
  write_json(dir / "word.json", w);
}

inline void cmd_sweep(const Scenario& s, const std::string& out_dir) {
  if (!s.sweep) throw ConfigError("scenario has no 'sweep' section");
  const int d = s.model().d;
  std::string csv = "value" + state_header(d) + ",outcome,word_id\n";
  std::vector<std::string> signatures;
  std::vector<Word> words;
  for (int i = 0; i < s.sweep->count; ++i) {
    const double value = s.sweep->value(i);
    const Trajectory traj =
        simulate(s.model(), s.initial_for(value), s.horizon, s.config);
    const std::string sig = traj.word.signature();
    auto it = std::find(signatures.begin(), signatures.end(), sig);
    const auto id = static_cast<std::size_t>(it - signatures.begin());
    if (it == signatures.end()) {
      signatures.push_back(sig);
      words.push_back(traj.word);
    }
    std::string line = format_number(value);
    append_state(line, traj.terminal);
    line += ',';
    line += s.entry.outcome ? format_number(s.entry.outcome(traj.terminal))
                            : format_number(traj.terminal.q(0));
    line += ',' + std::to_string(id) + '\n';
    csv += line;
  }
  const auto dir = prepare_out(out_dir);
  write_text(dir / "sweep.csv", csv);
  Json j = Json::object();
  j["model"] = s.entry.name;
  j["parameter"] = s.sweep->parameter;
  j["outcome"] = s.entry.outcome ? s.entry.outcome_name : std::string("q_1");
  Json arr = Json::array();
  for (std::size_t k = 0; k < words.size(); ++k) {
    Json w = Json::object();
    w["id"] = k;
    w["signature"] = signatures[k];
    Json modes = Json::array();
    for (ContactMode m : words[k].modes) modes.push_back(detail::mode(m));
    w["modes"] = modes;
    arr.push_back(w);
  }
  j["words"] = arr;
  write_json(dir / "words.json", j);
}

struct SensitivityComparison {
  double max_abs_error = 0.0;
  double max_relative_error = 0.0;  // normwise, relative to the FD matrix
  bool entrywise_ok = true;         // |A - B| <= max(1e-4 |B|, 1e-7)
};

inline SensitivityComparison compare_jacobians(const Matrix& a,
                                               const Matrix& fd) {
  SensitivityComparison c;
  const Matrix diff = (a - fd).cwiseAbs();
  c.max_abs_error = diff.maxCoeff();
  const double scale = fd.lpNorm<Eigen::Infinity>();
  c.max_relative_error = scale > 0.0 ? c.max_abs_error / scale : c.max_abs_error;
  for (Eigen::Index r = 0; r < diff.rows(); ++r) {
    for (Eigen::Index k = 0; k < diff.cols(); ++k) {
      if (diff(r, k) > std::max(1e-4 * std::abs(fd(r, k)), 1e-7)) {
        c.entrywise_ok = false;
      }
    }
  }
  return c;
}

inline void cmd_sensitivity(const Scenario& s, const std::string& out_dir) {
  const ModelSpec& model = s.model();
  const Trajectory traj = simulate(model, s.initial, s.horizon, s.config);
  const SensitivityResult sens = trajectory_derivative(model, traj, s.config);
  const FiniteDifferenceResult fd = finite_difference_derivative(
      model, s.initial, s.horizon, s.config, s.fd_step);
  const WordIndependenceReport wi =
      word_independence_check(model, s.initial, s.horizon, s.config);
  const SensitivityComparison cmp = compare_jacobians(sens.d_phi, fd.jacobian);

  Json j = Json::object();
  j["model"] = s.entry.name;
  j["horizon"] = detail::num(s.horizon);
  j["word"] = word_json(traj.word);
  j["d_phi"] = detail::mat(sens.d_phi);
  Json events = Json::array();
  for (std::size_t e = 0; e < sens.per_event.size(); ++e) {
    const SaltationMatrix& sm = sens.per_event[e];
    Json ev = Json::object();
    ev["t"] = detail::num(traj.word.events[e].t);
    ev["kind"] = to_string(traj.word.events[e].kind);
    Json ord = Json::array();
    for (int k : sm.ordering) ord.push_back(k + 1);
    ev["ordering"] = ord;
    ev["xi"] = detail::mat(sm.xi);
    ev["dr"] = detail::mat(sm.dr);
    ev["form_gap"] = detail::num(sm.form_gap);
    events.push_back(ev);
  }
  j["events"] = events;
  Json f = Json::object();
  f["step"] = detail::num(s.fd_step);
  f["jacobian"] = detail::mat(fd.jacobian);
  f["words"] = fd.words;
  f["max_abs_error"] = detail::num(cmp.max_abs_error);
  f["max_relative_error"] = detail::num(cmp.max_relative_error);
  f["agrees"] = cmp.entrywise_ok;
  j["finite_difference"] = f;
  Json w = Json::object();
  w["verdict"] = wi.pass ? "PASS" : "FAIL";
  w["declared_decoupled"] = wi.declared_decoupled;
  w["simultaneous_events"] = wi.simultaneous_events;
  w["orderings_evaluated"] = wi.orderings_evaluated;
  w["orderings_unrealizable"] = wi.orderings_unrealizable;
  w["max_difference"] = detail::num(wi.max_difference);
  j["word_independence"] = w;

  const auto dir = prepare_out(out_dir);
  write_json(dir / "sensitivity.json", j);
}

inline Json check_json(const ModelCheckReport& rep) {
  auto item = [](const CheckItem& c) {
    Json o = Json::object();
    o["name"] = c.name;
    o["pass"] = c.pass;
    o["value"] = detail::num(c.value);
    o["tolerance"] = detail::num(c.tolerance);
    if (!c.detail.empty()) o["detail"] = c.detail;
    return o;
  };
  Json j = Json::object();
  j["model"] = rep.model;
  j["probes"] = rep.probes;
  Json items = Json::array();
  for (const CheckItem& c : rep.items) items.push_back(item(c));
  j["checks"] = items;
  Json dec = Json::object();
  dec["declared"] = rep.decoupling.declared;
  if (rep.decoupling.evaluated) {
    dec["verdict"] = rep.decoupling.pass ? "PASS" : "FAIL";
    if (!rep.decoupling.pass) dec["failed_clause"] = rep.decoupling.failed_clause;
    Json clauses = Json::array();
    for (const CheckItem& c : rep.decoupling.clauses) clauses.push_back(item(c));
    dec["clauses"] = clauses;
  } else {
    dec["verdict"] = "NOT EVALUATED";
  }
  j["decoupling"] = dec;
  j["pass"] = rep.pass();
  return j;
}

inline ModelCheckReport run_check(const Scenario& s) {
  std::vector<State> seeds{s.initial};
  for (const Preset& p : s.entry.presets) seeds.push_back(p.make(p.default_value));
  return check_model(s.model(), seeds, s.entry.candidate_blocks);
}

inline void cmd_check(const Scenario& s, const std::string& out_dir) {
  const auto dir = prepare_out(out_dir);
  write_json(dir / "check.json", check_json(run_check(s)));
}

}  // namespace hybridsens

#endif  // HYBRIDSENS_CLI_HPP_
