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

// Acceptance suite. One line per criterion; exit status is the number of
// failed criteria.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hybridsens/cli.hpp"
#include "hybridsens/hybridsens.hpp"

namespace {

using namespace hybridsens;

namespace fs = std::filesystem;

double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

struct Line {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAIL]");
  }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string sci(double x) { return fmt("%.3g", x); }

// Ball of unit mass dropped from rest at height h: the event sits at
// v- = -sqrt(2 g h).
Event ball_impact(const ModelSpec& m, double h) {
  const Trajectory tr =
      simulate(m, bouncing_ball().preset("drop").make(h), 2.0, SolverConfig{});
  return tr.word.events.at(0);
}

Line criterion1() {
  Line out;
  // g = 1, v- = -1.
  const ModelSpec elastic = bouncing_ball({{"gamma", 1.0}}).model;
  const Event ev = ball_impact(elastic, 0.5);
  const Matrix xi = saltation_event(elastic, ev, SolverConfig{}).xi;
  Matrix want(2, 2);
  want << -1.0, 0.0, 2.0, -1.0;
  out.require(max_abs(xi - want) <= 1e-6,
              "elastic |Xi - [[-1,0],[2,-1]]| = " + sci(max_abs(xi - want)));

  const ModelSpec plastic = bouncing_ball().model;
  const Event pev = ball_impact(plastic, 0.5);
  const Matrix pxi = saltation_event(plastic, pev, SolverConfig{}).xi;
  Matrix stated(2, 2);
  stated << 0.0, 0.0, 1.0, 0.0;
  out.require(max_abs(pxi - stated) <= 1e-6,
              "plastic |Xi - [[0,0],[1,0]]| = " + sci(max_abs(pxi - stated)));

  // Hand-derived rank-one formula, and the flow it predicts against
  // differences of the simulator.
  for (double gamma : {0.0, 0.5, 1.0}) {
    Matrix closed(2, 2);
    closed << -gamma, 0.0, (1.0 + gamma), -gamma;
    if (gamma == 0.0) closed.setZero();  // the ball rests: F+ = 0
    const ModelSpec m = bouncing_ball({{"gamma", gamma}}).model;
    const Matrix x = saltation_event(m, ball_impact(m, 0.5), SolverConfig{}).xi;
    out.require(max_abs(x - closed) <= 1e-6,
                "closed form gamma=" + fmt("%.1f", gamma) + " " +
                    sci(max_abs(x - closed)));
  }
  const State s0 = bouncing_ball().preset("drop").make(0.5);
  const double T = 1.5;
  const Matrix D =
      trajectory_derivative(plastic, simulate(plastic, s0, T, SolverConfig{}),
                            SolverConfig{})
          .d_phi;
  const Matrix fd =
      finite_difference_derivative(plastic, s0, T, SolverConfig{}, 1e-5).jacobian;
  out.require(max_abs(D - fd) <= 1e-7 && max_abs(fd) <= 1e-7,
              "plastic D_phi vs differences " + sci(max_abs(D - fd)) +
                  ", |fd| = " + sci(max_abs(fd)));
  return out;
}

bool entrywise(const Matrix& a, const Matrix& fd, double* worst) {
  bool ok = true;
  *worst = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      const double err = std::abs(a(r, c) - fd(r, c));
      const double tol = std::max(1e-4 * std::abs(fd(r, c)), 1e-7);
      *worst = std::max(*worst, err / tol);
      ok = ok && err <= tol;
    }
  }
  return ok;
}

Line criterion2() {
  Line out;
  const ZooEntry e = decoupled_pair({{"gamma2", 0.5}});
  const SolverConfig cfg;
  for (double offset : {0.0, 2e-6}) {
    const State s0 = e.preset("drop").make(offset);
    const Trajectory tr = simulate(e.model, s0, 2.0, cfg);
    const Matrix D = trajectory_derivative(e.model, tr, cfg).d_phi;
    const FiniteDifferenceResult fd =
        finite_difference_derivative(e.model, s0, 2.0, cfg, 1e-5);
    double worst = 0.0;
    const bool ok = entrywise(D, fd.jacobian, &worst);
    out.require(ok, "offset " + sci(offset) + ": fd error/tol " + sci(worst));
    out.require(fd.words.size() >= 2,
                std::to_string(fd.words.size()) + " words under perturbation");
  }
  const WordIndependenceReport rep = word_independence_check(
      e.model, e.preset("drop").make(0.0), 2.0, cfg);
  out.require(rep.simultaneous_events >= 1 && rep.orderings_evaluated >= 2 &&
                  rep.max_difference < 1e-6,
              "orderings " + std::to_string(rep.orderings_evaluated) +
                  ", max diff " + sci(rep.max_difference));
  return out;
}

// Product form against DR + sum of rank-one terms, on the tangent space of
// the pre-event mode, for every ordering.
Line criterion3() {
  Line out;
  struct Case {
    std::string label;
    ZooEntry entry;
    std::string preset;
    int size;
  };
  const std::vector<Case> cases = {
      {"pair", decoupled_pair({{"gamma2", 0.5}}), "drop", 2},
      {"pair+body", decoupled_pair({{"body_stiffness", 4.0}, {"gamma1", 0.3}}),
       "drop", 2},
      {"triple+body",
       decoupled_pair({{"limbs", 3}, {"body_stiffness", 4.0}, {"gamma2", 0.5},
                       {"gamma3", 1.0}}),
       "drop", 3},
      {"soft-trot", soft_trot(), "drop", 2},
  };
  const SolverConfig cfg;
  for (const Case& c : cases) {
    const Trajectory tr = simulate(
        c.entry.model, c.entry.preset(c.preset).make(0.0), 2.0, cfg);
    const Event* ev = nullptr;
    for (const Event& x : tr.word.events) {
      if (x.activated.size() >= 2) {
        ev = &x;
        break;
      }
    }
    if (ev == nullptr || ev->activated.size() != c.size) {
      out.require(false, c.label + ": no simultaneous activation of size " +
                             std::to_string(c.size));
      continue;
    }
    const Matrix T = mode_tangent_basis(c.entry.model, ev->pre.q, ev->pre.v,
                                        ev->pre.mode, cfg.h_fd);
    double gap = 0.0;
    int count = 0;
    for (const std::vector<int>& ord : candidate_orderings(ev->activated)) {
      const SaltationMatrix s = saltation_event(c.entry.model, *ev, cfg, ord);
      Matrix sum = s.dr;
      for (const Matrix& t : s.s_terms) sum += t;
      gap = std::max(gap, max_abs((s.xi - sum) * T));
      ++count;
    }
    out.require(gap <= 1e-10, c.label + " " + std::to_string(count) +
                                  " orderings, gap " + sci(gap));
  }
  return out;
}

std::vector<std::vector<double>> run_sweep(const std::string& scenario,
                                           const fs::path& out_dir) {
  const Scenario s =
      load_scenario((fs::path(HYBRIDSENS_SCENARIOS) / scenario).string());
  cmd_sweep(s, out_dir.string());
  std::ifstream in(out_dir / "sweep.csv");
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> r;
    std::istringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) r.push_back(std::stod(f));
    rows.push_back(r);
  }
  return rows;
}

Line criterion4() {
  Line out;
  const fs::path dir = fs::temp_directory_path() / "hybridsens_acceptance";
  // Columns: value, q, v, outcome, word_id.
  const auto rigid = run_sweep("rigid_trot_sweep.json", dir / "rigid");
  const auto soft = run_sweep("soft_trot_sweep.json", dir / "soft");
  if (rigid.size() != 201 || soft.size() != 201) {
    out.require(false, "sweeps must have 201 rows");
    return out;
  }
  const std::size_t mid = 100;
  auto outcome = [](const std::vector<double>& r) { return r[r.size() - 2]; };
  out.require(rigid[mid][0] == 0.0 && soft[mid][0] == 0.0, "row 100 at 0");

  const double jump = std::abs(outcome(rigid[mid + 1]) - outcome(rigid[mid - 1]));
  double adjacent = 0.0;
  for (std::size_t i = 0; i + 1 < rigid.size(); ++i) {
    if (i + 1 == mid || i == mid) continue;
    adjacent = std::max(adjacent,
                        std::abs(outcome(rigid[i + 1]) - outcome(rigid[i])));
  }
  out.require(jump > 10.0 * adjacent,
              "rigid jump " + sci(jump) + " vs adjacent " + sci(adjacent) +
                  " (ratio " + fmt("%.1f", jump / adjacent) + ")");

  const double h = soft[mid + 1][0] - soft[mid][0];
  const double right = (outcome(soft[mid + 1]) - outcome(soft[mid])) / h;
  const double left = (outcome(soft[mid]) - outcome(soft[mid - 1])) / h;
  const double rel = std::abs(right - left) /
                     std::max(std::abs(right), std::abs(left));
  out.require(rel <= 1e-3, "soft one-sided quotients " + sci(left) + ", " +
                               sci(right) + " rel " + sci(rel));
  double soft_adjacent = 0.0;
  double soft_mid = 0.0;
  for (std::size_t i = 0; i + 1 < soft.size(); ++i) {
    const double d = std::abs(outcome(soft[i + 1]) - outcome(soft[i]));
    if (i + 1 == mid || i == mid) {
      soft_mid = std::max(soft_mid, d);
    } else {
      soft_adjacent = std::max(soft_adjacent, d);
    }
  }
  out.require(soft_mid <= 1.5 * soft_adjacent,
              "soft step at 0 " + sci(soft_mid) + " vs elsewhere " +
                  sci(soft_adjacent));
  std::error_code ec;
  fs::remove_all(dir, ec);
  return out;
}

Line criterion5() {
  Line out;
  const ZooEntry e = ceiling_mass();
  const SolverConfig cfg;
  bool grazed = false;
  try {
    simulate(e.model, e.preset("graze").make(0.0), 2.0, cfg);
  } catch (const GrazingDetected&) {
    grazed = true;
  }
  out.require(grazed, "tangent launch raises GrazingDetected");

  // d(impact time)/d v0 against the overshoot.
  std::vector<double> x, y;
  for (double delta : {1e-2, 1e-4, 1e-6}) {
    const Trajectory tr =
        simulate(e.model, e.preset("launch").make(delta), 2.0, cfg);
    const RowVector g = event_time_gradient(e.model, tr, 0, cfg);
    const double v0 = tr.samples.front().v(0);
    const double exact = 1.0 - v0 / std::sqrt(v0 * v0 - 1.0);
    out.require(std::abs(g(1) - exact) <= 1e-6 * std::abs(exact),
                "delta " + sci(delta) + " dtau/dv0 " + sci(g(1)));
    x.push_back(std::log(delta));
    y.push_back(std::log(std::abs(g(1))));
  }
  const double xm = (x[0] + x[1] + x[2]) / 3.0;
  const double ym = (y[0] + y[1] + y[2]) / 3.0;
  double sxy = 0.0, sxx = 0.0;
  for (int i = 0; i < 3; ++i) {
    sxy += (x[i] - xm) * (y[i] - ym);
    sxx += (x[i] - xm) * (x[i] - xm);
  }
  const double slope = sxy / sxx;
  out.require(std::abs(slope + 0.5) <= 0.05, "log-log slope " + fmt("%.4f", slope));
  return out;
}

Line criterion6() {
  Line out;
  const ModelSpec m = bouncing_ball().model;
  const State s0 = bouncing_ball().preset("drop").make(1.0);
  const double exact = std::sqrt(2.0);
  {
    const SolverConfig cfg;
    const double t = simulate(m, s0, 2.0, cfg).word.events.at(0).t;
    out.require(std::abs(t - exact) <= cfg.tol_event,
                "default error " + sci(std::abs(t - exact)));
  }
  SolverConfig cfg;
  cfg.newton_polish = false;
  double prev = std::numeric_limits<double>::infinity();
  bool monotone = true;
  bool bounded = true;
  double first = 0.0;
  double last = 0.0;
  int halvings = 0;
  for (double tol = 1e-3; tol >= 1e-12; tol *= 0.5) {
    cfg.tol_event = tol;
    cfg.tol_cluster = std::max(1e-9, tol);
    // A coarse event time leaves the held constraint off zero by |v| tol.
    cfg.tol_a = std::max(1e-8, 2.0 * tol);
    const double err =
        std::abs(simulate(m, s0, 2.0, cfg).word.events.at(0).t - exact);
    monotone = monotone && err <= prev;
    bounded = bounded && err <= tol;
    if (halvings == 0) first = err;
    prev = last = err;
    ++halvings;
  }
  out.require(monotone, std::to_string(halvings) + " halvings, non-increasing");
  out.require(bounded, "error within tol_event at each step");
  out.require(last <= 1e-12 && last < first,
              "error " + sci(first) + " -> " + sci(last));
  return out;
}

// Xi for a deactivation taken as a crossing of lambda_j = 0:
// I + (F+ - F-) Dh / (Dh F-), with Dh the gradient of lambda_j.
Matrix lambda_guard_saltation(const ModelSpec& m, const Event& ev, int j) {
  const int d = m.d;
  const Vector z = ev.pre.stacked();
  const ContactMode before = ev.pre.mode;
  const ContactMode after = ev.post.mode;
  const std::vector<int> idx = before.indices();
  const auto slot = std::find(idx.begin(), idx.end(), j) - idx.begin();
  auto lambda = [&](const Vector& zz) {
    return contact_force(m, State::from_stacked(0.0, zz, before), before)(slot);
  };
  RowVector Dh(2 * d);
  for (int k = 0; k < 2 * d; ++k) {
    const double h = 1e-6 * (1.0 + std::abs(z(k)));
    Vector zp = z, zm = z;
    zp(k) += h;
    zm(k) -= h;
    Dh(k) = (lambda(zp) - lambda(zm)) / (2.0 * h);
  }
  const Vector Fm = vector_field(m, z, before);
  const Vector Fp = vector_field(m, z, after);
  return Matrix::Identity(2 * d, 2 * d) + (Fp - Fm) * Dh / Dh.dot(Fm);
}

Line criterion7() {
  Line out;
  {
    const ModelSpec m = bouncing_ball({{"gamma", 1.0}}).model;
    const Trajectory tr = simulate(m, bouncing_ball().preset("drop").make(1.0),
                                   13.5, SolverConfig{});
    double drift = 0.0;
    auto energy = [](const State& s) { return s.q(0) + 0.5 * s.v(0) * s.v(0); };
    for (const State& s : tr.samples) {
      drift = std::max(drift, std::abs(energy(s) - 1.0));
    }
    drift = std::max(drift, std::abs(energy(tr.terminal) - 1.0));
    out.require(tr.word.events.size() >= 5 && drift < 1e-8,
                std::to_string(tr.word.events.size()) + " bounces, drift " +
                    sci(drift));
  }
  {
    int impacts = 0;
    bool dissipates = true;
    auto check = [&](const ZooEntry& e, const State& s0, double T) {
      const Trajectory tr = simulate(e.model, s0, T, SolverConfig{});
      for (const Event& ev : tr.word.events) {
        if (ev.reset_set.empty()) continue;
        auto ke = [&](const State& s) {
          return 0.5 * s.v.dot(e.model.mass(s.q) * s.v);
        };
        ++impacts;
        dissipates = dissipates && ke(ev.post) < ke(ev.pre);
      }
    };
    check(bouncing_ball(), bouncing_ball().preset("drop").make(1.0), 2.0);
    const ZooEntry pair = decoupled_pair();
    check(pair, pair.preset("drop").make(0.01), 2.0);
    const ZooEntry rigid = rigid_trot();
    check(rigid, rigid.preset("drop").make(0.05), 1.6);
    const ZooEntry soft = soft_trot();
    check(soft, soft.preset("drop").make(0.05), 1.2);
    out.require(impacts >= 6 && dissipates,
                std::to_string(impacts) + " plastic impacts all dissipate");
  }
  {
    const ZooEntry e = soft_trot();
    const SolverConfig cfg;
    const Trajectory tr = simulate(e.model, e.preset("hop").make(0.0), 1.0, cfg);
    const SensitivityResult r = trajectory_derivative(e.model, tr, cfg);
    std::vector<SaltationMatrix> events = r.per_event;
    int deactivations = 0;
    for (std::size_t k = 0; k < tr.word.events.size(); ++k) {
      const Event& ev = tr.word.events[k];
      if (ev.kind != EventKind::kDeactivation) continue;
      for (int j : ev.deactivated.indices()) {
        events[k].xi = lambda_guard_saltation(e.model, ev, j) * events[k].xi;
        ++deactivations;
      }
    }
    Matrix D = r.per_mode.front();
    for (std::size_t s = 1; s < r.per_mode.size(); ++s) {
      D = r.per_mode[s] * events[s - 1].xi * D;
    }
    const double diff = max_abs(D - r.d_phi) / (1.0 + max_abs(r.d_phi));
    out.require(deactivations >= 1 && diff <= 1e-10,
                std::to_string(deactivations) + " deactivations, D_phi change " +
                    sci(diff));
  }
  return out;
}

Line criterion8() {
  Line out;
  const SolverConfig cfg;
  for (const Params& p :
       {Params{{"gamma2", 0.5}},
        Params{{"limbs", 3}, {"body_stiffness", 4.0}, {"gamma1", 0.2},
               {"gamma3", 0.9}},
        Params{{"limbs", 4}, {"body_stiffness", 2.0}, {"gamma2", 0.6}}}) {
    const ZooEntry e = decoupled_pair(p);
    const Trajectory tr = simulate(e.model, e.preset("drop").make(0.0), 2.0, cfg);
    const Event& ev = tr.word.events.at(0);
    const int n = ev.activated.size();
    const SaltationMatrix base = saltation_event(e.model, ev, cfg);
    double cross = 0.0;
    for (std::size_t a = 0; a < base.s_terms.size(); ++a) {
      for (std::size_t b = 0; b < base.s_terms.size(); ++b) {
        if (a != b) {
          cross = std::max(cross, max_abs(base.s_terms[a] * base.s_terms[b]));
        }
      }
    }
    // Denominator of each constraint across every ordering.
    std::map<int, std::pair<double, double>> range;
    for (const std::vector<int>& ord : candidate_orderings(ev.activated)) {
      const SaltationMatrix s = saltation_event(e.model, ev, cfg, ord);
      for (std::size_t l = 0; l < ord.size(); ++l) {
        auto [it, fresh] = range.try_emplace(
            ord[l], s.denominators[l], s.denominators[l]);
        if (!fresh) {
          it->second.first = std::min(it->second.first, s.denominators[l]);
          it->second.second = std::max(it->second.second, s.denominators[l]);
        }
      }
    }
    double spread = 0.0;
    for (const auto& [j, mm] : range) {
      spread = std::max(spread, mm.second - mm.first);
    }
    out.require(n >= 2 && cross <= 1e-12 && spread <= 1e-12,
                std::to_string(n) + " limbs: cross " + sci(cross) +
                    ", denominator spread " + sci(spread));
  }
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Line()>>> criteria = {
      {"ball saltation", criterion1},
      {"differentiable across impact orderings", criterion2},
      {"product form equals order-free form", criterion3},
      {"rigid jump, soft continuity", criterion4},
      {"grazing and square-root sensitivity", criterion5},
      {"event-time accuracy", criterion6},
      {"energy, dissipation, deactivation neutrality", criterion7},
      {"cross terms and denominators", criterion8},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Line line;
    try {
      line = criteria[i].second();
    } catch (const std::exception& e) {
      line.pass = false;
      line.detail = std::string("exception: ") + e.what();
    }
    if (!line.pass) ++failed;
    std::printf("criterion %zu %s: %s | %s\n", i + 1,
                line.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                line.detail.c_str());
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed;
}
