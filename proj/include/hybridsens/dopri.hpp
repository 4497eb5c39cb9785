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

// Adaptive Dormand-Prince 5(4) integrator for autonomous systems.
//
// States between accepted steps are evaluated by re-taking a single step of the
// required length from the last accepted point, which keeps interpolated values
// at the full fifth-order local accuracy.

#ifndef HYBRIDSENS_DOPRI_HPP_
#define HYBRIDSENS_DOPRI_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <utility>

#include "hybridsens/model.hpp"

namespace hybridsens {

using Rhs = std::function<Vector(const Vector&)>;

namespace dopri {

inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                        c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                        a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                        e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;

struct StepResult {
  Vector y;
  Vector k_end;  // f(y), reused as the first stage of the next step
  Vector error;
};

inline StepResult step(const Rhs& f, const Vector& y, const Vector& k1,
                       double h) {
  const Vector k2 = f(y + h * (a21 * k1));
  const Vector k3 = f(y + h * (a31 * k1 + a32 * k2));
  const Vector k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
  const Vector k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  const Vector k6 =
      f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  StepResult r;
  r.y = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  r.k_end = f(r.y);
  r.error = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 +
                 e7 * r.k_end);
  return r;
}

}  // namespace dopri

class AdaptiveStepper {
 public:
  // Error control uses the first `error_dim` components only (all when < 0).
  AdaptiveStepper(Rhs f, Vector y0, double t0, const SolverConfig& config,
                  Eigen::Index error_dim = -1)
      : f_(std::move(f)),
        config_(config),
        t_(t0),
        y_(std::move(y0)),
        error_dim_(error_dim < 0 ? y_.size() : error_dim),
        h_(config.h_initial) {
    k_ = f_(y_);
    t_prev_ = t_;
    y_prev_ = y_;
    k_prev_ = k_;
  }

  double t() const { return t_; }
  const Vector& y() const { return y_; }
  double t_prev() const { return t_prev_; }
  const Vector& y_prev() const { return y_prev_; }
  long steps() const { return steps_; }

  // Takes one accepted step, never past t_limit.
  void advance(double t_limit) {
    if (t_ >= t_limit) return;
    for (;;) {
      if (++steps_ > config_.max_steps) {
        throw StepUnderflow("exceeded max_steps");
      }
      double h = std::min(h_, config_.h_max);
      bool clipped = false;
      if (t_ + h >= t_limit) {
        h = t_limit - t_;
        clipped = true;
      }
      if (h < config_.h_min * std::max(1.0, std::abs(t_)) && !clipped) {
        std::ostringstream os;
        os << "step size " << h << " below h_min at t = " << t_;
        throw StepUnderflow(os.str());
      }
      dopri::StepResult r = dopri::step(f_, y_, k_, h);
      const double err = error_norm(y_, r.y, r.error);
      if (!std::isfinite(err)) {
        h_ = 0.2 * h;
        continue;
      }
      const double factor =
          err == 0.0 ? 5.0
                     : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      if (err <= 1.0) {
        t_prev_ = t_;
        y_prev_ = std::move(y_);
        k_prev_ = std::move(k_);
        t_ = clipped ? t_limit : t_ + h;
        y_ = std::move(r.y);
        k_ = std::move(r.k_end);
        // A clipped step says nothing about the natural step size.
        if (!clipped || factor < 1.0) h_ = h * factor;
        return;
      }
      h_ = h * std::max(factor, 0.2);
      if (h_ < config_.h_min * std::max(1.0, std::abs(t_))) {
        std::ostringstream os;
        os << "step size " << h_ << " below h_min at t = " << t_;
        throw StepUnderflow(os.str());
      }
    }
  }

  // State at t in [t_prev, t]: one step of length t - t_prev from the
  // previous accepted point.
  Vector evaluate(double t) const {
    if (t <= t_prev_) return y_prev_;
    if (t >= t_) return y_;
    return dopri::step(f_, y_prev_, k_prev_, t - t_prev_).y;
  }

  const Rhs& rhs() const { return f_; }

 private:
  double error_norm(const Vector& y0, const Vector& y1,
                    const Vector& err) const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < error_dim_; ++i) {
      const double scale =
          config_.atol +
          config_.rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
      const double e = err(i) / scale;
      acc += e * e;
    }
    return error_dim_ == 0 ? 0.0
                           : std::sqrt(acc / static_cast<double>(error_dim_));
  }

  Rhs f_;
  SolverConfig config_;
  double t_;
  Vector y_;
  Vector k_;
  double t_prev_;
  Vector y_prev_;
  Vector k_prev_;
  Eigen::Index error_dim_;
  double h_;
  long steps_ = 0;
};

}  // namespace hybridsens

#endif  // HYBRIDSENS_DOPRI_HPP_
