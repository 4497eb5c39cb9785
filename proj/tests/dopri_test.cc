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

#include <cmath>

#include <gtest/gtest.h>

#include "hybridsens/dopri.hpp"

namespace hybridsens {
namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

TEST(DopriTest, ExponentialDecay) {
  SolverConfig c;
  AdaptiveStepper st([](const Vector& y) { return Vector(-y); }, scalar(1.0),
                     0.0, c);
  while (st.t() < 1.0) st.advance(1.0);
  EXPECT_EQ(st.t(), 1.0);
  EXPECT_NEAR(st.y()(0), std::exp(-1.0), 1e-10);
}

TEST(DopriTest, HarmonicOscillatorKeepsEnergy) {
  SolverConfig c;
  AdaptiveStepper st(
      [](const Vector& y) { return Vector((Vector(2) << y(1), -y(0)).finished()); },
      (Vector(2) << 1.0, 0.0).finished(), 0.0, c);
  const double T = 20.0;
  while (st.t() < T) st.advance(T);
  EXPECT_NEAR(st.y()(0), std::cos(T), 1e-8);
  EXPECT_NEAR(st.y()(1), -std::sin(T), 1e-8);
}

// The tableau integrates polynomials of degree <= 4 exactly.
TEST(DopriTest, SingleStepExactForQuartic) {
  const Rhs f = [](const Vector& y) {
    const double t = y(1);
    return Vector((Vector(2) << 4.0 * t * t * t, 1.0).finished());
  };
  const Vector y0 = (Vector(2) << 0.0, 0.5).finished();
  const dopri::StepResult r = dopri::step(f, y0, f(y0), 0.7);
  EXPECT_NEAR(r.y(0), std::pow(1.2, 4) - std::pow(0.5, 4), 1e-14);
  EXPECT_NEAR(r.y(1), 1.2, 1e-15);
}

TEST(DopriTest, EvaluateInsideLastStep) {
  SolverConfig c;
  c.h_initial = 0.3;
  c.h_max = 0.3;
  AdaptiveStepper st([](const Vector& y) { return Vector(-y); }, scalar(1.0),
                     0.0, c);
  st.advance(10.0);
  const double mid = 0.5 * (st.t_prev() + st.t());
  EXPECT_NEAR(st.evaluate(mid)(0), std::exp(-mid), 1e-10);
  EXPECT_EQ(st.evaluate(st.t_prev())(0), st.y_prev()(0));
}

TEST(DopriTest, ErrorControlCanIgnoreTrailingComponents) {
  SolverConfig c;
  c.rtol = 1e-6;
  c.atol = 1e-8;
  // The second component oscillates violently but is excluded from control.
  const Rhs f = [](const Vector& y) {
    return Vector((Vector(2) << -y(0), 1e4 * std::cos(1e3 * y(1))).finished());
  };
  AdaptiveStepper controlled(f, (Vector(2) << 1.0, 0.0).finished(), 0.0, c, 1);
  AdaptiveStepper full(f, (Vector(2) << 1.0, 0.0).finished(), 0.0, c);
  while (controlled.t() < 1.0) controlled.advance(1.0);
  while (full.t() < 1.0) full.advance(1.0);
  EXPECT_LT(controlled.steps(), full.steps());
}

TEST(DopriTest, BlowUpUnderflows) {
  SolverConfig c;
  AdaptiveStepper st([](const Vector& y) { return Vector(y.cwiseProduct(y)); },
                     scalar(1.0), 0.0, c);
  EXPECT_THROW(
      {
        while (st.t() < 2.0) st.advance(2.0);
      },
      StepUnderflow);
}

}  // namespace
}  // namespace hybridsens
