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
#include <random>

#include <gtest/gtest.h>

#include "hybridsens/model.hpp"
#include "test_models.hpp"

namespace hybridsens {
namespace {

using testing::make_state;

TEST(ContactModeTest, SetOperations) {
  const ContactMode a = ContactMode::of({0, 2});
  const ContactMode b = ContactMode::of({2, 3});
  EXPECT_EQ(a.bits(), 0b101u);
  EXPECT_EQ(a.size(), 2);
  EXPECT_EQ((a | b).to_string(), "{1,3,4}");
  EXPECT_EQ((a & b).to_string(), "{3}");
  EXPECT_EQ((a - b).to_string(), "{1}");
  EXPECT_EQ(ContactMode{}.to_string(), "{}");
  EXPECT_TRUE(ContactMode::single(2).subset_of(a));
  EXPECT_FALSE(b.subset_of(a));
  EXPECT_EQ(ContactMode::full(3).bits(), 0b111u);
}

TEST(SolverConfigTest, RejectsNonPositiveTolerances) {
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  c.tol_a = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SolverConfig{};
  c.h_fd = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SolverConfig{};
  c.max_events = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(CoriolisTest, QuadraticMassScalar) {
  // c = -1/2 M'(q) v = -q v for M = q^2 + 1.
  const ModelSpec m = testing::quadratic_mass_1d();
  const Matrix c = coriolis(m, Vector::Constant(1, 2.0), Vector::Constant(1, 3.0));
  EXPECT_NEAR(c(0, 0), -6.0, 1e-8);
}

TEST(CoriolisTest, ConstantMassGivesZero) {
  ModelSpec m = testing::wedge_2d(0.0);
  const Matrix c = coriolis(m, Vector::Ones(2), Vector::Ones(2));
  EXPECT_LT(testing::max_abs(c), 1e-12);
}

// dM/dt + 2 c is skew-symmetric for the sign convention M qdd = f + c qd.
TEST(CoriolisTest, MassRatePlusTwiceCoriolisIsSkew) {
  const ModelSpec m = testing::curved_2d();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector q = Vector::NullaryExpr(2, [&] { return u(rng); });
    const Vector v = Vector::NullaryExpr(2, [&] { return u(rng); });
    const std::vector<Matrix> dM = mass_partials(m, q);
    Matrix Mdot = Matrix::Zero(2, 2);
    for (int k = 0; k < 2; ++k) Mdot += dM[static_cast<std::size_t>(k)] * v(k);
    const Matrix N = Mdot + 2.0 * coriolis(m, q, v);
    EXPECT_LT(testing::max_abs(N + N.transpose()), 1e-8);
  }
}

TEST(CoriolisTest, HintsMatchDifferences) {
  ModelSpec fd = testing::quadratic_mass_1d();
  ModelSpec hinted = fd;
  hinted.hints.mass_partials = [](const Vector& q) {
    return std::vector<Matrix>{Matrix::Constant(1, 1, 2.0 * q(0))};
  };
  const Vector q = Vector::Constant(1, -0.7);
  const Vector v = Vector::Constant(1, 1.3);
  EXPECT_NEAR(coriolis(fd, q, v)(0, 0), coriolis(hinted, q, v)(0, 0), 1e-8);
  EXPECT_DOUBLE_EQ(coriolis(hinted, q, v)(0, 0), 0.7 * 1.3);
}

TEST(MassTest, IndefiniteMassIsDegenerate) {
  ModelSpec m = testing::quadratic_mass_1d();
  m.mass = [](const Vector&) { return Matrix::Constant(1, 1, -1.0); };
  EXPECT_THROW(factor_mass(m, Vector::Zero(1)), DegenerateMass);
}

TEST(GuardTest, GradientHasZeroVelocityBlock) {
  const ModelSpec m = testing::curved_2d();
  const State s = make_state({0.3, -0.4}, {1.0, 2.0});
  const GuardValue g = guard(m, 0, s);
  EXPECT_DOUBLE_EQ(g.value, 1.0 - 0.25);
  ASSERT_EQ(g.gradient.size(), 4);
  EXPECT_DOUBLE_EQ(g.gradient(0), -0.6);
  EXPECT_DOUBLE_EQ(g.gradient(1), 0.8);
  EXPECT_EQ(g.gradient(2), 0.0);
  EXPECT_EQ(g.gradient(3), 0.0);
  EXPECT_THROW(guard(m, 5, s), ConfigError);
}

TEST(ActiveSetTest, ToleranceAndInfeasibility) {
  const ModelSpec m = testing::wedge_2d(0.0);
  Vector q(2);
  q << 5e-9, 1.0;
  EXPECT_EQ(active_set(m, q, 1e-8).to_string(), "{1}");
  q << 0.0, 0.0;
  EXPECT_EQ(active_set(m, q, 1e-8).to_string(), "{1,2}");
  q << -1e-6, 2.0;
  EXPECT_THROW(active_set(m, q, 1e-8), Infeasible);
}

TEST(ConstraintTest, JacobianRowsFollowMode) {
  const ModelSpec m = testing::wedge_2d(0.0);
  const Matrix A = constraint_jacobian(m, Vector::Zero(2), ContactMode::of({1}));
  ASSERT_EQ(A.rows(), 1);
  EXPECT_DOUBLE_EQ(A(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(A(0, 1), 1.0);
  const Vector a = constraint_values(m, (Vector(2) << 0.5, 0.25).finished());
  EXPECT_DOUBLE_EQ(a(0), 0.5);
  EXPECT_DOUBLE_EQ(a(1), 0.75);
}

TEST(ConstraintTest, CurvatureOfDiscByDifferences) {
  // v^T Hess(1 - |q|^2) v = -2 |v|^2
  const ModelSpec m = testing::curved_2d();
  const Vector q = (Vector(2) << 0.2, 0.5).finished();
  const Vector v = (Vector(2) << -1.5, 0.25).finished();
  EXPECT_NEAR(constraint_curvature(m, 0, q, v), -2.0 * v.squaredNorm(), 1e-7);
  EXPECT_NEAR(constraint_curvature(m, 1, q, v), 0.0, 1e-9);
}

TEST(ModelSpecTest, WellFormedness) {
  ModelSpec m = testing::wedge_2d(0.0);
  EXPECT_NO_THROW(m.require_well_formed());
  m.restitution = nullptr;
  EXPECT_THROW(m.require_well_formed(), ConfigError);
  m = testing::wedge_2d(0.0);
  m.d = 0;
  EXPECT_THROW(m.require_well_formed(), ConfigError);
}

}  // namespace
}  // namespace hybridsens
