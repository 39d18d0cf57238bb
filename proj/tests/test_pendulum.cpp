#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gmrl/env/pendulum.hpp"

using namespace gmrl;
using namespace gmrl::env;

TEST(Pendulum, UprightAtRestHasZeroReward) {
  Pendulum p;
  p.set_state({0.0, 0.0});
  const auto r = p.step(0.0);
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_FALSE(r.done);
}

TEST(Pendulum, HangingDownReward) {
  Pendulum p;
  p.set_state({std::numbers::pi, 0.0});
  EXPECT_NEAR(p.step(0.0).reward, -9.8696, 1e-4);
}

TEST(Pendulum, TorqueIsClippedInReward) {
  Pendulum a, b;
  a.set_state({0.0, 0.0});
  b.set_state({0.0, 0.0});
  EXPECT_EQ(a.step(50.0).reward, -0.001 * 4.0);
  b.step(2.0);
  EXPECT_EQ(a.state().theta_dot, b.state().theta_dot);
}

TEST(Pendulum, ObservationOnUnitCircleAndBounded) {
  Pendulum p;
  Rng rng(4);
  p.reset(rng);
  const double lo = -(std::numbers::pi * std::numbers::pi + 0.1 * 64.0 + 0.001 * 4.0);
  for (int t = 0; t < 199; ++t) {
    const auto r = p.step(rng.uniform(-3.0, 3.0));
    EXPECT_NEAR(r.observation[0] * r.observation[0] + r.observation[1] * r.observation[1], 1.0, 1e-12);
    EXPECT_LE(std::abs(p.state().theta_dot), 8.0);
    EXPECT_GT(p.state().theta, -std::numbers::pi);
    EXPECT_LE(p.state().theta, std::numbers::pi);
    EXPECT_LE(r.reward, 0.0);
    EXPECT_GE(r.reward, lo);
    EXPECT_FALSE(r.done);
  }
  EXPECT_TRUE(p.step(0.0).done);
}

TEST(Pendulum, DeterministicGivenStateAndActions) {
  Pendulum a, b;
  a.set_state({1.0, -0.5});
  b.set_state({1.0, -0.5});
  for (int t = 0; t < 50; ++t) {
    const double u = std::sin(0.3 * t);
    const auto x = a.step(u), y = b.step(u);
    EXPECT_EQ(x.observation, y.observation);
    EXPECT_EQ(x.reward, y.reward);
  }
}

TEST(Pendulum, VelocityClampedOnSetState) {
  Pendulum p;
  p.set_state({0.0, 100.0});
  EXPECT_EQ(p.state().theta_dot, 8.0);
}

TEST(Pendulum, SemiImplicitEulerStep) {
  Pendulum p;
  p.set_state({0.5, 0.2});
  p.step(1.0);
  const double dot = 0.2 + (3.0 * 10.0 / 2.0 * std::sin(0.5) + 3.0 * 1.0) * 0.05;
  EXPECT_DOUBLE_EQ(p.state().theta_dot, dot);
  EXPECT_DOUBLE_EQ(p.state().theta, 0.5 + dot * 0.05);
}

TEST(WrapAngle, MapsIntoHalfOpenInterval) {
  constexpr double pi = std::numbers::pi;
  EXPECT_DOUBLE_EQ(wrap_angle(pi), pi);
  EXPECT_DOUBLE_EQ(wrap_angle(-pi), pi);
  EXPECT_NEAR(wrap_angle(3 * pi / 2), -pi / 2, 1e-12);
  EXPECT_NEAR(wrap_angle(0.25 + 4 * pi), 0.25, 1e-12);
  EXPECT_EQ(wrap_angle(0.0), 0.0);
}
