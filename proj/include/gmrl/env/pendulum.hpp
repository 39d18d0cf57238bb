#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "gmrl/random.hpp"

namespace gmrl::env {

struct PendulumParams {
  double mass = 1.0;
  double length = 1.0;
  double gravity = 10.0;
  double dt = 0.05;
  double max_torque = 2.0;
  double max_speed = 8.0;
  int horizon = 200;
};

struct PendulumState {
  double theta = 0.0;      // 0 is upright
  double theta_dot = 0.0;
};

struct PendulumStep {
  std::array<double, 3> observation{};
  double reward = 0.0;
  bool done = false;
};

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double x) {
  constexpr double pi = std::numbers::pi;
  double y = std::fmod(x + pi, 2.0 * pi);
  if (y <= 0.0) y += 2.0 * pi;
  return y - pi;
}

/// Torque-limited pendulum swing-up.
class Pendulum {
 public:
  Pendulum() = default;
  explicit Pendulum(PendulumParams p) : params_(p) {}

  const PendulumParams& params() const noexcept { return params_; }
  const PendulumState& state() const noexcept { return state_; }
  int steps() const noexcept { return steps_; }

  void set_state(PendulumState s) {
    state_ = {wrap_angle(s.theta), std::clamp(s.theta_dot, -params_.max_speed, params_.max_speed)};
    steps_ = 0;
  }

  /// Random start: theta uniform in (-pi, pi], theta_dot uniform in [-1, 1].
  std::array<double, 3> reset(Rng& rng) {
    set_state({rng.uniform(-std::numbers::pi, std::numbers::pi), rng.uniform(-1.0, 1.0)});
    return observe();
  }

  std::array<double, 3> observe() const {
    return {std::cos(state_.theta), std::sin(state_.theta), state_.theta_dot};
  }

  PendulumStep step(double torque) {
    const auto& p = params_;
    const double u = std::clamp(torque, -p.max_torque, p.max_torque);
    const double th = state_.theta;
    PendulumStep out;
    out.reward = -(th * th + 0.1 * state_.theta_dot * state_.theta_dot + 0.001 * u * u);

    // Semi-implicit Euler: velocity first, then position with the new velocity.
    double new_dot = state_.theta_dot +
                     (3.0 * p.gravity / (2.0 * p.length) * std::sin(th) +
                      3.0 / (p.mass * p.length * p.length) * u) * p.dt;
    new_dot = std::clamp(new_dot, -p.max_speed, p.max_speed);
    state_.theta = wrap_angle(th + new_dot * p.dt);
    state_.theta_dot = new_dot;
    ++steps_;
    out.done = steps_ >= p.horizon;
    out.observation = observe();
    return out;
  }

 private:
  PendulumParams params_{};
  PendulumState state_{};
  int steps_ = 0;
};

}  // namespace gmrl::env
