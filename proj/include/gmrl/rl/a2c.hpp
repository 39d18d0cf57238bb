#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "gmrl/env/robot_cell.hpp"
#include "gmrl/gm_optimizer.hpp"
#include "gmrl/nn.hpp"
#include "gmrl/random.hpp"
#include "gmrl/rl/policy.hpp"
#include "gmrl/rl/rollout.hpp"

namespace gmrl::rl {

struct A2cConfig {
  std::size_t n_step = 10;
  double gamma = 0.99;
  double entropy_coef = 0.01;
  double value_coef = 0.5;

  void validate() const {
    if (n_step < 1) throw ConfigError("a2c.n_step", "must be at least 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("a2c.gamma", "must lie in [0, 1]");
  }
};

struct LossStats {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
};

/// Advantage actor-critic loss for a categorical policy on a shared-trunk
/// network:
///   mean(-log pi(a|s) * A) - entropy_coef * mean(H) + value_coef * mean((R - V)^2)
/// Advantages are constants. With `accumulate` set, zeroes the network's
/// gradients and backpropagates the loss through both heads.
inline LossStats a2c_loss(const RolloutBuffer& buf, std::span<const double> advantages,
                          std::span<const double> returns, Network& net, const A2cConfig& cfg,
                          bool accumulate) {
  buf.check_consistent();
  const std::size_t n = buf.size();
  if (n == 0) throw StateError("a2c_loss: empty buffer");
  if (advantages.size() != n || returns.size() != n) {
    throw DimensionError("a2c_loss: advantage/return length differs from buffer");
  }
  const Matrix x = buf.state_matrix();
  const Matrix probs = accumulate ? net.forward(x, kActorHead) : net.predict(x, kActorHead);
  const Matrix values = accumulate ? net.forward(x, kCriticHead) : net.predict(x, kCriticHead);
  const double inv_n = 1.0 / static_cast<double>(n);

  LossStats stats;
  Matrix d_probs(probs.rows(), probs.cols());
  Matrix d_values(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = static_cast<std::size_t>(buf.actions[i][0]);
    const auto p = probs.row(i);
    const double pa = std::max(p[a], std::numeric_limits<double>::min());
    stats.policy += -safe_log(pa) * advantages[i] * inv_n;
    stats.entropy += categorical_entropy(p) * inv_n;
    const double err = values(i, 0) - returns[i];
    stats.value += cfg.value_coef * err * err * inv_n;

    d_probs(i, a) += -advantages[i] / pa * inv_n;
    for (std::size_t j = 0; j < p.size(); ++j) {
      d_probs(i, j) += cfg.entropy_coef * (safe_log(p[j]) + 1.0) * inv_n;
    }
    d_values(i, 0) = 2.0 * cfg.value_coef * err * inv_n;
  }
  stats.total = stats.policy - cfg.entropy_coef * stats.entropy + stats.value;

  if (accumulate) {
    net.zero_grad();
    net.backward(d_probs, kActorHead);
    net.backward(d_values, kCriticHead);
  }
  return stats;
}

/// Computes returns and advantages for the buffer and accumulates the loss
/// gradients into the network.
inline const GradientSet& a2c_loss_grads(const RolloutBuffer& buf, Network& net, const A2cConfig& cfg,
                                         LossStats* stats = nullptr) {
  const auto targets = a2c_returns(buf, cfg.gamma);
  const LossStats s = a2c_loss(buf, targets.advantages, targets.returns, net, cfg, true);
  if (stats) *stats = s;
  return net.gradients();
}

/// One independent learner: its own network, optimizer, buffer and sampling stream.
struct A2cAgent {
  Network net;
  GmOptimizer optimizer;
  RolloutBuffer buffer;
  Rng rng;
};

struct A2cUpdate {
  GmMetrics metrics;
  LossStats loss;
};

/// Bootstraps from `next_obs` unless the episode ended, applies one optimizer
/// step and clears the buffer.
inline A2cUpdate a2c_update(A2cAgent& agent, std::span<const double> next_obs, bool done,
                            const A2cConfig& cfg) {
  if (agent.buffer.empty()) throw StateError("a2c_update: empty buffer");
  agent.buffer.bootstrap_value =
      done ? 0.0 : agent.net.predict(Matrix::row_vector(next_obs), kCriticHead)(0, 0);
  A2cUpdate out;
  a2c_loss_grads(agent.buffer, agent.net, cfg, &out.loss);
  if (!std::isfinite(out.loss.total)) throw NumericError("a2c_update: non-finite loss");
  const auto params = agent.net.parameters();
  out.metrics = agent.optimizer.step(params);
  agent.buffer.clear();
  return out;
}

struct JointTransition {
  std::vector<double> observation;  // shared observation both agents acted on
  std::array<int, 2> actions{};
  env::StepResult result;
};

/// Both agents act on the same observation, the cell applies robot 1 then
/// robot 2, and each agent records the shared reward with its own log-prob.
inline JointTransition multi_agent_a2c_step(env::RobotCell& cell, std::span<A2cAgent, 2> agents,
                                            const std::vector<double>& observation) {
  JointTransition tr;
  tr.observation = observation;
  std::array<PolicyOutput, 2> outs;
  for (std::size_t k = 0; k < 2; ++k) {
    outs[k] = act(agents[k].net, observation, PolicyKind::categorical, agents[k].rng);
    tr.actions[k] = static_cast<int>(outs[k].action[0]);
  }
  tr.result = cell.step(tr.actions[0], tr.actions[1]);
  for (std::size_t k = 0; k < 2; ++k) {
    agents[k].buffer.add(observation, outs[k].action, tr.result.reward, outs[k].value,
                         outs[k].log_prob, tr.result.done);
    agents[k].optimizer.observe_reward(tr.result.reward);
  }
  return tr;
}

}  // namespace gmrl::rl
