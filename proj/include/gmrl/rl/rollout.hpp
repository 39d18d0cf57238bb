#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "gmrl/errors.hpp"
#include "gmrl/tensor.hpp"

namespace gmrl::rl {

/// Trajectory storage for one update. Discrete actions are stored as a
/// single-element vector holding the action index.
struct RolloutBuffer {
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> actions;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> log_probs;
  std::vector<bool> terminals;
  double bootstrap_value = 0.0;

  std::size_t size() const noexcept { return rewards.size(); }
  bool empty() const noexcept { return rewards.empty(); }

  void add(std::vector<double> state, std::vector<double> action, double reward, double value,
           double log_prob, bool terminal) {
    states.push_back(std::move(state));
    actions.push_back(std::move(action));
    rewards.push_back(reward);
    values.push_back(value);
    log_probs.push_back(log_prob);
    terminals.push_back(terminal);
  }

  void clear() {
    states.clear();
    actions.clear();
    rewards.clear();
    values.clear();
    log_probs.clear();
    terminals.clear();
    bootstrap_value = 0.0;
  }

  void check_consistent() const {
    const std::size_t n = rewards.size();
    if (states.size() != n || actions.size() != n || values.size() != n || log_probs.size() != n ||
        terminals.size() != n) {
      throw DimensionError("RolloutBuffer: field lengths differ");
    }
  }

  Matrix state_matrix() const { return gather_states(nullptr); }

  /// Rows of `states` selected by `indices` (all rows when null).
  Matrix gather_states(const std::vector<std::size_t>* indices) const {
    const std::size_t n = indices ? indices->size() : states.size();
    if (n == 0) return {};
    const std::size_t dim = states.front().size();
    Matrix m(n, dim);
    for (std::size_t r = 0; r < n; ++r) {
      const auto& s = states[indices ? (*indices)[r] : r];
      if (s.size() != dim) throw DimensionError("RolloutBuffer: ragged states");
      for (std::size_t c = 0; c < dim; ++c) m(r, c) = s[c];
    }
    return m;
  }
};

struct AdvantageTargets {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// n-step bootstrapped returns R_t = r_t + gamma * R_{t+1} (reset at terminals,
/// seeded with bootstrap_value) and advantages A_t = R_t - V(s_t).
inline AdvantageTargets a2c_returns(const RolloutBuffer& buf, double gamma) {
  buf.check_consistent();
  if (buf.empty()) throw StateError("a2c_returns: empty buffer");
  const std::size_t n = buf.size();
  AdvantageTargets out{std::vector<double>(n), std::vector<double>(n)};
  double running = buf.bootstrap_value;
  for (std::size_t t = n; t-- > 0;) {
    running = buf.rewards[t] + (buf.terminals[t] ? 0.0 : gamma * running);
    out.returns[t] = running;
    out.advantages[t] = running - buf.values[t];
  }
  return out;
}

/// Generalized advantage estimation. V(s_T) is taken from bootstrap_value.
inline AdvantageTargets ppo_gae(const RolloutBuffer& buf, double gamma, double gae_lambda) {
  buf.check_consistent();
  if (buf.empty()) throw StateError("ppo_gae: empty buffer");
  const std::size_t n = buf.size();
  AdvantageTargets out{std::vector<double>(n), std::vector<double>(n)};
  double next_value = buf.bootstrap_value;
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double live = buf.terminals[t] ? 0.0 : 1.0;
    const double delta = buf.rewards[t] + gamma * next_value * live - buf.values[t];
    running = delta + gamma * gae_lambda * live * running;
    out.advantages[t] = running;
    out.returns[t] = running + buf.values[t];
    next_value = buf.values[t];
  }
  return out;
}

}  // namespace gmrl::rl
