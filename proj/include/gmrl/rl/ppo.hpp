#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "gmrl/gm_optimizer.hpp"
#include "gmrl/nn.hpp"
#include "gmrl/random.hpp"
#include "gmrl/rl/policy.hpp"
#include "gmrl/rl/rollout.hpp"

namespace gmrl::rl {

struct PpoConfig {
  double clip = 0.2;
  std::size_t k_epochs = 4;
  std::size_t minibatch_size = 64;
  std::size_t rollout_steps = 2048;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;  // global norm clipping; <= 0 disables it
  bool normalize_advantages = true;
  PolicyKind policy_kind = PolicyKind::gaussian;

  void validate() const {
    if (!(clip > 0.0)) throw ConfigError("ppo.clip", "must be positive");
    if (k_epochs < 1) throw ConfigError("ppo.k_epochs", "must be at least 1");
    if (minibatch_size < 1) throw ConfigError("ppo.minibatch_size", "must be at least 1");
    if (rollout_steps < 1) throw ConfigError("ppo.rollout_steps", "must be at least 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("ppo.gamma", "must lie in [0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("ppo.gae_lambda", "must lie in [0, 1]");
  }
};

/// PPO learner: network with "actor"/"critic" heads plus, for gaussian
/// policies, a state-independent log standard deviation.
struct PpoAgent {
  Network net;
  Matrix log_std;       // 1 x action_dim, gaussian only
  Matrix log_std_grad;
  GmOptimizer optimizer;
  Rng rng;

  std::vector<ParamRef> parameters() {
    auto refs = net.parameters();
    if (!log_std.empty()) refs.push_back({"log_std", &log_std, &log_std_grad, ParamKind::free});
    return refs;
  }

  void zero_grad() {
    net.zero_grad();
    log_std_grad.fill(0.0);
  }
};

struct PpoLossStats {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
};

/// Clipped-surrogate loss on the rows `indices` of `buf`:
///   -min(r A, clip(r, 1-eps, 1+eps) A) + value_coef (V - target)^2 - entropy_coef H
/// averaged over the minibatch, with r = exp(log pi_new - log pi_old). With
/// `accumulate` set, gradients are zeroed and then accumulated into the agent.
inline PpoLossStats ppo_loss(PpoAgent& agent, const RolloutBuffer& buf,
                             std::span<const double> advantages, std::span<const double> targets,
                             const std::vector<std::size_t>& indices, const PpoConfig& cfg,
                             bool accumulate) {
  const std::size_t n = indices.size();
  if (n == 0) throw StateError("ppo_loss: empty minibatch");
  const Matrix x = buf.gather_states(&indices);
  Network& net = agent.net;
  const Matrix head = accumulate ? net.forward(x, kActorHead) : net.predict(x, kActorHead);
  const Matrix values = accumulate ? net.forward(x, kCriticHead) : net.predict(x, kCriticHead);
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool gaussian = cfg.policy_kind == PolicyKind::gaussian;
  if (gaussian && agent.log_std.size() != head.cols()) {
    throw DimensionError("ppo_loss: log_std does not match the action dimension");
  }

  PpoLossStats stats;
  Matrix d_head(head.rows(), head.cols());
  Matrix d_values(n, 1);
  Matrix d_log_std(1, head.cols());
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = indices[r];
    const auto out = head.row(r);
    const auto& action = buf.actions[i];
    double log_prob = 0.0;
    double entropy = 0.0;
    if (gaussian) {
      log_prob = gaussian_log_prob(out, agent.log_std.values(), action);
      entropy = gaussian_entropy(agent.log_std.values());
    } else {
      log_prob = safe_log(out[static_cast<std::size_t>(action[0])]);
      entropy = categorical_entropy(out);
    }
    const double ratio = std::exp(log_prob - buf.log_probs[i]);
    const double adv = advantages[i];
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    const double surr_raw = ratio * adv;
    const double surr_clip = clipped * adv;
    const bool raw_active = surr_raw <= surr_clip;
    stats.policy += -std::min(surr_raw, surr_clip) * inv_n;
    stats.entropy += entropy * inv_n;
    stats.mean_ratio += ratio * inv_n;
    if (!raw_active) stats.clip_fraction += inv_n;
    const double err = values(r, 0) - targets[i];
    stats.value += cfg.value_coef * err * err * inv_n;
    d_values(r, 0) = 2.0 * cfg.value_coef * err * inv_n;

    // dLoss/dlog_prob for this row
    const double d_logp = raw_active ? -adv * ratio * inv_n : 0.0;
    if (gaussian) {
      for (std::size_t j = 0; j < out.size(); ++j) {
        const double inv_var = std::exp(-2.0 * agent.log_std[j]);
        const double diff = action[j] - out[j];
        d_head(r, j) = d_logp * diff * inv_var;
        d_log_std[j] += d_logp * (diff * diff * inv_var - 1.0);
        d_log_std[j] += -cfg.entropy_coef * inv_n;
      }
    } else {
      const auto a = static_cast<std::size_t>(action[0]);
      const double pa = std::max(out[a], std::numeric_limits<double>::min());
      d_head(r, a) += d_logp / pa;
      for (std::size_t j = 0; j < out.size(); ++j) {
        d_head(r, j) += cfg.entropy_coef * (safe_log(out[j]) + 1.0) * inv_n;
      }
    }
  }
  stats.total = stats.policy + stats.value - cfg.entropy_coef * stats.entropy;

  if (accumulate) {
    agent.zero_grad();
    net.backward(d_head, kActorHead);
    net.backward(d_values, kCriticHead);
    if (gaussian) add_in_place(agent.log_std_grad, d_log_std);
  }
  return stats;
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
inline double clip_global_norm(std::span<const ParamRef> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.grad->values()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / (norm + 1e-6);
    for (const auto& p : params)
      for (double& g : p.grad->values()) g *= scale;
  }
  return norm;
}

inline void normalize_in_place(std::vector<double>& v) {
  if (v.size() < 2) return;
  const double n = static_cast<double>(v.size());
  const double mu = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double var = 0.0;
  for (double x : v) var += (x - mu) * (x - mu);
  const double sd = std::sqrt(var / n);
  for (double& x : v) x = (x - mu) / (sd + 1e-8);
}

struct PpoUpdateStats {
  GmMetrics metrics;       // abs_grad_sum averaged over minibatch steps; active/lambda from the last
  PpoLossStats last_loss;  // loss of the final minibatch
  double first_ratio = 0.0;  // mean ratio of the very first minibatch
  std::size_t steps = 0;
};

/// k_epochs passes of shuffled minibatches over a full buffer. Global norm
/// clipping is applied only for the wogm baseline; Gradient Monitoring
/// variants rely on their layer-wise masks instead.
inline PpoUpdateStats ppo_update(PpoAgent& agent, RolloutBuffer& buf, const PpoConfig& cfg,
                                 Rng& shuffle_rng) {
  buf.check_consistent();
  if (buf.empty()) throw StateError("ppo_update: empty buffer");
  auto targets = ppo_gae(buf, cfg.gamma, cfg.gae_lambda);
  std::vector<double> adv = targets.advantages;
  if (cfg.normalize_advantages) normalize_in_place(adv);

  const bool clip_norm = agent.optimizer.config().variant == GmVariant::wogm && cfg.max_grad_norm > 0.0;
  std::vector<std::size_t> order(buf.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  PpoUpdateStats stats;
  double abs_sum_total = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.k_epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.minibatch_size);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop));
      const PpoLossStats loss = ppo_loss(agent, buf, adv, targets.returns, idx, cfg, true);
      if (!std::isfinite(loss.total)) throw NumericError("ppo_update: non-finite loss");
      if (stats.steps == 0) stats.first_ratio = loss.mean_ratio;
      const auto params = agent.parameters();
      if (clip_norm) clip_global_norm(params, cfg.max_grad_norm);
      const GmMetrics m = agent.optimizer.step(params);
      abs_sum_total += m.abs_grad_sum;
      stats.metrics = m;
      stats.last_loss = loss;
      ++stats.steps;
    }
  }
  stats.metrics.abs_grad_sum = abs_sum_total / static_cast<double>(stats.steps);
  buf.clear();
  return stats;
}

}  // namespace gmrl::rl
