#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmrl/env/pendulum.hpp"
#include "gmrl/env/robot_cell.hpp"
#include "gmrl/harness/checkpoint.hpp"
#include "gmrl/harness/config.hpp"
#include "gmrl/harness/metrics.hpp"
#include "gmrl/rl/a2c.hpp"
#include "gmrl/rl/ppo.hpp"

namespace gmrl::harness {

struct SeedResult {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::vector<MetricsRow> rows;
  std::vector<double> update_grad_sums;  // every optimizer step, all agents
  std::vector<double> episode_rewards;   // every finished training episode
  double final_window_reward = std::numeric_limits<double>::quiet_NaN();
  std::optional<std::uint64_t> stopped_at;  // rows produced when stop_reward was met
  std::optional<Checkpoint> checkpoint;
  std::string trace;  // JSON lines of the last robot-cell episode when tracing
};

struct TrainingResult {
  RunConfig config;
  std::vector<SeedResult> seeds;
  MeanStd summary;  // final-window reward over seeds that did not fail
};

struct RunOptions {
  bool keep_checkpoints = false;  // keep checkpoints in memory as well as on disk
  bool write_files = true;        // ignored when output_dir is empty
};

namespace detail {

inline std::uint64_t init_seed(std::uint64_t seed, std::size_t agent) {
  return Rng::derive(seed, "init", agent)();
}

inline bool stop_reached(const RunConfig& cfg, const std::vector<double>& episodes) {
  if (!cfg.stop_reward || episodes.size() < cfg.stop_window) return false;
  double s = 0.0;
  for (std::size_t i = episodes.size() - cfg.stop_window; i < episodes.size(); ++i) s += episodes[i];
  return s / static_cast<double>(cfg.stop_window) >= *cfg.stop_reward;
}

inline AgentSnapshot snapshot(const Network& net, const Matrix& log_std, const GmOptimizer& opt, const Rng& rng) {
  return {net, log_std, opt.adam_state(), opt.state(), rng.state(), rng.spare_normal()};
}

inline void finish_seed(const RunConfig& cfg, SeedResult& out) {
  if (out.failed || out.rows.empty()) return;
  std::vector<double> rewards;
  rewards.reserve(out.rows.size());
  for (const auto& r : out.rows) rewards.push_back(r.reward);
  out.final_window_reward = final_window_mean(rewards, cfg.final_window);
}

}  // namespace detail

/// Two independent A2C learners sharing the robot cell and its reward.
/// One row per episode; gradient metrics are averaged over the episode's
/// updates of both agents.
inline SeedResult train_robot_cell(const RunConfig& cfg, std::uint64_t seed) {
  SeedResult out;
  out.seed = seed;
  env::RobotCell cell(cfg.cell);
  std::array<rl::A2cAgent, 2> agents;
  for (std::size_t k = 0; k < 2; ++k) {
    agents[k].net = build_network(cfg);
    init_parameters(agents[k].net, detail::init_seed(seed, k));
    agents[k].optimizer = GmOptimizer(cfg.gm, cfg.adam);
    agents[k].rng = Rng::derive(seed, "policy", k);
  }
  std::uint64_t ep = 0;
  try {
    for (; ep < cfg.episodes; ++ep) {
      for (auto& a : agents) a.optimizer.set_progress(ep);
      std::vector<double> obs = cell.reset(seed);
      std::ostringstream trace;
      const bool tracing = cfg.trace && ep + 1 == cfg.episodes;
      double episode_reward = 0.0;
      double grad_sum = 0.0, active = 0.0;
      std::size_t updates = 0;
      bool done = false;
      while (!done) {
        const std::size_t state_index = env::configuration_index(cell.state().stations);
        const auto tr = rl::multi_agent_a2c_step(cell, std::span<rl::A2cAgent, 2>(agents), obs);
        if (tracing) env::write_trace_line(trace, cell.state().step_count, state_index, tr.actions[0], tr.actions[1], tr.result);
        episode_reward += tr.result.reward;
        done = tr.result.done;
        obs = tr.result.observation;
        if (agents[0].buffer.size() >= cfg.a2c.n_step || done) {
          for (auto& a : agents) {
            const auto u = rl::a2c_update(a, obs, done, cfg.a2c);
            out.update_grad_sums.push_back(u.metrics.abs_grad_sum);
            grad_sum += u.metrics.abs_grad_sum;
            active += u.metrics.active_pct;
            ++updates;
          }
        }
      }
      if (tracing) out.trace = trace.str();
      const auto& st = cell.state();
      MetricsRow row;
      row.run = cfg.run_name;
      row.seed = seed;
      row.step_index = ep;
      row.reward = episode_reward;
      row.steps = st.step_count;
      row.outputs = st.output_done[0] + st.output_done[1];
      row.abs_grad_sum = grad_sum / static_cast<double>(updates);
      row.active_pct = active / static_cast<double>(updates);
      row.lambda = 0.5 * (agents[0].optimizer.lambda() + agents[1].optimizer.lambda());
      if (!std::isfinite(row.reward) || !std::isfinite(row.abs_grad_sum)) {
        throw NumericError("non-finite metrics at episode " + std::to_string(ep));
      }
      out.rows.push_back(row);
      out.episode_rewards.push_back(episode_reward);
      if (detail::stop_reached(cfg, out.episode_rewards)) {
        out.stopped_at = out.rows.size();
        ++ep;
        break;
      }
    }
  } catch (const NumericError& e) {
    out.failed = true;
    out.error = e.what();
  }

  Checkpoint ck;
  ck.env = std::string(to_string(cfg.env));
  ck.variant = std::string(to_string(cfg.gm.variant));
  ck.seed = seed;
  ck.progress = ep;
  ck.config = to_json(cfg);
  for (const auto& a : agents) ck.agents.push_back(detail::snapshot(a.net, Matrix{}, a.optimizer, a.rng));
  out.checkpoint = std::move(ck);
  detail::finish_seed(cfg, out);
  return out;
}

/// Single PPO learner on the pendulum. One row per update: the reward is the
/// mean return of episodes finished during that update's rollout.
inline SeedResult train_pendulum(const RunConfig& cfg, std::uint64_t seed) {
  SeedResult out;
  out.seed = seed;
  rl::PpoAgent agent;
  agent.net = build_network(cfg);
  init_parameters(agent.net, detail::init_seed(seed, 0));
  agent.log_std = Matrix(1, 1, 0.0);
  agent.log_std_grad = Matrix(1, 1, 0.0);
  agent.optimizer = GmOptimizer(cfg.gm, cfg.adam);
  agent.rng = Rng::derive(seed, "policy", 0);
  Rng env_rng = Rng::derive(seed, "env");
  Rng shuffle_rng = Rng::derive(seed, "shuffle");

  env::Pendulum pend(cfg.pendulum);
  auto first = pend.reset(env_rng);
  std::vector<double> obs(first.begin(), first.end());
  rl::RolloutBuffer buf;
  double running_return = 0.0;
  std::size_t running_len = 0;
  double last_reward = 0.0, last_steps = 0.0;

  std::uint64_t u = 0;
  try {
    for (; u < cfg.updates; ++u) {
      agent.optimizer.set_progress(u);
      double finished_sum = 0.0, finished_len = 0.0;
      std::size_t finished = 0;
      for (std::size_t t = 0; t < cfg.ppo.ppo.rollout_steps; ++t) {
        const auto o = rl::act(agent.net, obs, rl::PolicyKind::gaussian, agent.rng, &agent.log_std);
        const auto st = pend.step(o.action[0]);
        running_return += st.reward;
        ++running_len;
        buf.add(obs, o.action, st.reward * cfg.ppo.reward_scale, o.value, o.log_prob, st.done);
        agent.optimizer.observe_reward(st.reward);
        if (st.done) {
          out.episode_rewards.push_back(running_return);
          finished_sum += running_return;
          finished_len += static_cast<double>(running_len);
          ++finished;
          running_return = 0.0;
          running_len = 0;
          const auto r = pend.reset(env_rng);
          obs.assign(r.begin(), r.end());
        } else {
          obs.assign(st.observation.begin(), st.observation.end());
        }
      }
      buf.bootstrap_value = agent.net.predict(Matrix::row_vector(obs), rl::kCriticHead)(0, 0);
      const auto stats = rl::ppo_update(agent, buf, cfg.ppo.ppo, shuffle_rng);
      if (finished > 0) {
        last_reward = finished_sum / static_cast<double>(finished);
        last_steps = finished_len / static_cast<double>(finished);
      }
      MetricsRow row;
      row.run = cfg.run_name;
      row.seed = seed;
      row.step_index = u;
      row.reward = last_reward;
      row.steps = last_steps;
      row.outputs = 0.0;
      row.abs_grad_sum = stats.metrics.abs_grad_sum;
      row.active_pct = stats.metrics.active_pct;
      row.lambda = stats.metrics.lambda;
      if (!std::isfinite(row.abs_grad_sum) || !agent.log_std.all_finite()) {
        throw NumericError("non-finite metrics at update " + std::to_string(u));
      }
      out.rows.push_back(row);
      out.update_grad_sums.push_back(stats.metrics.abs_grad_sum);
      if (detail::stop_reached(cfg, out.episode_rewards)) {
        out.stopped_at = out.rows.size();
        ++u;
        break;
      }
    }
  } catch (const NumericError& e) {
    out.failed = true;
    out.error = e.what();
  }

  Checkpoint ck;
  ck.env = std::string(to_string(cfg.env));
  ck.variant = std::string(to_string(cfg.gm.variant));
  ck.seed = seed;
  ck.progress = u;
  ck.config = to_json(cfg);
  ck.agents.push_back(detail::snapshot(agent.net, agent.log_std, agent.optimizer, agent.rng));
  out.checkpoint = std::move(ck);
  detail::finish_seed(cfg, out);
  return out;
}

inline SeedResult train_seed(const RunConfig& cfg, std::uint64_t seed) {
  return cfg.env == EnvKind::robot_cell ? train_robot_cell(cfg, seed) : train_pendulum(cfg, seed);
}

inline json summary_to_json(const TrainingResult& r) {
  json seeds = json::array();
  for (const auto& s : r.seeds) {
    json e = {{"seed", s.seed},
              {"failed", s.failed},
              {"rows", s.rows.size()},
              {"final_window_reward", s.failed ? json(nullptr) : json(s.final_window_reward)}};
    if (s.failed) e["error"] = s.error;
    if (s.stopped_at) e["stopped_at"] = *s.stopped_at;
    seeds.push_back(e);
  }
  return {{"run", r.config.run_name},
          {"env", std::string(to_string(r.config.env))},
          {"variant", std::string(to_string(r.config.gm.variant))},
          {"final_window", r.config.final_window},
          {"final_reward_mean", r.summary.mean},
          {"final_reward_std", r.summary.std},
          {"final_reward", format_mean_std(r.summary)},
          {"completed_seeds", r.summary.n},
          {"seeds", seeds}};
}

/// Trains every seed in order. With an output directory, writes metrics.csv
/// (all seeds), run.json (resolved config), summary.json and one checkpoint
/// per seed. A seed that diverges is marked failed; the others still run.
inline TrainingResult run_training(const RunConfig& cfg, const RunOptions& opts = {}) {
  namespace fs = std::filesystem;
  TrainingResult result;
  result.config = cfg;
  const bool files = opts.write_files && !cfg.output_dir.empty();
  std::optional<CsvWriter> csv;
  if (files) {
    fs::create_directories(cfg.output_dir);
    csv.emplace((fs::path(cfg.output_dir) / "metrics.csv").string());
    std::ofstream run((fs::path(cfg.output_dir) / "run.json").string(), std::ios::binary);
    if (!run) throw IoError("cannot write run.json in '" + cfg.output_dir + "'");
    run << to_json(cfg).dump(2) << '\n';
  }
  std::vector<double> finals;
  for (std::uint64_t seed : cfg.seeds) {
    SeedResult s = train_seed(cfg, seed);
    if (files) {
      for (const auto& row : s.rows) csv->write(row);
      csv->flush();
      save_checkpoint(*s.checkpoint, fs::path(cfg.output_dir) / ("checkpoint_seed" + std::to_string(seed) + ".json"));
      if (!s.trace.empty()) {
        std::ofstream t(fs::path(cfg.output_dir) / ("trace_seed" + std::to_string(seed) + ".jsonl"), std::ios::binary);
        t << s.trace;
      }
    }
    if (!opts.keep_checkpoints) s.checkpoint.reset();
    if (!s.failed) finals.push_back(s.final_window_reward);
    result.seeds.push_back(std::move(s));
  }
  result.summary = mean_std(finals);
  if (files) {
    std::ofstream sum((fs::path(cfg.output_dir) / "summary.json").string(), std::ios::binary);
    sum << summary_to_json(result).dump(2) << '\n';
  }
  return result;
}

struct EvalEpisode {
  double reward = 0.0;
  double steps = 0.0;
  double outputs = 0.0;
};

struct EvalResult {
  std::vector<EvalEpisode> episodes;
  double mean_reward = 0.0;
  double mean_steps = 0.0;
  double mean_outputs = 0.0;
  double final_window_reward = 0.0;
  std::uint64_t fingerprint = 0;  // parameter hash, identical before and after
};

/// Rolls out the checkpointed policy without learning. `cfg.eval_greedy`
/// picks argmax / mean actions; otherwise actions are sampled from a stream
/// derived from the checkpoint seed, so results are still reproducible.
inline EvalResult evaluate(const RunConfig& cfg, const Checkpoint& ck, std::optional<std::size_t> episodes = std::nullopt) {
  if (ck.env != to_string(cfg.env)) {
    throw ValidationError("checkpoint env '" + ck.env + "' does not match config env '" + std::string(to_string(cfg.env)) + "'");
  }
  const std::size_t n = episodes.value_or(cfg.eval_episodes);
  if (n == 0) throw ConfigError("eval_episodes", "must be at least 1");
  EvalResult res;
  auto fingerprint = [&] {
    std::uint64_t h = 0;
    for (const auto& a : ck.agents) h = h * 1099511628211ULL ^ parameter_fingerprint(a.net);
    return h;
  };
  res.fingerprint = fingerprint();

  if (cfg.env == EnvKind::robot_cell) {
    if (ck.agents.size() != 2) throw ValidationError("robot_cell checkpoint needs two agents");
    env::RobotCell cell(cfg.cell);
    std::array<Rng, 2> rngs{Rng::derive(ck.seed, "eval", 0), Rng::derive(ck.seed, "eval", 1)};
    for (std::size_t ep = 0; ep < n; ++ep) {
      auto obs = cell.reset(ck.seed);
      EvalEpisode e;
      bool done = false;
      while (!done) {
        std::array<int, 2> acts{};
        for (std::size_t k = 0; k < 2; ++k) {
          const auto o = rl::act(ck.agents[k].net, obs, rl::PolicyKind::categorical, rngs[k], nullptr, cfg.eval_greedy);
          acts[k] = static_cast<int>(o.action[0]);
        }
        const auto r = cell.step(acts[0], acts[1]);
        e.reward += r.reward;
        done = r.done;
        obs = r.observation;
      }
      e.steps = cell.state().step_count;
      e.outputs = cell.state().output_done[0] + cell.state().output_done[1];
      res.episodes.push_back(e);
    }
  } else {
    const auto& a = ck.agents.front();
    env::Pendulum pend(cfg.pendulum);
    Rng env_rng = Rng::derive(ck.seed, "eval-env");
    Rng act_rng = Rng::derive(ck.seed, "eval", 0);
    for (std::size_t ep = 0; ep < n; ++ep) {
      auto o = pend.reset(env_rng);
      std::vector<double> obs(o.begin(), o.end());
      EvalEpisode e;
      bool done = false;
      while (!done) {
        const auto out = rl::act(a.net, obs, rl::PolicyKind::gaussian, act_rng, &a.log_std, cfg.eval_greedy);
        const auto st = pend.step(out.action[0]);
        e.reward += st.reward;
        e.steps += 1.0;
        done = st.done;
        obs.assign(st.observation.begin(), st.observation.end());
      }
      res.episodes.push_back(e);
    }
  }

  std::vector<double> rewards;
  for (const auto& e : res.episodes) {
    res.mean_reward += e.reward;
    res.mean_steps += e.steps;
    res.mean_outputs += e.outputs;
    rewards.push_back(e.reward);
  }
  const double dn = static_cast<double>(res.episodes.size());
  res.mean_reward /= dn;
  res.mean_steps /= dn;
  res.mean_outputs /= dn;
  res.final_window_reward = final_window_mean(rewards, cfg.final_window);
  if (fingerprint() != res.fingerprint) throw StateError("evaluate: parameters changed during evaluation");
  return res;
}

inline json eval_to_json(const EvalResult& r) {
  return {{"episodes", r.episodes.size()},
          {"mean_reward", r.mean_reward},
          {"mean_steps", r.mean_steps},
          {"mean_outputs", r.mean_outputs},
          {"final_window_reward", r.final_window_reward},
          {"fingerprint", r.fingerprint}};
}

}  // namespace gmrl::harness
