#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmrl/env/pendulum.hpp"
#include "gmrl/env/robot_cell.hpp"
#include "gmrl/errors.hpp"
#include "gmrl/gm_optimizer.hpp"
#include "gmrl/nn.hpp"
#include "gmrl/rl/a2c.hpp"
#include "gmrl/rl/ppo.hpp"

namespace gmrl::harness {

using json = nlohmann::json;

enum class EnvKind { robot_cell, pendulum };
enum class AlgoKind { a2c, ppo };

inline std::string_view to_string(EnvKind e) { return e == EnvKind::robot_cell ? "robot_cell" : "pendulum"; }
inline std::string_view to_string(AlgoKind a) { return a == AlgoKind::a2c ? "a2c" : "ppo"; }

struct HiddenLayer {
  std::size_t units = 0;
  Activation activation = Activation::relu;
};

/// Hidden layers only; the input width and the output layers of each head
/// follow from the environment.
struct NetConfig {
  std::vector<HiddenLayer> trunk;
  std::vector<HiddenLayer> actor;
  std::vector<HiddenLayer> critic;
};

struct PpoRunConfig {
  rl::PpoConfig ppo;
  double reward_scale = 1.0;  // applied to rewards stored for learning only
};

/// Fully resolved run description. Build it with resolve_config(); every field
/// then holds either the file/override value or the documented default.
struct RunConfig {
  std::string run_name = "run";
  EnvKind env = EnvKind::robot_cell;
  AlgoKind algo = AlgoKind::a2c;
  std::vector<std::uint64_t> seeds{0};
  std::size_t episodes = 5000;  // a2c training budget
  std::size_t updates = 300;    // ppo training budget
  std::size_t eval_episodes = 4000;
  bool eval_greedy = false;
  double final_window = 0.1;    // fraction of rows averaged for summaries
  std::optional<double> stop_reward;  // stop a seed once its rolling mean reaches this
  std::size_t stop_window = 10;
  std::string output_dir;
  bool trace = false;

  GmConfig gm;
  AdamConfig adam;
  NetConfig net;
  env::CellConfig cell;
  env::PendulumParams pendulum;
  rl::A2cConfig a2c;
  PpoRunConfig ppo;

  json source;  // merged input tree, kept for run.json and checkpoints
};

namespace detail {

// Reads fields out of one JSON object and reports anything left unread.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    const json* v = find(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigError(field(key), "expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer() || (std::is_unsigned_v<T> && v->get<long long>() < 0)) {
          throw ConfigError(field(key), "expected a non-negative integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw ConfigError(field(key), "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      }
      out = v->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError(field(it.key()), "unknown field");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::vector<HiddenLayer> read_layers(const json& arr, const std::string& path) {
  if (!arr.is_array()) throw ConfigError(path, "expected an array of layers");
  std::vector<HiddenLayer> layers;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    FieldReader r(arr[i], p);
    HiddenLayer layer;
    std::string act = "relu";
    r.read("units", layer.units);
    r.read("activation", act);
    r.finish();
    if (layer.units == 0) throw ConfigError(p + ".units", "must be at least 1");
    try {
      layer.activation = activation_from_string(act);
    } catch (const LookupError& e) {
      throw ConfigError(p + ".activation", e.what());
    }
    if (layer.activation == Activation::softmax) {
      throw ConfigError(p + ".activation", "softmax is reserved for the actor output");
    }
    layers.push_back(layer);
  }
  return layers;
}

inline json layers_to_json(const std::vector<HiddenLayer>& layers) {
  json arr = json::array();
  for (const auto& l : layers) arr.push_back({{"units", l.units}, {"activation", std::string(to_string(l.activation))}});
  return arr;
}

}  // namespace detail

/// Sets `path` (dot separated) in `tree` to `value`, creating objects on the way.
inline void set_path(json& tree, const std::string& path, json value) {
  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError(path, "empty path component");
    if (!node->is_object()) throw ConfigError(path, "cannot descend into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

/// Parses `key=value`; the value is read as JSON when possible, else as a string.
inline void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, "override must look like key.path=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;
  set_path(tree, key, std::move(value));
}

/// Builds a RunConfig from a merged JSON tree. Defaults depend on the
/// environment and GM variant: the robot cell follows the A2C setup (29
/// inputs, 2x10 sigmoid trunk, 10-unit ReLU heads, learning rate 1e-3 for
/// wogm and 2e-3 otherwise); the pendulum follows the PPO shapes (64 hidden
/// units for wogm, 96 otherwise, lambda 0.5, zeta 0.99, momentum init 1).
inline RunConfig resolve_config(const json& tree) {
  using detail::FieldReader;
  RunConfig cfg;
  cfg.source = tree;
  FieldReader root(tree, "");

  std::string env_name = "robot_cell";
  root.read("env", env_name);
  if (env_name == "robot_cell") cfg.env = EnvKind::robot_cell;
  else if (env_name == "pendulum") cfg.env = EnvKind::pendulum;
  else throw ConfigError("env", "expected robot_cell or pendulum, got '" + env_name + "'");
  const bool robot = cfg.env == EnvKind::robot_cell;

  std::string algo_name = robot ? "a2c" : "ppo";
  root.read("algo", algo_name);
  if (algo_name == "a2c") cfg.algo = AlgoKind::a2c;
  else if (algo_name == "ppo") cfg.algo = AlgoKind::ppo;
  else throw ConfigError("algo", "expected a2c or ppo, got '" + algo_name + "'");
  if (robot && cfg.algo != AlgoKind::a2c) throw ConfigError("algo", "robot_cell trains with a2c");
  if (!robot && cfg.algo != AlgoKind::ppo) throw ConfigError("algo", "pendulum trains with ppo");

  // Variant first: several defaults depend on it.
  std::string variant = "wogm";
  const json* gm_node = root.find("gm");
  if (gm_node && gm_node->is_object() && gm_node->contains("variant")) {
    if (!(*gm_node)["variant"].is_string()) throw ConfigError("gm.variant", "expected a string");
    variant = (*gm_node)["variant"].get<std::string>();
  }
  try {
    cfg.gm.variant = variant_from_string(variant);
  } catch (const LookupError& e) {
    throw ConfigError("gm.variant", e.what());
  }
  const bool wogm = cfg.gm.variant == GmVariant::wogm;

  // Environment-dependent defaults.
  if (robot) {
    cfg.episodes = 5000;
    cfg.eval_episodes = 4000;
    cfg.eval_greedy = false;
    cfg.adam.learning_rate = wogm ? 1e-3 : 2e-3;
    cfg.gm.lambda = 0.5;
    cfg.gm.zeta = 0.999;
    cfg.gm.eta_start = 1500;
    cfg.gm.eta_repeat = 1000;
    cfg.gm.alpha_lambda = 0.001;
    cfg.gm.momentum_init = 1.0;
    cfg.net.trunk = {{10, Activation::sigmoid}, {10, Activation::sigmoid}};
    cfg.net.actor = {{10, Activation::relu}};
    cfg.net.critic = {{10, Activation::relu}};
  } else {
    const std::size_t hidden = wogm ? 64 : 96;
    cfg.updates = 300;
    cfg.eval_episodes = 100;
    cfg.eval_greedy = true;
    cfg.adam.learning_rate = 1e-3;
    cfg.gm.lambda = 0.5;
    cfg.gm.zeta = 0.99;
    cfg.gm.eta_start = 150;
    cfg.gm.eta_repeat = 50;
    cfg.gm.alpha_lambda = 0.05;
    cfg.gm.momentum_init = 1.0;
    cfg.net.trunk = {};
    cfg.net.actor = {{hidden, Activation::tanh}, {hidden, Activation::tanh}};
    cfg.net.critic = {{hidden, Activation::tanh}, {hidden, Activation::tanh}};
    cfg.ppo.ppo.policy_kind = rl::PolicyKind::gaussian;
    cfg.ppo.ppo.k_epochs = wogm ? 4 : 5;
    cfg.ppo.ppo.rollout_steps = 1024;
    cfg.ppo.ppo.minibatch_size = 64;
    cfg.ppo.ppo.gamma = 0.9;
    cfg.ppo.ppo.gae_lambda = 0.95;
    cfg.ppo.ppo.entropy_coef = 0.0;
    cfg.ppo.ppo.max_grad_norm = 0.5;
    cfg.ppo.reward_scale = 0.1;
  }

  root.read("run_name", cfg.run_name);
  if (const json* seeds = root.find("seeds")) {
    if (seeds->is_number_integer()) {
      cfg.seeds = {seeds->get<std::uint64_t>()};
    } else if (seeds->is_array() && !seeds->empty()) {
      cfg.seeds.clear();
      for (const auto& s : *seeds) {
        if (!s.is_number_integer() || s.get<long long>() < 0) {
          throw ConfigError("seeds", "expected non-negative integers");
        }
        cfg.seeds.push_back(s.get<std::uint64_t>());
      }
    } else {
      throw ConfigError("seeds", "expected a non-empty integer list");
    }
  }
  root.read("episodes", cfg.episodes);
  root.read("updates", cfg.updates);
  root.read("eval_episodes", cfg.eval_episodes);
  root.read("eval_greedy", cfg.eval_greedy);
  root.read("final_window", cfg.final_window);
  if (const json* stop = root.find("stop_reward")) {
    if (!stop->is_number()) throw ConfigError("stop_reward", "expected a number");
    cfg.stop_reward = stop->get<double>();
  }
  root.read("stop_window", cfg.stop_window);
  root.read("output_dir", cfg.output_dir);
  root.read("trace", cfg.trace);

  if (gm_node) {
    FieldReader r(*gm_node, "gm");
    std::string ignored;
    r.read("variant", ignored);
    r.read("lambda", cfg.gm.lambda);
    r.read("zeta", cfg.gm.zeta);
    r.read("eta_start", cfg.gm.eta_start);
    r.read("eta_repeat", cfg.gm.eta_repeat);
    r.read("alpha_lambda", cfg.gm.alpha_lambda);
    r.read("momentum_init", cfg.gm.momentum_init);
    r.read("mask_biases", cfg.gm.mask_biases);
    r.finish();
  }
  if (const json* opt = root.find("optimizer")) {
    FieldReader r(*opt, "optimizer");
    r.read("learning_rate", cfg.adam.learning_rate);
    r.read("beta1", cfg.adam.beta1);
    r.read("beta2", cfg.adam.beta2);
    r.read("epsilon", cfg.adam.epsilon);
    r.finish();
  }
  if (const json* net = root.find("net")) {
    FieldReader r(*net, "net");
    if (const json* t = r.find("trunk")) cfg.net.trunk = detail::read_layers(*t, "net.trunk");
    if (const json* a = r.find("actor")) cfg.net.actor = detail::read_layers(*a, "net.actor");
    if (const json* c = r.find("critic")) cfg.net.critic = detail::read_layers(*c, "net.critic");
    r.finish();
  }
  if (const json* cell = root.find("robot_cell")) {
    FieldReader r(*cell, "robot_cell");
    r.read("target_wp1", cfg.cell.target[0]);
    r.read("target_wp2", cfg.cell.target[1]);
    r.read("max_steps", cfg.cell.max_steps);
    r.finish();
    if (cfg.cell.target[0] < 1) throw ConfigError("robot_cell.target_wp1", "must be at least 1");
    if (cfg.cell.target[1] < 1) throw ConfigError("robot_cell.target_wp2", "must be at least 1");
    if (cfg.cell.max_steps < 1) throw ConfigError("robot_cell.max_steps", "must be at least 1");
  }
  if (const json* pend = root.find("pendulum")) {
    FieldReader r(*pend, "pendulum");
    r.read("horizon", cfg.pendulum.horizon);
    r.finish();
    if (cfg.pendulum.horizon < 1) throw ConfigError("pendulum.horizon", "must be at least 1");
  }
  if (const json* a2c = root.find("a2c")) {
    FieldReader r(*a2c, "a2c");
    r.read("n_step", cfg.a2c.n_step);
    r.read("gamma", cfg.a2c.gamma);
    r.read("entropy_coef", cfg.a2c.entropy_coef);
    r.read("value_coef", cfg.a2c.value_coef);
    r.finish();
  }
  if (const json* ppo = root.find("ppo")) {
    FieldReader r(*ppo, "ppo");
    auto& p = cfg.ppo.ppo;
    r.read("clip", p.clip);
    r.read("k_epochs", p.k_epochs);
    r.read("minibatch_size", p.minibatch_size);
    r.read("rollout_steps", p.rollout_steps);
    r.read("gamma", p.gamma);
    r.read("gae_lambda", p.gae_lambda);
    r.read("entropy_coef", p.entropy_coef);
    r.read("value_coef", p.value_coef);
    r.read("max_grad_norm", p.max_grad_norm);
    r.read("normalize_advantages", p.normalize_advantages);
    r.read("reward_scale", cfg.ppo.reward_scale);
    std::string kind;
    r.read("policy_kind", kind);
    if (!kind.empty()) {
      try {
        p.policy_kind = rl::policy_kind_from_string(kind);
      } catch (const LookupError& e) {
        throw ConfigError("ppo.policy_kind", e.what());
      }
    }
    r.finish();
  }
  root.finish();

  cfg.gm.validate();
  cfg.a2c.validate();
  cfg.ppo.ppo.validate();
  if (!(cfg.adam.learning_rate > 0.0)) throw ConfigError("optimizer.learning_rate", "must be positive");
  if (!(cfg.final_window > 0.0 && cfg.final_window <= 1.0)) {
    throw ConfigError("final_window", "must lie in (0, 1]");
  }
  if (robot && cfg.episodes < 1) throw ConfigError("episodes", "must be at least 1");
  if (!robot && cfg.updates < 1) throw ConfigError("updates", "must be at least 1");
  if (!robot && cfg.ppo.ppo.policy_kind != rl::PolicyKind::gaussian) {
    throw ConfigError("ppo.policy_kind", "pendulum needs a gaussian policy");
  }
  if (cfg.stop_window < 1) throw ConfigError("stop_window", "must be at least 1");
  return cfg;
}

/// Resolved configuration as JSON, written next to the metrics as run.json.
inline json to_json(const RunConfig& c) {
  json j;
  j["run_name"] = c.run_name;
  j["env"] = std::string(to_string(c.env));
  j["algo"] = std::string(to_string(c.algo));
  j["seeds"] = c.seeds;
  j["episodes"] = c.episodes;
  j["updates"] = c.updates;
  j["eval_episodes"] = c.eval_episodes;
  j["eval_greedy"] = c.eval_greedy;
  j["final_window"] = c.final_window;
  j["stop_reward"] = c.stop_reward ? json(*c.stop_reward) : json(nullptr);
  j["stop_window"] = c.stop_window;
  j["output_dir"] = c.output_dir;
  j["trace"] = c.trace;
  j["gm"] = {{"variant", std::string(to_string(c.gm.variant))},
             {"lambda", c.gm.lambda},
             {"zeta", c.gm.zeta},
             {"eta_start", c.gm.eta_start},
             {"eta_repeat", c.gm.eta_repeat},
             {"alpha_lambda", c.gm.alpha_lambda},
             {"momentum_init", c.gm.momentum_init},
             {"mask_biases", c.gm.mask_biases}};
  j["optimizer"] = {{"learning_rate", c.adam.learning_rate},
                    {"beta1", c.adam.beta1},
                    {"beta2", c.adam.beta2},
                    {"epsilon", c.adam.epsilon}};
  j["net"] = {{"trunk", detail::layers_to_json(c.net.trunk)},
              {"actor", detail::layers_to_json(c.net.actor)},
              {"critic", detail::layers_to_json(c.net.critic)}};
  j["robot_cell"] = {{"target_wp1", c.cell.target[0]},
                     {"target_wp2", c.cell.target[1]},
                     {"max_steps", c.cell.max_steps}};
  j["pendulum"] = {{"horizon", c.pendulum.horizon}};
  j["a2c"] = {{"n_step", c.a2c.n_step},
              {"gamma", c.a2c.gamma},
              {"entropy_coef", c.a2c.entropy_coef},
              {"value_coef", c.a2c.value_coef}};
  const auto& p = c.ppo.ppo;
  j["ppo"] = {{"clip", p.clip},
              {"k_epochs", p.k_epochs},
              {"minibatch_size", p.minibatch_size},
              {"rollout_steps", p.rollout_steps},
              {"gamma", p.gamma},
              {"gae_lambda", p.gae_lambda},
              {"entropy_coef", p.entropy_coef},
              {"value_coef", p.value_coef},
              {"max_grad_norm", p.max_grad_norm},
              {"normalize_advantages", p.normalize_advantages},
              {"reward_scale", c.ppo.reward_scale},
              {"policy_kind", p.policy_kind == rl::PolicyKind::gaussian ? "gaussian" : "categorical"}};
  return j;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("malformed JSON: ") + e.what());
  }
}

/// Config file, then `--override key=value` entries in order, then `--seed`.
inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {},
                             std::optional<std::uint64_t> seed = std::nullopt) {
  json tree = read_json_file(path);
  for (const auto& o : overrides) apply_override(tree, o);
  if (seed) tree["seeds"] = json::array({*seed});
  return resolve_config(tree);
}

/// Network for one agent. Robot cell: 29 inputs, softmax over 10 actions.
/// Pendulum: 3 inputs, one linear torque mean.
inline Network build_network(const RunConfig& cfg) {
  const bool robot = cfg.env == EnvKind::robot_cell;
  const std::size_t in = robot ? env::kObservationSize : 3;
  const std::size_t actions = robot ? env::kActionsPerRobot : 1;
  std::vector<LayerSpec> trunk;
  std::size_t width = in;
  for (const auto& l : cfg.net.trunk) {
    trunk.push_back({width, l.units, l.activation});
    width = l.units;
  }
  auto head = [&](const std::vector<HiddenLayer>& hidden, std::size_t out, Activation out_act) {
    std::vector<LayerSpec> specs;
    std::size_t w = width;
    for (const auto& l : hidden) {
      specs.push_back({w, l.units, l.activation});
      w = l.units;
    }
    specs.push_back({w, out, out_act});
    return specs;
  };
  return Network(trunk, {{"actor", head(cfg.net.actor, actions, robot ? Activation::softmax : Activation::linear)},
                         {"critic", head(cfg.net.critic, 1, Activation::linear)}});
}

}  // namespace gmrl::harness
