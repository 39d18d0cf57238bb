#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmrl/errors.hpp"
#include "gmrl/gm_optimizer.hpp"
#include "gmrl/nn.hpp"
#include "gmrl/random.hpp"

namespace gmrl::harness {

using json = nlohmann::json;

inline constexpr int kCheckpointSchemaVersion = 1;

/// Everything needed to resume one learner: parameters, Adam moments, GM
/// state and the agent's sampling stream.
struct AgentSnapshot {
  Network net;
  Matrix log_std;  // empty for categorical agents
  AdamState adam;
  GmState gm;
  std::array<std::uint64_t, 4> rng_state{};
  std::optional<double> rng_spare;
};

struct Checkpoint {
  int schema_version = kCheckpointSchemaVersion;
  std::string env;
  std::string variant;
  std::uint64_t seed = 0;
  std::uint64_t progress = 0;  // episodes (a2c) or updates (ppo) completed
  json config;
  std::vector<AgentSnapshot> agents;
};

namespace detail {

inline json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

inline Matrix matrix_from_json(const json& j, const std::string& where) {
  try {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) throw ValidationError(where + ": data length does not match shape");
    Matrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.values().begin());
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

inline json optional_to_json(const std::optional<std::uint64_t>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<std::uint64_t> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::uint64_t>();
}

}  // namespace detail

inline json network_to_json(const Network& net) {
  json layers = json::array();
  for (const auto& l : net.layers()) {
    layers.push_back({{"name", l.name},
                      {"in", l.spec.in_dim},
                      {"out", l.spec.out_dim},
                      {"activation", std::string(to_string(l.spec.activation))},
                      {"weights", detail::matrix_to_json(l.weights)},
                      {"bias", detail::matrix_to_json(l.bias)}});
  }
  return {{"trunk_size", net.trunk_size()}, {"heads", net.head_names()}, {"layers", layers}};
}

/// Rebuilds the architecture from the stored layer list and copies the values in.
inline Network network_from_json(const json& j) {
  try {
    const auto trunk_size = j.at("trunk_size").get<std::size_t>();
    const auto heads = j.at("heads").get<std::vector<std::string>>();
    const json& layers = j.at("layers");
    std::vector<LayerSpec> trunk;
    std::vector<Network::HeadSpec> head_specs;
    for (const auto& h : heads) head_specs.push_back({h, {}});
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const json& l = layers[i];
      LayerSpec spec{l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(),
                     activation_from_string(l.at("activation").get<std::string>())};
      if (i < trunk_size) {
        trunk.push_back(spec);
        continue;
      }
      const auto name = l.at("name").get<std::string>();
      const auto head = name.substr(0, name.rfind('.'));
      auto it = std::find_if(head_specs.begin(), head_specs.end(), [&](const auto& h) { return h.first == head; });
      if (it == head_specs.end()) throw ValidationError("checkpoint: layer '" + name + "' belongs to no head");
      it->second.push_back(spec);
    }
    Network net(trunk, head_specs);
    auto& dst = net.layers();
    if (dst.size() != layers.size()) throw ValidationError("checkpoint: layer count mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) {
      Matrix w = detail::matrix_from_json(layers[i].at("weights"), dst[i].name + ".weights");
      Matrix b = detail::matrix_from_json(layers[i].at("bias"), dst[i].name + ".bias");
      require_same_shape(w, dst[i].weights, "checkpoint weights");
      require_same_shape(b, dst[i].bias, "checkpoint bias");
      dst[i].weights = std::move(w);
      dst[i].bias = std::move(b);
    }
    return net;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint network: ") + e.what());
  } catch (const LookupError& e) {
    throw ValidationError(std::string("checkpoint network: ") + e.what());
  }
}

inline json agent_to_json(const AgentSnapshot& a) {
  json adam_slots = json::array();
  for (const auto& s : a.adam.slots) adam_slots.push_back({{"m", detail::matrix_to_json(s.m)}, {"v", detail::matrix_to_json(s.v)}});
  json gm_slots = json::array();
  for (const auto& s : a.gm.slots) {
    gm_slots.push_back({{"mask", detail::matrix_to_json(s.mask)},
                        {"momentum", detail::matrix_to_json(s.momentum)},
                        {"has_mask", s.has_mask}});
  }
  return {{"network", network_to_json(a.net)},
          {"log_std", detail::matrix_to_json(a.log_std)},
          {"adam", {{"t", a.adam.t}, {"slots", adam_slots}}},
          {"gm",
           {{"lambda", a.gm.lambda},
            {"eta", a.gm.eta},
            {"recomputations", a.gm.recomputations},
            {"last_mask_eta", detail::optional_to_json(a.gm.last_mask_eta)},
            {"last_adapt_eta", detail::optional_to_json(a.gm.last_adapt_eta)},
            {"has_reference", a.gm.has_reference},
            {"reward_old", a.gm.reward_old},
            {"phi_old", a.gm.phi_old},
            {"reward_window", a.gm.reward_window},
            {"slots", gm_slots}}},
          {"rng", {{"state", a.rng_state}, {"spare_normal", a.rng_spare ? json(*a.rng_spare) : json(nullptr)}}}};
}

inline AgentSnapshot agent_from_json(const json& j) {
  try {
    AgentSnapshot a;
    a.net = network_from_json(j.at("network"));
    a.log_std = detail::matrix_from_json(j.at("log_std"), "log_std");
    const json& adam = j.at("adam");
    a.adam.t = adam.at("t").get<std::uint64_t>();
    for (const auto& s : adam.at("slots")) {
      a.adam.slots.push_back({detail::matrix_from_json(s.at("m"), "adam.m"), detail::matrix_from_json(s.at("v"), "adam.v")});
    }
    const json& gm = j.at("gm");
    a.gm.lambda = gm.at("lambda").get<double>();
    a.gm.eta = gm.at("eta").get<std::uint64_t>();
    a.gm.recomputations = gm.at("recomputations").get<std::uint64_t>();
    a.gm.last_mask_eta = detail::optional_from_json(gm.at("last_mask_eta"));
    a.gm.last_adapt_eta = detail::optional_from_json(gm.at("last_adapt_eta"));
    a.gm.has_reference = gm.at("has_reference").get<bool>();
    a.gm.reward_old = gm.at("reward_old").get<double>();
    a.gm.phi_old = gm.at("phi_old").get<double>();
    a.gm.reward_window = gm.at("reward_window").get<std::vector<double>>();
    for (const auto& s : gm.at("slots")) {
      GmSlot slot;
      slot.mask = detail::matrix_from_json(s.at("mask"), "gm.mask");
      slot.momentum = detail::matrix_from_json(s.at("momentum"), "gm.momentum");
      slot.has_mask = s.at("has_mask").get<bool>();
      a.gm.slots.push_back(std::move(slot));
    }
    const json& rng = j.at("rng");
    a.rng_state = rng.at("state").get<std::array<std::uint64_t, 4>>();
    if (!rng.at("spare_normal").is_null()) a.rng_spare = rng.at("spare_normal").get<double>();
    return a;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint agent: ") + e.what());
  }
}

inline json checkpoint_to_json(const Checkpoint& c) {
  json agents = json::array();
  for (const auto& a : c.agents) agents.push_back(agent_to_json(a));
  return {{"schema_version", c.schema_version},
          {"env", c.env},
          {"variant", c.variant},
          {"seed", c.seed},
          {"progress", c.progress},
          {"config", c.config},
          {"agents", agents}};
}

inline Checkpoint checkpoint_from_json(const json& j) {
  try {
    Checkpoint c;
    c.schema_version = j.at("schema_version").get<int>();
    if (c.schema_version != kCheckpointSchemaVersion) {
      throw ValidationError("checkpoint schema_version " + std::to_string(c.schema_version) +
                            " is not supported (expected " + std::to_string(kCheckpointSchemaVersion) + ")");
    }
    c.env = j.at("env").get<std::string>();
    c.variant = j.at("variant").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.progress = j.at("progress").get<std::uint64_t>();
    c.config = j.at("config");
    for (const auto& a : j.at("agents")) c.agents.push_back(agent_from_json(a));
    if (c.agents.empty()) throw ValidationError("checkpoint holds no agents");
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out << checkpoint_to_json(c).dump() << '\n';
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

/// Restores optimizer and sampling-stream state captured in a snapshot.
inline void restore_optimizer(GmOptimizer& opt, const AgentSnapshot& a) {
  opt.adam_state() = a.adam;
  opt.state() = a.gm;
}

inline Rng restore_rng(const AgentSnapshot& a) {
  Rng rng;
  rng.set_state(a.rng_state);
  rng.set_spare_normal(a.rng_spare);
  return rng;
}

}  // namespace gmrl::harness
