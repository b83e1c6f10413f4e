#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "htlm/qnet.hpp"
#include "htlm/random.hpp"
#include "htlm/reward.hpp"
#include "htlm/scenario.hpp"

namespace htlm {

using json = nlohmann::json;

// A parsed scenario file: the world, the team-wide reward block, per-agent
// reward overrides (keyed by agent id) and the fingerprint of the document.
struct ScenarioDocument {
  ScenarioConfig scenario;
  RewardConfig reward;
  std::map<int, json> agent_reward_overrides;
  std::string fingerprint;
  json raw;
};

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Hash of the canonical (sorted-key, compact) serialization.
inline std::string fingerprint_of(const json& doc) { return hex64(fnv1a64(doc.dump())); }

namespace detail {

template <typename T>
T field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + key + ": missing required field");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + key + ": wrong type");
  }
}

template <typename T>
T field_or(const json& obj, const std::string& key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return field<T>(obj, key, where);
}

inline void apply_reward_block(RewardConfig& rc, const json& block, const std::string& where) {
  if (!block.is_object()) throw ConfigError(where + ": must be an object");
  for (const auto& [key, value] : block.items()) {
    if (key == "level_rewards") {
      rc.level_rewards = field<std::vector<double>>(block, key, where + ".");
    } else if (key == "belief_threshold") {
      rc.belief_threshold = field<double>(block, key, where + ".");
    } else if (key == "idle_reward") {
      rc.idle_reward = field<double>(block, key, where + ".");
    } else if (key == "excess_penalty") {
      rc.excess_penalty = field<double>(block, key, where + ".");
    } else if (key == "excess_margin") {
      rc.excess_margin = field<int>(block, key, where + ".");
    } else if (key == "traversing_cost") {
      rc.traversing_cost = field<double>(block, key, where + ".");
    } else {
      throw ConfigError(where + "." + key + ": unknown reward field");
    }
  }
}

}  // namespace detail

inline ScenarioDocument parse_scenario(const json& doc) {
  using detail::field;
  using detail::field_or;
  if (!doc.is_object()) throw ConfigError("scenario: document must be an object");
  ScenarioDocument out;
  out.raw = doc;
  out.fingerprint = fingerprint_of(doc);
  auto& cfg = out.scenario;
  const std::string top;
  cfg.name = field_or<std::string>(doc, "name", "", top);
  cfg.num_levels = field_or<int>(doc, "num_levels", 5, top);
  cfg.max_joint_capability = field_or<int>(doc, "max_joint_capability", 5, top);
  cfg.horizon = field_or<int>(doc, "horizon", 30, top);
  cfg.fire_block_threshold = field_or<int>(doc, "fire_block_threshold", 2, top);
  cfg.rescue_success_prob = field_or<double>(doc, "rescue_success_prob", 0.5, top);
  cfg.growth_prob = field_or<double>(doc, "growth_prob", 0.0, top);
  cfg.discount = field_or<double>(doc, "discount", 0.95, top);
  cfg.uniform_prior = field_or<bool>(doc, "uniform_prior", false, top);
  cfg.locations = field<std::vector<int>>(doc, "locations", top);
  cfg.idle_locations = field<std::vector<int>>(doc, "idle_locations", top);

  if (!doc.contains("tasks") || !doc["tasks"].is_array())
    throw ConfigError("tasks: missing or not a list");
  for (std::size_t j = 0; j < doc["tasks"].size(); ++j) {
    const auto& t = doc["tasks"][j];
    const std::string where = "tasks[" + std::to_string(j) + "].";
    TaskSpec spec;
    spec.id = field<int>(t, "id", where);
    spec.location = field<int>(t, "location", where);
    spec.type = parse_task_type(field<std::string>(t, "type", where));
    spec.initial_level = field_or<int>(t, "initial_level", cfg.num_levels - 1, where);
    if (t.contains("coupled_fire_task")) spec.coupled_fire_task = field<int>(t, "coupled_fire_task", where);
    cfg.tasks.push_back(spec);
  }

  if (!doc.contains("agents") || !doc["agents"].is_array())
    throw ConfigError("agents: missing or not a list");
  for (std::size_t i = 0; i < doc["agents"].size(); ++i) {
    const auto& a = doc["agents"][i];
    const std::string where = "agents[" + std::to_string(i) + "].";
    AgentSpec spec;
    spec.id = field<int>(a, "id", where);
    const auto cap = a.contains("capability") ? a["capability"] : json::object();
    spec.capability[static_cast<std::size_t>(TaskType::fire)] =
        field_or<int>(cap, "fire", 0, where + "capability.");
    spec.capability[static_cast<std::size_t>(TaskType::rescue)] =
        field_or<int>(cap, "rescue", 0, where + "capability.");
    spec.sensing = field_or<int>(a, "sensing", 3, where);
    spec.communication = field_or<int>(a, "communication", 3, where);
    spec.start_location = field_or<int>(
        a, "start_location", cfg.locations.empty() ? 0 : cfg.locations.front(), where);
    cfg.agents.push_back(spec);
  }
  validate(cfg);

  if (cfg.levels() != out.reward.level_rewards.size()) {
    // Linear from 100 (complete) down to 0 for non-default level counts.
    out.reward.level_rewards.resize(cfg.levels());
    for (std::size_t l = 0; l < cfg.levels(); ++l)
      out.reward.level_rewards[l] =
          100.0 * static_cast<double>(cfg.levels() - 1 - l) / static_cast<double>(cfg.levels() - 1);
  }
  if (doc.contains("reward")) detail::apply_reward_block(out.reward, doc["reward"], "reward");
  if (doc.contains("agent_rewards")) {
    const auto& ov = doc["agent_rewards"];
    if (!ov.is_object()) throw ConfigError("agent_rewards: must map agent ids to reward blocks");
    for (const auto& [key, block] : ov.items()) {
      int id = 0;
      try {
        id = std::stoi(key);
      } catch (const std::exception&) {
        throw ConfigError("agent_rewards." + key + ": key must be an agent id");
      }
      cfg.agent_index(id);
      out.agent_reward_overrides[id] = block;
    }
  }
  validate(out.reward, cfg);
  return out;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "': parse error: " + e.what());
  }
}

inline ScenarioDocument load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_json_file(path));
}

// Effective per-agent rewards: document block, then the optional preset,
// then the per-agent override blocks.
inline std::vector<RewardConfig> agent_rewards(const ScenarioDocument& doc,
                                               const std::string& preset) {
  RewardConfig team = preset.empty() ? doc.reward : reward_preset(preset, doc.reward);
  std::vector<RewardConfig> out;
  for (const auto& a : doc.scenario.agents) {
    RewardConfig rc = team;
    if (const auto it = doc.agent_reward_overrides.find(a.id);
        it != doc.agent_reward_overrides.end())
      detail::apply_reward_block(rc, it->second, "agent_rewards." + std::to_string(a.id));
    validate(rc, doc.scenario);
    out.push_back(rc);
  }
  return out;
}

// ---- checkpoints -----------------------------------------------------------

struct Checkpoint {
  QNet net;
  std::string fingerprint;
  std::uint64_t seed = 0;
  int agent_id = 0;
};

inline json to_json(const Checkpoint& c) {
  json layers = json::array();
  for (std::size_t l = 0; l < c.net.num_layers(); ++l) {
    const auto& w = c.net.weights()[l];
    json rows = json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index col = 0; col < w.cols(); ++col) row.push_back(w(r, col));
      rows.push_back(std::move(row));
    }
    const auto& b = c.net.biases()[l];
    layers.push_back({{"weights", std::move(rows)},
                      {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  return json{{"format", "htlm-qnet/1"},
              {"agent_id", c.agent_id},
              {"layer_dims", c.net.layer_dims()},
              {"layers", std::move(layers)},
              {"scenario_fingerprint", c.fingerprint},
              {"seed", c.seed}};
}

inline Checkpoint checkpoint_from_json(const json& doc) {
  using detail::field;
  const std::string where = "checkpoint.";
  Checkpoint c;
  c.agent_id = field<int>(doc, "agent_id", where);
  c.fingerprint = field<std::string>(doc, "scenario_fingerprint", where);
  c.seed = field<std::uint64_t>(doc, "seed", where);
  c.net = QNet(field<std::vector<std::size_t>>(doc, "layer_dims", where));
  const auto& layers = doc.at("layers");
  if (layers.size() != c.net.num_layers()) throw ConfigError("checkpoint.layers: wrong count");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& w = c.net.weights()[l];
    auto& b = c.net.biases()[l];
    const auto rows = field<std::vector<std::vector<double>>>(layers[l], "weights", where);
    const auto bias = field<std::vector<double>>(layers[l], "bias", where);
    if (rows.size() != static_cast<std::size_t>(w.rows()) ||
        bias.size() != static_cast<std::size_t>(b.size()))
      throw ConfigError("checkpoint.layers: shape does not match layer_dims");
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      if (row.size() != static_cast<std::size_t>(w.cols()))
        throw ConfigError("checkpoint.layers: shape does not match layer_dims");
      for (Eigen::Index col = 0; col < w.cols(); ++col) w(r, col) = row[static_cast<std::size_t>(col)];
    }
    for (Eigen::Index k = 0; k < b.size(); ++k) b[k] = bias[static_cast<std::size_t>(k)];
  }
  return c;
}

inline std::string checkpoint_filename(int agent_id) {
  return "agent_" + std::to_string(agent_id) + ".qnet";
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_text(path, to_json(c).dump(1) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_json_file(path));
}

// Loads agent_<id>.qnet for every agent and checks each against the scenario.
inline std::vector<QNet> load_team(const std::filesystem::path& dir,
                                   const ScenarioDocument& doc) {
  std::vector<QNet> nets;
  for (const auto& a : doc.scenario.agents) {
    const auto path = dir / checkpoint_filename(a.id);
    if (!std::filesystem::exists(path))
      throw ConfigError("checkpoint '" + path.string() + "' not found");
    auto c = load_checkpoint(path);
    if (c.fingerprint != doc.fingerprint)
      throw ConfigError("checkpoint '" + path.string() + "' was trained on scenario " +
                        c.fingerprint + ", not " + doc.fingerprint);
    if (c.net.input_size() != feature_size(doc.scenario) ||
        c.net.output_size() != doc.scenario.num_actions())
      throw ConfigError("checkpoint '" + path.string() + "': network shape does not fit scenario");
    nets.push_back(std::move(c.net));
  }
  return nets;
}

}  // namespace htlm
