#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "htlm/belief.hpp"
#include "htlm/io.hpp"
#include "htlm/random.hpp"
#include "htlm/scenario.hpp"

namespace support {

using namespace htlm;

inline std::filesystem::path scenario_path(const std::string& name) {
  return std::filesystem::path(HTLM_SCENARIO_DIR) / (name + ".scn");
}

inline ScenarioDocument shipped(const std::string& name) {
  return load_scenario(scenario_path(name));
}

inline AgentSpec agent(int id, int fire, int rescue, int sensing = 3, int comm = 3,
                       int start = 1) {
  AgentSpec a;
  a.id = id;
  a.capability = {fire, rescue};
  a.sensing = sensing;
  a.communication = comm;
  a.start_location = start;
  return a;
}

// One fire task at one location; the smallest legal world.
inline ScenarioConfig single_fire(int levels, int initial, std::vector<AgentSpec> agents) {
  ScenarioConfig cfg;
  cfg.name = "single_fire";
  cfg.num_levels = levels;
  cfg.locations = {1};
  cfg.idle_locations = {1};
  cfg.tasks = {TaskSpec{1, 1, TaskType::fire, initial, std::nullopt}};
  cfg.agents = std::move(agents);
  return cfg;
}

// Fire and coupled rescue at one location.
inline ScenarioConfig fire_and_rescue(int levels, int fire0, int rescue0,
                                      std::vector<AgentSpec> agents) {
  ScenarioConfig cfg;
  cfg.name = "fire_and_rescue";
  cfg.num_levels = levels;
  cfg.locations = {1};
  cfg.idle_locations = {1};
  cfg.tasks = {TaskSpec{1, 1, TaskType::fire, fire0, std::nullopt},
               TaskSpec{2, 1, TaskType::rescue, rescue0, 1}};
  cfg.agents = std::move(agents);
  return cfg;
}

// Two fire tasks at two sites.
inline ScenarioConfig two_sites(int levels, std::vector<AgentSpec> agents) {
  ScenarioConfig cfg;
  cfg.name = "two_sites";
  cfg.num_levels = levels;
  cfg.locations = {1, 2};
  cfg.idle_locations = {1, 2};
  cfg.tasks = {TaskSpec{1, 1, TaskType::fire, levels - 1, std::nullopt},
               TaskSpec{2, 2, TaskType::fire, levels - 1, std::nullopt}};
  cfg.agents = std::move(agents);
  return cfg;
}

inline std::vector<double> random_simplex(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) {
    x = uniform01(rng) < 0.2 ? 0.0 : uniform01(rng);
    s += x;
  }
  if (s == 0.0) {
    v[uniform_index(rng, n)] = 1.0;
    return v;
  }
  for (auto& x : v) x /= s;
  return v;
}

inline BeliefState random_belief(const ScenarioConfig& cfg, Rng& rng) {
  BeliefState b(cfg.num_tasks(), cfg.levels());
  for (std::size_t j = 0; j < cfg.num_tasks(); ++j) {
    const auto row = random_simplex(cfg.levels(), rng);
    std::copy(row.begin(), row.end(), b.task(j).begin());
  }
  return b;
}

inline JointAssignment random_assignment(const ScenarioConfig& cfg, Rng& rng) {
  JointAssignment a(cfg.num_agents());
  for (auto& x : a) x = ActionId{uniform_index(rng, cfg.num_actions())};
  return a;
}

inline double row_sum(std::span<const double> row) {
  double s = 0.0;
  for (double p : row) s += p;
  return s;
}

// Random world with p <= 2 tasks, L <= 3 levels and 1..3 agents.
inline ScenarioConfig random_small_scenario(Rng& rng) {
  const int L = 2 + static_cast<int>(uniform_index(rng, 2));
  std::vector<AgentSpec> agents;
  const std::size_t n = 1 + uniform_index(rng, 3);
  for (std::size_t i = 0; i < n; ++i)
    agents.push_back(agent(static_cast<int>(i + 1), static_cast<int>(uniform_index(rng, 4)),
                           static_cast<int>(uniform_index(rng, 4)),
                           static_cast<int>(uniform_index(rng, 6)),
                           static_cast<int>(uniform_index(rng, 5))));
  ScenarioConfig cfg;
  switch (uniform_index(rng, 3)) {
    case 0:
      cfg = single_fire(L, L - 1, agents);
      break;
    case 1:
      cfg = fire_and_rescue(L, L - 1, L - 1, agents);
      break;
    default:
      cfg = two_sites(L, agents);
      for (auto& a : cfg.agents) a.start_location = 1 + static_cast<int>(uniform_index(rng, 2));
      break;
  }
  cfg.fire_block_threshold = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(L)));
  cfg.rescue_success_prob = uniform01(rng);
  cfg.growth_prob = uniform01(rng) < 0.5 ? 0.0 : 0.4 * uniform01(rng);
  return cfg;
}

inline std::vector<std::vector<double>> rows(const BeliefState& b) {
  std::vector<std::vector<double>> out;
  for (std::size_t j = 0; j < b.num_tasks(); ++j)
    out.emplace_back(b.task(j).begin(), b.task(j).end());
  return out;
}

}  // namespace support
