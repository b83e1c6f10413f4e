#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace htlm {

// Invalid user-supplied configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class TaskType : std::size_t { fire = 0, rescue = 1 };
inline constexpr std::size_t kNumTaskTypes = 2;

inline const char* to_string(TaskType t) { return t == TaskType::fire ? "fire" : "rescue"; }

inline TaskType parse_task_type(const std::string& s) {
  if (s == "fire") return TaskType::fire;
  if (s == "rescue") return TaskType::rescue;
  throw ConfigError("task_type: unknown value '" + s + "' (expected fire|rescue)");
}

// Index into the assignment set: tasks occupy [0, p), idle locations [p, p+q).
struct ActionId {
  std::size_t value = 0;
  friend auto operator<=>(const ActionId&, const ActionId&) = default;
};

using CapabilityVector = std::array<int, kNumTaskTypes>;

struct TaskSpec {
  int id = 0;
  int location = 0;
  TaskType type = TaskType::fire;
  int initial_level = 0;
  std::optional<int> coupled_fire_task;  // task id, rescue tasks only
};

struct AgentSpec {
  int id = 0;
  CapabilityVector capability{};  // indexed by TaskType
  int sensing = 0;
  int communication = 0;
  int start_location = 0;  // agents start idle at this location

  int capability_for(TaskType t) const { return capability[static_cast<std::size_t>(t)]; }
  int capability_sum() const { return capability[0] + capability[1]; }
};

struct ScenarioConfig {
  std::string name;
  std::vector<TaskSpec> tasks;
  std::vector<int> locations;
  std::vector<int> idle_locations;
  std::vector<AgentSpec> agents;
  int num_levels = 5;
  int max_joint_capability = 5;
  int horizon = 30;
  int fire_block_threshold = 2;
  double rescue_success_prob = 0.5;
  double growth_prob = 0.0;
  double discount = 0.95;
  bool uniform_prior = false;

  std::size_t num_tasks() const { return tasks.size(); }
  std::size_t num_idle() const { return idle_locations.size(); }
  std::size_t num_actions() const { return tasks.size() + idle_locations.size(); }
  std::size_t num_agents() const { return agents.size(); }
  std::size_t levels() const { return static_cast<std::size_t>(num_levels); }

  bool is_idle(ActionId a) const { return a.value >= tasks.size(); }

  int location_of(ActionId a) const {
    if (a.value < tasks.size()) return tasks[a.value].location;
    if (a.value < num_actions()) return idle_locations[a.value - tasks.size()];
    throw ContractViolation("action index " + std::to_string(a.value) + " out of range");
  }

  ActionId idle_at(int location) const {
    const auto it = std::find(idle_locations.begin(), idle_locations.end(), location);
    if (it == idle_locations.end())
      throw ContractViolation("no idle location at location " + std::to_string(location));
    return ActionId{tasks.size() + static_cast<std::size_t>(it - idle_locations.begin())};
  }

  std::size_t task_index(int task_id) const {
    for (std::size_t j = 0; j < tasks.size(); ++j)
      if (tasks[j].id == task_id) return j;
    throw ConfigError("unknown task id " + std::to_string(task_id));
  }

  std::size_t agent_index(int agent_id) const {
    for (std::size_t i = 0; i < agents.size(); ++i)
      if (agents[i].id == agent_id) return i;
    throw ConfigError("unknown agent id " + std::to_string(agent_id));
  }

  // Index of the fire task a rescue task depends on.
  std::optional<std::size_t> coupled_index(std::size_t task) const {
    const auto& t = tasks.at(task);
    if (!t.coupled_fire_task) return std::nullopt;
    return task_index(*t.coupled_fire_task);
  }

  std::string action_label(ActionId a) const {
    if (!is_idle(a)) {
      const auto& t = tasks.at(a.value);
      return std::string(to_string(t.type)) + "@" + std::to_string(t.location);
    }
    return "idle@" + std::to_string(location_of(a));
  }
};

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}
}  // namespace detail

inline void validate(const ScenarioConfig& cfg) {
  using detail::require;
  require(cfg.num_levels >= 2, "num_levels: must be >= 2");
  require(cfg.horizon >= 1, "horizon: must be >= 1");
  require(cfg.max_joint_capability >= 1, "max_joint_capability: must be >= 1");
  require(cfg.rescue_success_prob >= 0.0 && cfg.rescue_success_prob <= 1.0,
          "rescue_success_prob: must lie in [0,1]");
  require(cfg.growth_prob >= 0.0 && cfg.growth_prob <= 1.0, "growth_prob: must lie in [0,1]");
  require(cfg.discount > 0.0 && cfg.discount <= 1.0, "discount: must lie in (0,1]");
  require(!cfg.tasks.empty(), "tasks: at least one task is required");
  require(!cfg.agents.empty(), "agents: at least one agent is required");

  std::vector<int> task_locations;
  for (std::size_t j = 0; j < cfg.tasks.size(); ++j) {
    const auto& t = cfg.tasks[j];
    const std::string where = "tasks[" + std::to_string(j) + "]";
    require(std::count(cfg.locations.begin(), cfg.locations.end(), t.location) == 1,
            where + ".location: " + std::to_string(t.location) + " is not a declared location");
    require(t.initial_level >= 0 && t.initial_level < cfg.num_levels,
            where + ".initial_level: out of [0, num_levels-1]");
    for (std::size_t k = 0; k < j; ++k)
      require(cfg.tasks[k].id != t.id, where + ".id: duplicate task id");
    if (std::find(task_locations.begin(), task_locations.end(), t.location) ==
        task_locations.end())
      task_locations.push_back(t.location);
  }
  for (std::size_t j = 0; j < cfg.tasks.size(); ++j) {
    const auto& t = cfg.tasks[j];
    const std::string where = "tasks[" + std::to_string(j) + "]";
    if (t.type == TaskType::fire) {
      require(!t.coupled_fire_task, where + ".coupled_fire_task: fire tasks cannot be coupled");
      continue;
    }
    require(t.coupled_fire_task.has_value(),
            where + ".coupled_fire_task: rescue tasks must reference a fire task");
    const auto it = std::find_if(cfg.tasks.begin(), cfg.tasks.end(),
                                 [&](const TaskSpec& o) { return o.id == *t.coupled_fire_task; });
    require(it != cfg.tasks.end(), where + ".coupled_fire_task: unknown task id");
    require(it->type == TaskType::fire, where + ".coupled_fire_task: must reference a fire task");
    require(it->location == t.location,
            where + ".coupled_fire_task: fire task must share the rescue task's location");
  }

  require(cfg.idle_locations.size() == task_locations.size(),
          "idle_locations: need exactly one idle location per distinct task location");
  for (int loc : task_locations)
    require(std::count(cfg.idle_locations.begin(), cfg.idle_locations.end(), loc) == 1,
            "idle_locations: missing idle location for location " + std::to_string(loc));

  for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
    const auto& a = cfg.agents[i];
    const std::string where = "agents[" + std::to_string(i) + "]";
    for (std::size_t k = 0; k < i; ++k)
      require(cfg.agents[k].id != a.id, where + ".id: duplicate agent id");
    for (int c : a.capability)
      require(c >= 0 && c <= cfg.max_joint_capability,
              where + ".capability: levels must lie in [0, max_joint_capability]");
    require(a.sensing >= 0 && a.sensing <= 5, where + ".sensing: must lie in [0,5]");
    require(a.communication >= 0 && a.communication <= 5,
            where + ".communication: must lie in [0,5]");
    require(std::count(cfg.idle_locations.begin(), cfg.idle_locations.end(), a.start_location) ==
                1,
            where + ".start_location: no idle location there");
  }
}

}  // namespace htlm
