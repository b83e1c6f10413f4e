#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "htlm/random.hpp"
#include "htlm/scenario.hpp"

namespace htlm {

// Ground-truth severity levels, hidden from the agents.
struct WorldState {
  std::vector<int> levels;
  int step = 0;

  bool complete() const {
    return std::all_of(levels.begin(), levels.end(), [](int l) { return l == 0; });
  }
};

// One entry per agent.
using JointAssignment = std::vector<ActionId>;

struct Observation {
  std::size_t agent = 0;  // agent index
  std::optional<std::size_t> task;
  std::optional<int> observed_level;

  bool empty() const { return !task.has_value(); }
};

struct Message {
  std::size_t sender = 0;  // agent index
  int sender_communication = 0;
  std::size_t task = 0;
  int reported_level = 0;
};

inline WorldState initial_world(const ScenarioConfig& cfg) {
  WorldState s;
  s.levels.reserve(cfg.num_tasks());
  for (const auto& t : cfg.tasks) s.levels.push_back(t.initial_level);
  return s;
}

inline void check_assignment(const ScenarioConfig& cfg, const JointAssignment& a) {
  if (a.size() != cfg.num_agents())
    throw ContractViolation("joint assignment has wrong number of entries");
  for (auto act : a)
    if (act.value >= cfg.num_actions()) throw ContractViolation("assignment outside the action set");
}

// Capped sum of the task-relevant capabilities of the agents assigned to `task`.
inline int joint_capability(const ScenarioConfig& cfg, const JointAssignment& assignment,
                            std::size_t task) {
  if (task >= cfg.num_tasks()) throw ConfigError("joint_capability: unknown task index");
  const TaskType type = cfg.tasks[task].type;
  int sum = 0;
  for (std::size_t i = 0; i < assignment.size() && i < cfg.num_agents(); ++i)
    if (assignment[i].value == task) sum += cfg.agents[i].capability_for(type);
  return std::min(sum, cfg.max_joint_capability);
}

inline std::vector<int> joint_capabilities(const ScenarioConfig& cfg,
                                           const JointAssignment& assignment) {
  std::vector<int> caps(cfg.num_tasks());
  for (std::size_t j = 0; j < caps.size(); ++j) caps[j] = joint_capability(cfg, assignment, j);
  return caps;
}

// Distribution over the next severity level of `task`.
//
// fire:   one level down with probability cap / max_cap; optional growth when
//         nobody works the task.
// rescue: blocked while the coupled fire is above the threshold, otherwise
//         each capability unit rescues one level with the success probability.
inline std::vector<double> transition_kernel(const ScenarioConfig& cfg, const TaskSpec& task,
                                             int demand, int joint_cap,
                                             std::optional<int> coupled_fire_level) {
  const int L = cfg.num_levels;
  if (demand < 0 || demand >= L) throw ContractViolation("transition_kernel: demand out of range");
  if (joint_cap < 0 || joint_cap > cfg.max_joint_capability)
    throw ContractViolation("transition_kernel: joint capability out of range");
  const bool rescue = task.type == TaskType::rescue;
  if (rescue != coupled_fire_level.has_value())
    throw ContractViolation(
        "transition_kernel: coupled fire level is required for rescue tasks only");

  std::vector<double> next(static_cast<std::size_t>(L), 0.0);
  if (demand == 0) {
    next[0] = 1.0;
    return next;
  }

  if (!rescue) {
    const double p_reduce =
        static_cast<double>(joint_cap) / static_cast<double>(cfg.max_joint_capability);
    double p_grow = 0.0;
    if (joint_cap == 0 && demand <= L - 2) p_grow = cfg.growth_prob;
    next[static_cast<std::size_t>(demand - 1)] += p_reduce;
    if (p_grow > 0.0) next[static_cast<std::size_t>(demand + 1)] += p_grow;
    next[static_cast<std::size_t>(demand)] += 1.0 - p_reduce - p_grow;
    return next;
  }

  const int fire = *coupled_fire_level;
  if (fire < 0 || fire >= L) throw ContractViolation("transition_kernel: fire level out of range");
  if (fire > cfg.fire_block_threshold || joint_cap == 0) {
    next[static_cast<std::size_t>(demand)] = 1.0;
    return next;
  }
  const double p = cfg.rescue_success_prob;
  // Binomial(joint_cap, p) successes, each removing one level.
  double binom = std::pow(1.0 - p, joint_cap);  // k = 0
  for (int k = 0; k <= joint_cap; ++k) {
    next[static_cast<std::size_t>(demand - std::min(demand, k))] += binom;
    if (k < joint_cap) {
      if (p >= 1.0) {
        binom = (k + 1 == joint_cap) ? 1.0 : 0.0;
      } else {
        binom *= static_cast<double>(joint_cap - k) / static_cast<double>(k + 1) * p / (1.0 - p);
      }
    }
  }
  return next;
}

inline WorldState step_world(const ScenarioConfig& cfg, const WorldState& state,
                             const JointAssignment& assignment, Rng& rng) {
  check_assignment(cfg, assignment);
  if (state.levels.size() != cfg.num_tasks())
    throw ContractViolation("step_world: state does not match scenario");
  WorldState next;
  next.levels.resize(state.levels.size());
  next.step = state.step + 1;
  for (std::size_t j = 0; j < cfg.num_tasks(); ++j) {
    const int demand = state.levels[j];
    if (demand == 0) {
      next.levels[j] = 0;
      continue;
    }
    std::optional<int> fire;
    if (const auto c = cfg.coupled_index(j)) fire = state.levels[*c];
    const auto dist =
        transition_kernel(cfg, cfg.tasks[j], demand, joint_capability(cfg, assignment, j), fire);
    next.levels[j] = static_cast<int>(sample_discrete(dist, rng));
  }
  return next;
}

inline double sensing_accuracy(int sensing) { return std::min(1.0, 0.5 + 0.1 * sensing); }
inline double communication_trust(int communication) {
  return std::min(1.0, 0.5 + 0.1 * communication);
}

// Probability of reporting `reported` when the true level is `truth`:
// correct with the sensing accuracy, otherwise uniform over adjacent levels.
inline double observation_likelihood(int reported, int truth, int sensing, int num_levels) {
  const double q = sensing_accuracy(sensing);
  if (reported == truth) return q;
  if (std::abs(reported - truth) != 1) return 0.0;
  const int neighbours = (truth > 0 ? 1 : 0) + (truth < num_levels - 1 ? 1 : 0);
  return (1.0 - q) / neighbours;
}

inline Observation observe(const ScenarioConfig& cfg, std::size_t agent, const WorldState& state,
                           ActionId own_action, Rng& rng) {
  if (own_action.value >= cfg.num_actions())
    throw ContractViolation("observe: action outside the action set");
  Observation obs;
  obs.agent = agent;
  if (cfg.is_idle(own_action)) return obs;
  const std::size_t task = own_action.value;
  const int truth = state.levels.at(task);
  int reported = truth;
  if (!bernoulli(rng, sensing_accuracy(cfg.agents.at(agent).sensing))) {
    const bool down = truth > 0;
    const bool up = truth < cfg.num_levels - 1;
    if (down && up) {
      reported = bernoulli(rng, 0.5) ? truth - 1 : truth + 1;
    } else if (down) {
      reported = truth - 1;
    } else if (up) {
      reported = truth + 1;
    }
  }
  obs.task = task;
  obs.observed_level = reported;
  return obs;
}

inline std::vector<Message> broadcast(const ScenarioConfig& cfg,
                                      std::span<const Observation> observations) {
  std::vector<Message> out;
  for (const auto& o : observations) {
    if (o.empty()) continue;
    out.push_back(Message{o.agent, cfg.agents.at(o.agent).communication, *o.task,
                          *o.observed_level});
  }
  return out;
}

}  // namespace htlm
