#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "htlm/belief.hpp"
#include "htlm/scenario.hpp"

namespace htlm {

struct RewardConfig {
  std::vector<double> level_rewards{100.0, 25.0, 10.0, 5.0, 0.0};  // index 0 = complete
  double belief_threshold = 0.8;
  double idle_reward = 0.5;
  double excess_penalty = 0.5;
  int excess_margin = 2;
  double traversing_cost = -2.0;
};

inline constexpr double kForbidden = -std::numeric_limits<double>::infinity();

// Reassignment cost T_RP indexed (previous, next).
using CostMatrix = Eigen::MatrixXd;

inline void validate(const RewardConfig& rc, const ScenarioConfig& cfg) {
  using detail::require;
  require(rc.level_rewards.size() == cfg.levels(),
          "reward.level_rewards: need one entry per severity level");
  for (std::size_t l = 1; l < rc.level_rewards.size(); ++l)
    require(rc.level_rewards[l - 1] > rc.level_rewards[l],
            "reward.level_rewards: must be strictly decreasing in level");
  require(rc.belief_threshold > 0.0 && rc.belief_threshold <= 1.0,
          "reward.belief_threshold: must lie in (0,1]");
  require(rc.idle_reward >= 0.0, "reward.idle_reward: must be non-negative");
  require(rc.excess_penalty >= 0.0, "reward.excess_penalty: must be non-negative");
  require(rc.excess_margin >= 0, "reward.excess_margin: must be non-negative");
  require(rc.traversing_cost <= 0.0, "reward.traversing_cost: must be <= 0");
}

// True when the largest per-step load-management term stays below the
// smallest gap between level rewards, which keeps completion the primary
// objective. The high-reassignment preset deliberately breaks this.
inline bool load_terms_dominated(const RewardConfig& rc) {
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t l = 1; l < rc.level_rewards.size(); ++l)
    min_gap = std::min(min_gap, rc.level_rewards[l - 1] - rc.level_rewards[l]);
  return rc.idle_reward + rc.excess_penalty + std::abs(rc.traversing_cost) < min_gap;
}

// Named presets on the {no,with}_idle x {no,medium,high}_trp grid.
// Preset names are <idle>_idle_<trp>_trp; a bare "idle_<trp>_trp" means "with".
inline RewardConfig reward_preset(const std::string& given, const RewardConfig& base = {}) {
  RewardConfig rc = base;
  const std::string name = given.rfind("idle_", 0) == 0 ? "with_" + given : given;
  const auto sep = name.find("_idle_");
  if (sep == std::string::npos) throw ConfigError("preset: unknown preset '" + given + "'");
  const std::string idle = name.substr(0, sep);
  const std::string trp = name.substr(sep + 6);
  if (idle == "no") {
    rc.idle_reward = 0.0;
    rc.excess_penalty = 0.0;
  } else if (idle == "with") {
    rc.idle_reward = 0.5;
    rc.excess_penalty = 0.5;
  } else {
    throw ConfigError("preset: unknown idle setting in '" + given + "'");
  }
  if (trp == "no_trp") {
    rc.traversing_cost = 0.0;
  } else if (trp == "medium_trp") {
    rc.traversing_cost = -2.0;
  } else if (trp == "high_trp") {
    rc.traversing_cost = -10.0;
  } else {
    throw ConfigError("preset: unknown reassignment setting in '" + given + "'");
  }
  return rc;
}

inline std::vector<std::string> reward_preset_names() {
  return {"no_idle_no_trp",   "no_idle_medium_trp",   "no_idle_high_trp",
          "with_idle_no_trp", "with_idle_medium_trp", "with_idle_high_trp"};
}

// Zero within a location, `tc` for any move onto a task elsewhere, forbidden
// for a move onto another location's idle spot.
inline CostMatrix build_cost_matrix(const ScenarioConfig& cfg, double tc) {
  if (tc > 0.0) throw ContractViolation("build_cost_matrix: traversing cost must be <= 0");
  const auto n = static_cast<Eigen::Index>(cfg.num_actions());
  CostMatrix m(n, n);
  for (Eigen::Index from = 0; from < n; ++from) {
    for (Eigen::Index to = 0; to < n; ++to) {
      const ActionId a0{static_cast<std::size_t>(from)};
      const ActionId a{static_cast<std::size_t>(to)};
      if (cfg.location_of(a0) == cfg.location_of(a)) {
        m(from, to) = 0.0;
      } else if (cfg.is_idle(a)) {
        m(from, to) = kForbidden;
      } else {
        m(from, to) = tc;
      }
    }
  }
  return m;
}

// All tasks plus the idle spot at the previous assignment's location, in
// ascending action order.
inline std::vector<ActionId> reduced_actions(const ScenarioConfig& cfg, ActionId previous) {
  if (previous.value >= cfg.num_actions())
    throw ContractViolation("reduced_actions: previous assignment outside the action set");
  std::vector<ActionId> out;
  out.reserve(cfg.num_tasks() + 1);
  for (std::size_t j = 0; j < cfg.num_tasks(); ++j) out.push_back(ActionId{j});
  out.push_back(cfg.idle_at(cfg.location_of(previous)));
  return out;
}

inline bool in_reduced_actions(const ScenarioConfig& cfg, ActionId previous, ActionId a) {
  return !cfg.is_idle(a) || cfg.location_of(a) == cfg.location_of(previous);
}

// Mean over tasks of the reward for each task's believed level. A task no
// level is believed for (below threshold) earns the worst-level reward.
inline double completion_reward(const ScenarioConfig& cfg, const RewardConfig& rc,
                                const BeliefState& b) {
  double total = 0.0;
  for (std::size_t j = 0; j < cfg.num_tasks(); ++j) {
    const auto level = believed_level(b.task(j), rc.belief_threshold);
    total += level ? rc.level_rewards[static_cast<std::size_t>(*level)] : rc.level_rewards.back();
  }
  return total / static_cast<double>(cfg.num_tasks());
}

inline double idle_incentive(const ScenarioConfig& cfg, const RewardConfig& rc,
                             const AgentSpec& agent, ActionId a, const BeliefState& b) {
  if (cfg.is_idle(a)) return rc.idle_reward;
  const auto level = believed_level(b.task(a.value), rc.belief_threshold);
  if (!level) return 0.0;
  const int capability = agent.capability_for(cfg.tasks[a.value].type);
  return capability >= *level + rc.excess_margin ? -rc.excess_penalty : 0.0;
}

inline double total_reward(const ScenarioConfig& cfg, const RewardConfig& rc,
                           const CostMatrix& cost, ActionId previous, const BeliefState& b,
                           ActionId a, const AgentSpec& agent) {
  if (a.value >= cfg.num_actions() || !in_reduced_actions(cfg, previous, a))
    throw ContractViolation("total_reward: action " + cfg.action_label(a) +
                            " is outside the reduced action space");
  return completion_reward(cfg, rc, b) + idle_incentive(cfg, rc, agent, a, b) +
         cost(static_cast<Eigen::Index>(previous.value), static_cast<Eigen::Index>(a.value));
}

}  // namespace htlm
