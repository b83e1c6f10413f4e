#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "htlm/env.hpp"
#include "htlm/scenario.hpp"

namespace htlm {

// Factored belief: one distribution over severity levels per task, stored
// task-major / level-minor (the same layout the Q-network consumes).
class BeliefState {
 public:
  BeliefState() = default;
  BeliefState(std::size_t tasks, std::size_t levels)
      : levels_(levels), probs_(tasks * levels, 0.0) {}

  std::size_t num_tasks() const { return levels_ == 0 ? 0 : probs_.size() / levels_; }
  std::size_t num_levels() const { return levels_; }

  std::span<double> task(std::size_t j) { return {probs_.data() + j * levels_, levels_}; }
  std::span<const double> task(std::size_t j) const {
    return {probs_.data() + j * levels_, levels_};
  }
  double operator()(std::size_t j, std::size_t level) const { return probs_[j * levels_ + level]; }

  std::span<const double> flat() const { return probs_; }

  friend bool operator==(const BeliefState&, const BeliefState&) = default;

 private:
  std::size_t levels_ = 0;
  std::vector<double> probs_;
};

struct KnowledgeState {
  BeliefState belief;
  ActionId previous;
};

// Counts posteriors that had to fall back to the prediction because every
// level was ruled out by the evidence.
struct BeliefDiagnostics {
  std::size_t zero_mass_fallbacks = 0;
};

inline BeliefState initial_belief(const ScenarioConfig& cfg) {
  BeliefState b(cfg.num_tasks(), cfg.levels());
  for (std::size_t j = 0; j < cfg.num_tasks(); ++j) {
    auto row = b.task(j);
    if (cfg.uniform_prior) {
      for (auto& p : row) p = 1.0 / static_cast<double>(row.size());
    } else {
      row[static_cast<std::size_t>(cfg.tasks[j].initial_level)] = 1.0;
    }
  }
  return b;
}

inline KnowledgeState initial_knowledge(const ScenarioConfig& cfg, std::size_t agent) {
  return KnowledgeState{initial_belief(cfg), cfg.idle_at(cfg.agents.at(agent).start_location)};
}

// Likelihood of a broadcast report: correct with the sender's trust level,
// otherwise uniform over the remaining levels.
inline double message_likelihood(int reported, int truth, int communication, int num_levels) {
  const double r = communication_trust(communication);
  return reported == truth ? r : (1.0 - r) / (num_levels - 1);
}

// Prediction for one task: sum over d of T(d -> d' | cap) b(d). Rescue tasks
// use the kernel averaged over the agent's belief about the coupled fire.
inline std::vector<double> predict_task(const ScenarioConfig& cfg, const BeliefState& b,
                                        std::size_t task, int joint_cap) {
  const std::size_t L = cfg.levels();
  std::vector<double> pred(L, 0.0);
  const auto row = b.task(task);
  const auto coupled = cfg.coupled_index(task);
  for (std::size_t d = 0; d < L; ++d) {
    if (row[d] == 0.0) continue;
    if (!coupled) {
      const auto k = transition_kernel(cfg, cfg.tasks[task], static_cast<int>(d), joint_cap,
                                       std::nullopt);
      for (std::size_t n = 0; n < L; ++n) pred[n] += k[n] * row[d];
      continue;
    }
    const auto fire_row = b.task(*coupled);
    for (std::size_t f = 0; f < L; ++f) {
      if (fire_row[f] == 0.0) continue;
      const auto k = transition_kernel(cfg, cfg.tasks[task], static_cast<int>(d), joint_cap,
                                       static_cast<int>(f));
      for (std::size_t n = 0; n < L; ++n) pred[n] += k[n] * row[d] * fire_row[f];
    }
  }
  return pred;
}

// Bayesian filter step: predict with the joint assignment, weight by the own
// observation and every received message, renormalize. Messages sent by the
// updating agent itself are skipped (its observation is already counted).
inline BeliefState update_belief(const ScenarioConfig& cfg, const BeliefState& b,
                                 const JointAssignment& assignment, const Observation& own_obs,
                                 std::span<const Message> messages,
                                 BeliefDiagnostics* diagnostics = nullptr) {
  if (b.num_tasks() != cfg.num_tasks() || b.num_levels() != cfg.levels())
    throw ContractViolation("update_belief: belief dimensions do not match scenario");
  check_assignment(cfg, assignment);
  const std::size_t L = cfg.levels();
  const int sensing = cfg.agents.at(own_obs.agent).sensing;

  BeliefState out(cfg.num_tasks(), L);
  for (std::size_t j = 0; j < cfg.num_tasks(); ++j) {
    const auto pred = predict_task(cfg, b, j, joint_capability(cfg, assignment, j));
    auto post = out.task(j);
    double total = 0.0;
    for (std::size_t d = 0; d < L; ++d) {
      double w = pred[d];
      if (w == 0.0) {
        post[d] = 0.0;
        continue;
      }
      const int level = static_cast<int>(d);
      if (own_obs.task && *own_obs.task == j)
        w *= observation_likelihood(*own_obs.observed_level, level, sensing, cfg.num_levels);
      for (const auto& m : messages) {
        if (m.task != j || m.sender == own_obs.agent) continue;
        w *= message_likelihood(m.reported_level, level, m.sender_communication, cfg.num_levels);
      }
      post[d] = w;
      total += w;
    }
    if (total > 0.0 && std::isfinite(total)) {
      for (auto& p : post) p /= total;
    } else {
      if (diagnostics) ++diagnostics->zero_mass_fallbacks;
      double pt = 0.0;
      for (double p : pred) pt += p;
      for (std::size_t d = 0; d < L; ++d) post[d] = pred[d] / pt;
    }
  }
  return out;
}

// Level the belief assigns at least `threshold` mass to; lowest level wins ties.
inline std::optional<int> believed_level(std::span<const double> probs, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw ContractViolation("believed_level: threshold must lie in (0,1]");
  for (std::size_t l = 0; l < probs.size(); ++l)
    if (probs[l] >= threshold) return static_cast<int>(l);
  return std::nullopt;
}

inline std::size_t feature_size(const ScenarioConfig& cfg) {
  return cfg.num_tasks() * cfg.levels() + cfg.num_actions();
}

// pL belief probabilities followed by a one-hot of the previous assignment.
inline Eigen::VectorXd encode(const ScenarioConfig& cfg, const KnowledgeState& k) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(feature_size(cfg)));
  const auto flat = k.belief.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) x[static_cast<Eigen::Index>(i)] = flat[i];
  x[static_cast<Eigen::Index>(flat.size() + k.previous.value)] = 1.0;
  return x;
}

}  // namespace htlm
