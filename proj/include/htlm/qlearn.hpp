#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "htlm/belief.hpp"
#include "htlm/env.hpp"
#include "htlm/qnet.hpp"
#include "htlm/random.hpp"
#include "htlm/replay.hpp"
#include "htlm/reward.hpp"
#include "htlm/scenario.hpp"

namespace htlm {

enum class Optimizer { sgd, adam };

struct TrainConfig {
  int episodes = 5000;
  std::optional<double> gamma;  // defaults to the scenario discount
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::optional<int> epsilon_decay_episodes;  // defaults to 80% of `episodes`
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t replay_capacity = 100000;
  std::size_t target_sync_period = 200;
  std::vector<std::size_t> hidden{64, 64};
  double grad_clip = 10.0;
  Optimizer optimizer = Optimizer::sgd;
  double reward_scale = 0.01;  // rewards are multiplied by this before storage
  bool center_rewards = true;  // subtract the agent's top level reward before scaling
  bool stop_at_completion = false;
  bool bootstrap_at_horizon = true;  // treat the horizon as a time limit, not a terminal
  std::uint64_t seed = 1;
};

inline void validate(const TrainConfig& tc) {
  using detail::require;
  require(tc.episodes >= 0, "train.episodes: must be non-negative");
  if (tc.gamma) require(*tc.gamma > 0.0 && *tc.gamma <= 1.0, "train.gamma: must lie in (0,1]");
  require(tc.epsilon_start >= 0.0 && tc.epsilon_start <= 1.0,
          "train.epsilon_start: must lie in [0,1]");
  require(tc.epsilon_end >= 0.0 && tc.epsilon_end <= 1.0, "train.epsilon_end: must lie in [0,1]");
  if (tc.epsilon_decay_episodes)
    require(*tc.epsilon_decay_episodes >= 0, "train.epsilon_decay_episodes: must be >= 0");
  require(tc.learning_rate > 0.0, "train.learning_rate: must be positive");
  require(tc.batch_size > 0, "train.batch_size: must be positive");
  require(tc.replay_capacity > 0, "train.replay_capacity: must be positive");
  require(tc.target_sync_period > 0, "train.target_sync_period: must be positive");
  require(tc.grad_clip > 0.0, "train.grad_clip: must be positive");
  require(tc.reward_scale > 0.0, "train.reward_scale: must be positive");
  for (auto h : tc.hidden) require(h > 0, "train.hidden: layer widths must be positive");
}

// Linear decay from epsilon_start to epsilon_end over the decay horizon.
inline double epsilon_at(const TrainConfig& tc, int episode) {
  const int horizon = tc.epsilon_decay_episodes.value_or(static_cast<int>(0.8 * tc.episodes));
  if (horizon <= 0 || episode >= horizon) return tc.epsilon_end;
  const double frac = static_cast<double>(episode) / static_cast<double>(horizon);
  return tc.epsilon_start + (tc.epsilon_end - tc.epsilon_start) * frac;
}

inline std::vector<std::size_t> network_dims(const ScenarioConfig& cfg,
                                             const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> dims{feature_size(cfg)};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(cfg.num_actions());
  return dims;
}

// Highest-valued action of the reduced space; ties go to the lowest index.
inline ActionId best_action(const ScenarioConfig& cfg, const Eigen::VectorXd& q,
                            ActionId previous) {
  const auto legal = reduced_actions(cfg, previous);
  ActionId best = legal.front();
  for (auto a : legal)
    if (q[static_cast<Eigen::Index>(a.value)] > q[static_cast<Eigen::Index>(best.value)]) best = a;
  return best;
}

inline double max_legal_q(const ScenarioConfig& cfg, const Eigen::VectorXd& q, ActionId previous) {
  return q[static_cast<Eigen::Index>(best_action(cfg, q, previous).value)];
}

inline ActionId select_action(const ScenarioConfig& cfg, const QNet& net, const KnowledgeState& k,
                              double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw ContractViolation("select_action: epsilon must lie in [0,1]");
  if (epsilon > 0.0 && uniform01(rng) < epsilon) {
    const auto legal = reduced_actions(cfg, k.previous);
    return legal[uniform_index(rng, legal.size())];
  }
  return best_action(cfg, net.forward(encode(cfg, k)), k.previous);
}

// Deterministic greedy policy over a frozen network.
inline std::function<ActionId(const KnowledgeState&)> greedy_policy(const ScenarioConfig& cfg,
                                                                    const QNet& net) {
  return [&cfg, &net](const KnowledgeState& k) {
    return best_action(cfg, net.forward(encode(cfg, k)), k.previous);
  };
}

inline double td_target(const ScenarioConfig& cfg, const TransitionRecord& rec,
                        const QNet& target_net, double gamma) {
  if (rec.terminal || gamma == 0.0) return rec.r;
  const auto q = target_net.forward(encode(cfg, rec.k_next));
  return rec.r + gamma * max_legal_q(cfg, q, rec.k_next.previous);
}

struct StepSettings {
  double gamma = 0.95;
  double learning_rate = 1e-3;
  double grad_clip = 10.0;
  AdamState* adam = nullptr;  // plain SGD when null
};

// One gradient-descent step on the mean squared TD error of the batch.
// Returns the loss before the update.
inline double train_step(const ScenarioConfig& cfg, QNet& net, const QNet& target_net,
                         std::span<const TransitionRecord* const> batch,
                         const StepSettings& s) {
  if (batch.empty()) throw ContractViolation("train_step: empty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto width = static_cast<Eigen::Index>(feature_size(cfg));
  Eigen::MatrixXd x(width, n);
  Eigen::MatrixXd x_next(width, n);
  std::vector<std::size_t> actions(batch.size());
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& rec = *batch[static_cast<std::size_t>(b)];
    x.col(b) = encode(cfg, rec.k);
    x_next.col(b) = encode(cfg, rec.k_next);
    actions[static_cast<std::size_t>(b)] = rec.a.value;
  }
  const Eigen::MatrixXd q_next = target_net.forward(x_next);
  std::vector<double> targets(batch.size());
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& rec = *batch[static_cast<std::size_t>(b)];
    double y = rec.r;
    if (!rec.terminal && s.gamma != 0.0)
      y += s.gamma * max_legal_q(cfg, q_next.col(b), rec.k_next.previous);
    targets[static_cast<std::size_t>(b)] = y;
  }

  QNet::Gradients g;
  const double loss = net.loss(x, actions, targets, &g);
  const double norm = std::sqrt(g.squared_norm());
  if (norm > s.grad_clip) {
    const double shrink = s.grad_clip / norm;
    for (auto& w : g.weights) w *= shrink;
    for (auto& b : g.biases) b *= shrink;
  }
  if (s.adam) {
    s.adam->step(net, g, s.learning_rate);
  } else {
    net.apply_gradient(g, s.learning_rate);
  }
  return loss;
}

struct EpisodeStats {
  int episode = 0;
  double mean_loss = 0.0;    // over all train steps of all agents; 0 if none ran
  double mean_reward = 0.0;  // per-agent undiscounted episode return, averaged
  double epsilon = 0.0;
};

struct TrainResult {
  std::vector<QNet> nets;
  std::vector<EpisodeStats> curve;
  BeliefDiagnostics diagnostics;
  std::size_t illegal_actions = 0;  // records outside the reduced space; always 0
};

// Optional observers of the training loop, used by tests and tooling.
struct TrainHooks {
  std::function<void(std::size_t agent, const TransitionRecord&)> on_record;
  // Called after every environment step with the total step count so far.
  std::function<void(std::size_t env_steps, const std::vector<QNet>& targets)> after_step;
};

// Runs one episode step for the whole team: decisions, world step,
// observations, broadcast, belief updates. Decisions are supplied by the caller.
struct TeamStep {
  WorldState next;
  std::vector<Observation> observations;
  std::vector<Message> messages;
  std::vector<KnowledgeState> knowledge;
};

inline TeamStep advance_team(const ScenarioConfig& cfg, const WorldState& world,
                             const std::vector<KnowledgeState>& knowledge,
                             const JointAssignment& assignment, Rng& rng,
                             BeliefDiagnostics* diagnostics) {
  TeamStep out;
  out.next = step_world(cfg, world, assignment, rng);
  out.observations.reserve(cfg.num_agents());
  for (std::size_t i = 0; i < cfg.num_agents(); ++i)
    out.observations.push_back(observe(cfg, i, out.next, assignment[i], rng));
  out.messages = broadcast(cfg, out.observations);
  out.knowledge.reserve(cfg.num_agents());
  for (std::size_t i = 0; i < cfg.num_agents(); ++i)
    out.knowledge.push_back(KnowledgeState{
        update_belief(cfg, knowledge[i].belief, assignment, out.observations[i], out.messages,
                      diagnostics),
        assignment[i]});
  return out;
}

// Decentralized deep Q-learning: each agent owns its network, target network,
// replay memory, reward configuration and belief. Agents interact only
// through the world and the broadcast messages.
inline TrainResult train(const ScenarioConfig& cfg, const std::vector<RewardConfig>& rewards,
                         const TrainConfig& tc, const TrainHooks* hooks = nullptr) {
  validate(cfg);
  validate(tc);
  if (rewards.size() != cfg.num_agents())
    throw ConfigError("reward: need one reward configuration per agent");
  for (const auto& rc : rewards) validate(rc, cfg);

  Rng rng(substream_seed(tc.seed, "train"));
  const auto dims = network_dims(cfg, tc.hidden);
  const std::size_t n = cfg.num_agents();
  const StepSettings settings{tc.gamma.value_or(cfg.discount), tc.learning_rate, tc.grad_clip};

  TrainResult result;
  std::vector<QNet> targets;
  std::vector<ReplayBuffer> memories;
  std::vector<CostMatrix> costs;
  std::vector<AdamState> adam;
  std::vector<double> offsets(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (tc.center_rewards) offsets[i] = rewards[i].level_rewards.front();
    result.nets.push_back(QNet::initialized(dims, rng));
    targets.push_back(result.nets.back());
    adam.emplace_back(result.nets.back());
    memories.emplace_back(tc.replay_capacity);
    costs.push_back(build_cost_matrix(cfg, rewards[i].traversing_cost));
  }

  std::size_t env_steps = 0;
  for (int episode = 0; episode < tc.episodes; ++episode) {
    const double epsilon = epsilon_at(tc, episode);
    WorldState world = initial_world(cfg);
    std::vector<KnowledgeState> knowledge;
    for (std::size_t i = 0; i < n; ++i) knowledge.push_back(initial_knowledge(cfg, i));

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::vector<double> returns(n, 0.0);

    for (int t = 0; t < cfg.horizon; ++t) {
      JointAssignment assignment(n);
      for (std::size_t i = 0; i < n; ++i)
        assignment[i] = select_action(cfg, result.nets[i], knowledge[i], epsilon, rng);

      TeamStep step = advance_team(cfg, world, knowledge, assignment, rng, &result.diagnostics);
      const bool last = t + 1 == cfg.horizon || (tc.stop_at_completion && step.next.complete());
      const bool terminal = (t + 1 == cfg.horizon && !tc.bootstrap_at_horizon) ||
                            (tc.stop_at_completion && step.next.complete());

      for (std::size_t i = 0; i < n; ++i) {
        if (!in_reduced_actions(cfg, knowledge[i].previous, assignment[i]))
          ++result.illegal_actions;
        const double r = total_reward(cfg, rewards[i], costs[i], knowledge[i].previous,
                                      step.knowledge[i].belief, assignment[i], cfg.agents[i]);
        returns[i] += r;
        memories[i].push(TransitionRecord{knowledge[i], assignment[i], step.knowledge[i],
                                          (r - offsets[i]) * tc.reward_scale, terminal});
        if (hooks && hooks->on_record) hooks->on_record(i, memories[i].at(memories[i].size() - 1));
        if (memories[i].size() >= tc.batch_size) {
          const auto batch = memories[i].sample(tc.batch_size, rng);
          StepSettings s = settings;
          if (tc.optimizer == Optimizer::adam) s.adam = &adam[i];
          loss_sum += train_step(cfg, result.nets[i], targets[i], batch, s);
          ++loss_count;
        }
      }

      ++env_steps;
      if (env_steps % tc.target_sync_period == 0)
        for (std::size_t i = 0; i < n; ++i) targets[i] = result.nets[i];
      if (hooks && hooks->after_step) hooks->after_step(env_steps, targets);

      world = std::move(step.next);
      knowledge = std::move(step.knowledge);
      if (last) break;
    }

    EpisodeStats stats;
    stats.episode = episode;
    stats.mean_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    double total = 0.0;
    for (double r : returns) total += r;
    stats.mean_reward = total / static_cast<double>(n);
    stats.epsilon = epsilon;
    result.curve.push_back(stats);
  }
  return result;
}

}  // namespace htlm
