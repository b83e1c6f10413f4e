#pragma once

// Independent reference computations used only by the test suites.

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "htlm/belief.hpp"
#include "htlm/env.hpp"
#include "htlm/qnet.hpp"
#include "htlm/reward.hpp"
#include "htlm/scenario.hpp"

namespace oracle {

using htlm::ActionId;
using htlm::ScenarioConfig;

// Binomial pmf by direct factorial-free evaluation.
inline double binomial_pmf(int n, int k, double p) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c * std::pow(p, k) * std::pow(1.0 - p, n - k);
}

// Kernel written from the stated rules, without reusing the library routine.
inline std::vector<double> kernel(const ScenarioConfig& cfg, const htlm::TaskSpec& task,
                                  int demand, int cap, int fire_level) {
  const int L = cfg.num_levels;
  std::vector<double> out(static_cast<std::size_t>(L), 0.0);
  if (demand == 0) {
    out[0] = 1.0;
    return out;
  }
  if (task.type == htlm::TaskType::fire) {
    const double down = static_cast<double>(cap) / cfg.max_joint_capability;
    const double up = (cap == 0 && demand <= L - 2) ? cfg.growth_prob : 0.0;
    out[static_cast<std::size_t>(demand - 1)] += down;
    if (demand + 1 < L) out[static_cast<std::size_t>(demand + 1)] += up;
    out[static_cast<std::size_t>(demand)] += 1.0 - down - up;
    return out;
  }
  if (fire_level > cfg.fire_block_threshold) {
    out[static_cast<std::size_t>(demand)] = 1.0;
    return out;
  }
  for (int k = 0; k <= cap; ++k) {
    const int next = demand - std::min(demand, k);
    out[static_cast<std::size_t>(next)] += binomial_pmf(cap, k, cfg.rescue_success_prob);
  }
  return out;
}

inline double sensor(int reported, int truth, int sensing, int L) {
  const double q = std::min(1.0, 0.5 + 0.1 * sensing);
  if (reported == truth) return q;
  if (reported != truth - 1 && reported != truth + 1) return 0.0;
  int adjacent = 0;
  if (truth - 1 >= 0) ++adjacent;
  if (truth + 1 <= L - 1) ++adjacent;
  return (1.0 - q) / adjacent;
}

inline double channel(int reported, int truth, int comm, int L) {
  const double r = std::min(1.0, 0.5 + 0.1 * comm);
  return reported == truth ? r : (1.0 - r) / (L - 1);
}

// Exact Bayes over the enumerated joint demand space. The joint prior is
// the product of the given rows; rescue transitions use the kernel averaged
// over the prior fire marginal. Returns per-task marginals, or nullopt when
// the evidence has zero probability.
inline std::optional<std::vector<std::vector<double>>> joint_bayes(
    const ScenarioConfig& cfg, const std::vector<std::vector<double>>& prior,
    const htlm::JointAssignment& assignment, const htlm::Observation& own,
    const std::vector<htlm::Message>& messages) {
  const std::size_t p = cfg.num_tasks();
  const int L = cfg.num_levels;
  std::size_t states = 1;
  for (std::size_t j = 0; j < p; ++j) states *= static_cast<std::size_t>(L);
  auto decode = [&](std::size_t s) {
    std::vector<int> lv(p);
    for (std::size_t j = 0; j < p; ++j) {
      lv[j] = static_cast<int>(s % static_cast<std::size_t>(L));
      s /= static_cast<std::size_t>(L);
    }
    return lv;
  };

  std::vector<int> caps(p, 0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i].value >= p) continue;
    caps[assignment[i].value] +=
        cfg.agents[i].capability_for(cfg.tasks[assignment[i].value].type);
  }
  for (auto& c : caps) c = std::min(c, cfg.max_joint_capability);

  // Per-task transition matrices T_j[d][d'].
  std::vector<std::vector<std::vector<double>>> T(p);
  for (std::size_t j = 0; j < p; ++j) {
    T[j].assign(static_cast<std::size_t>(L), std::vector<double>(static_cast<std::size_t>(L), 0.0));
    const auto& task = cfg.tasks[j];
    for (int d = 0; d < L; ++d) {
      if (task.type == htlm::TaskType::fire) {
        T[j][static_cast<std::size_t>(d)] = kernel(cfg, task, d, caps[j], 0);
        continue;
      }
      const std::size_t f = cfg.task_index(*task.coupled_fire_task);
      for (int fl = 0; fl < L; ++fl) {
        const auto k = kernel(cfg, task, d, caps[j], fl);
        for (int n = 0; n < L; ++n)
          T[j][static_cast<std::size_t>(d)][static_cast<std::size_t>(n)] +=
              prior[f][static_cast<std::size_t>(fl)] * k[static_cast<std::size_t>(n)];
      }
    }
  }

  std::vector<double> post(states, 0.0);
  double total = 0.0;
  for (std::size_t s_next = 0; s_next < states; ++s_next) {
    const auto next = decode(s_next);
    double pred = 0.0;
    for (std::size_t s = 0; s < states; ++s) {
      const auto cur = decode(s);
      double pr = 1.0;
      double tr = 1.0;
      for (std::size_t j = 0; j < p; ++j) {
        pr *= prior[j][static_cast<std::size_t>(cur[j])];
        tr *= T[j][static_cast<std::size_t>(cur[j])][static_cast<std::size_t>(next[j])];
      }
      pred += pr * tr;
    }
    double like = 1.0;
    if (own.task)
      like *= sensor(*own.observed_level, next[*own.task], cfg.agents[own.agent].sensing, L);
    for (const auto& m : messages) {
      if (m.sender == own.agent) continue;
      like *= channel(m.reported_level, next[m.task], m.sender_communication, L);
    }
    post[s_next] = pred * like;
    total += post[s_next];
  }
  if (!(total > 0.0)) return std::nullopt;

  std::vector<std::vector<double>> marg(p, std::vector<double>(static_cast<std::size_t>(L), 0.0));
  for (std::size_t s = 0; s < states; ++s) {
    const auto lv = decode(s);
    for (std::size_t j = 0; j < p; ++j) marg[j][static_cast<std::size_t>(lv[j])] += post[s] / total;
  }
  return marg;
}

// Central finite-difference gradient of the batch loss for every parameter.
inline htlm::QNet::Gradients numeric_gradient(const htlm::QNet& net, const Eigen::MatrixXd& x,
                                              const std::vector<std::size_t>& actions,
                                              const std::vector<double>& targets,
                                              double h = 1e-6) {
  htlm::QNet probe = net;
  htlm::QNet::Gradients g;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto& w = probe.weights()[l];
    Eigen::MatrixXd gw(w.rows(), w.cols());
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const double keep = w(r, c);
        w(r, c) = keep + h;
        const double up = probe.loss(x, actions, targets);
        w(r, c) = keep - h;
        const double down = probe.loss(x, actions, targets);
        w(r, c) = keep;
        gw(r, c) = (up - down) / (2.0 * h);
      }
    g.weights.push_back(gw);
    auto& b = probe.biases()[l];
    Eigen::VectorXd gb(b.size());
    for (Eigen::Index k = 0; k < b.size(); ++k) {
      const double keep = b[k];
      b[k] = keep + h;
      const double up = probe.loss(x, actions, targets);
      b[k] = keep - h;
      const double down = probe.loss(x, actions, targets);
      b[k] = keep;
      gb[k] = (up - down) / (2.0 * h);
    }
    g.biases.push_back(gb);
  }
  return g;
}

// Knowledge point of a one-agent scenario with a deterministic kernel and
// perfect sensing: the true (== believed) levels and the previous assignment.
struct KnowledgePoint {
  std::vector<int> levels;
  std::size_t previous = 0;
  friend auto operator<=>(const KnowledgePoint&, const KnowledgePoint&) = default;
};

struct ToyOptimum {
  std::vector<KnowledgePoint> points;          // non-terminal, reachable from the start
  std::map<KnowledgePoint, std::size_t> best;  // optimal action per point
  bool unique = true;                          // optimum strictly better than the runner-up
};

// Exhaustive search over every deterministic stationary policy on the
// reachable knowledge-point graph of a single-agent scenario. Values are
// infinite-horizon discounted returns; a policy is optimal if its value is
// maximal at every point simultaneously.
inline ToyOptimum toy_optimum(const ScenarioConfig& cfg, const htlm::RewardConfig& rc,
                              double gamma) {
  const htlm::CostMatrix cost = htlm::build_cost_matrix(cfg, rc.traversing_cost);
  auto successor = [&](const KnowledgePoint& k, std::size_t a) {
    KnowledgePoint next;
    next.previous = a;
    next.levels = k.levels;
    for (std::size_t j = 0; j < cfg.num_tasks(); ++j) {
      const int cap = (a == j) ? std::min(cfg.agents[0].capability_for(cfg.tasks[j].type),
                                          cfg.max_joint_capability)
                               : 0;
      const auto dist = kernel(cfg, cfg.tasks[j], k.levels[j], cap, 0);
      for (std::size_t l = 0; l < dist.size(); ++l)
        if (dist[l] == 1.0) next.levels[j] = static_cast<int>(l);
    }
    return next;
  };
  auto reward = [&](const KnowledgePoint& k, std::size_t a, const KnowledgePoint& next) {
    htlm::BeliefState b(cfg.num_tasks(), cfg.levels());
    for (std::size_t j = 0; j < cfg.num_tasks(); ++j)
      b.task(j)[static_cast<std::size_t>(next.levels[j])] = 1.0;
    return htlm::total_reward(cfg, rc, cost, ActionId{k.previous}, b, ActionId{a},
                              cfg.agents[0]);
  };
  auto legal = [&](const KnowledgePoint& k) {
    std::vector<std::size_t> out;
    for (auto a : htlm::reduced_actions(cfg, ActionId{k.previous})) out.push_back(a.value);
    return out;
  };
  auto terminal = [](const KnowledgePoint& k) {
    for (int l : k.levels)
      if (l != 0) return false;
    return true;
  };

  KnowledgePoint start;
  for (const auto& t : cfg.tasks) start.levels.push_back(t.initial_level);
  start.previous = cfg.idle_at(cfg.agents[0].start_location).value;

  ToyOptimum out;
  std::set<KnowledgePoint> seen{start};
  std::vector<KnowledgePoint> frontier{start};
  while (!frontier.empty()) {
    const auto k = frontier.back();
    frontier.pop_back();
    if (terminal(k)) continue;
    out.points.push_back(k);
    for (auto a : legal(k)) {
      const auto n = successor(k, a);
      if (seen.insert(n).second) frontier.push_back(n);
    }
  }

  // Value of absorbing (complete) points under their best constant action.
  auto evaluate = [&](const std::map<KnowledgePoint, std::size_t>& policy) {
    std::map<KnowledgePoint, double> v;
    for (int it = 0; it < 2000; ++it) {
      std::map<KnowledgePoint, double> nv;
      for (const auto& k : out.points) {
        const auto a = policy.at(k);
        const auto n = successor(k, a);
        double cont = 0.0;
        if (terminal(n)) {
          // Complete stays complete; best per-step reward there forever.
          double best = -1e300;
          for (auto b : legal(n)) best = std::max(best, reward(n, b, successor(n, b)));
          cont = best / (1.0 - gamma);
        } else {
          cont = v.count(n) ? v[n] : 0.0;
        }
        nv[k] = reward(k, a, n) + gamma * cont;
      }
      v = std::move(nv);
    }
    return v;
  };

  std::vector<std::vector<std::size_t>> choices;
  for (const auto& k : out.points) choices.push_back(legal(k));
  std::vector<std::size_t> pick(out.points.size(), 0);
  std::optional<std::map<KnowledgePoint, double>> best_v;
  std::map<KnowledgePoint, std::size_t> best_pi;
  std::vector<std::map<KnowledgePoint, double>> all_values;
  while (true) {
    std::map<KnowledgePoint, std::size_t> pi;
    for (std::size_t i = 0; i < out.points.size(); ++i) pi[out.points[i]] = choices[i][pick[i]];
    const auto v = evaluate(pi);
    bool dominates = true;
    if (best_v)
      for (const auto& k : out.points)
        if (v.at(k) < best_v->at(k) - 1e-9) dominates = false;
    if (!best_v || dominates) {
      best_v = v;
      best_pi = pi;
    }
    all_values.push_back(v);
    std::size_t i = 0;
    while (i < pick.size() && ++pick[i] == choices[i].size()) pick[i++] = 0;
    if (i == pick.size()) break;
  }
  // Uniqueness: any other policy is strictly worse somewhere.
  std::size_t ties = 0;
  for (const auto& v : all_values) {
    bool equal = true;
    for (const auto& k : out.points)
      if (std::abs(v.at(k) - best_v->at(k)) > 1e-9) equal = false;
    if (equal) ++ties;
  }
  out.unique = ties == 1;
  out.best = best_pi;
  return out;
}

}  // namespace oracle
