#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <vector>

#include "htlm/belief.hpp"
#include "htlm/env.hpp"
#include "htlm/qlearn.hpp"
#include "htlm/qnet.hpp"
#include "htlm/random.hpp"
#include "htlm/scenario.hpp"

namespace htlm {

// Decisions and true task levels of one trial, one entry per step.
struct Timeline {
  std::vector<JointAssignment> decisions;  // decisions[t][agent]
  std::vector<std::vector<int>> levels;    // true levels after step t
};

struct EvalReport {
  int trials = 0;
  int horizon = 0;
  std::vector<std::optional<int>> completion_steps;  // nullopt: not completed within h
  std::vector<double> unused_capability;  // per trial, per agent per step, over all h steps
  std::vector<int> idle_count;            // team total up to completion
  std::vector<int> reassignment_count;    // team total up to completion
  std::vector<Timeline> timelines;
};

struct Statistic {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t count = 0;
};

template <typename Range>
Statistic summarize(const Range& values) {
  Statistic s;
  double sum = 0.0;
  for (double v : values) {
    sum += v;
    ++s.count;
  }
  if (s.count == 0) return s;
  s.mean = sum / static_cast<double>(s.count);
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.standard_error = std::sqrt(ss / static_cast<double>(s.count - 1)) /
                       std::sqrt(static_cast<double>(s.count));
  }
  return s;
}

struct EvalSummary {
  Statistic completion_step;  // completed trials only
  double failure_rate = 0.0;
  Statistic unused_capability;
  double unused_fraction = 0.0;  // unused capability / mean agent capability
  Statistic idle_count;
  Statistic reassignment_count;
};

inline double mean_capability_sum(const ScenarioConfig& cfg) {
  double total = 0.0;
  for (const auto& a : cfg.agents) total += a.capability_sum();
  return total / static_cast<double>(cfg.num_agents());
}

inline EvalSummary summarize(const ScenarioConfig& cfg, const EvalReport& rep) {
  EvalSummary s;
  std::vector<double> done;
  for (const auto& c : rep.completion_steps)
    if (c) done.push_back(*c);
  s.completion_step = summarize(done);
  s.failure_rate = rep.trials ? 1.0 - static_cast<double>(done.size()) / rep.trials : 0.0;
  s.unused_capability = summarize(rep.unused_capability);
  const double cap = mean_capability_sum(cfg);
  s.unused_fraction = cap > 0.0 ? s.unused_capability.mean / cap : 0.0;
  std::vector<double> idle(rep.idle_count.begin(), rep.idle_count.end());
  std::vector<double> moves(rep.reassignment_count.begin(), rep.reassignment_count.end());
  s.idle_count = summarize(idle);
  s.reassignment_count = summarize(moves);
  return s;
}

// Greedy rollouts of frozen networks for the full horizon. Agents listed in
// `inactive` (indices) idle at their current location every step. Trial i
// draws from its own random stream, so results do not depend on trial order.
inline EvalReport evaluate(const ScenarioConfig& cfg, const std::vector<QNet>& nets, int trials,
                           std::uint64_t seed, const std::set<std::size_t>& inactive = {}) {
  validate(cfg);
  if (trials < 1) throw ContractViolation("evaluate: need at least one trial");
  if (nets.size() != cfg.num_agents())
    throw ContractViolation("evaluate: need one network per agent");
  for (auto i : inactive)
    if (i >= cfg.num_agents()) throw ContractViolation("evaluate: inactive agent out of range");

  const std::size_t n = cfg.num_agents();
  EvalReport rep;
  rep.trials = trials;
  rep.horizon = cfg.horizon;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(substream_seed(seed, "eval", static_cast<std::uint64_t>(trial)));
    WorldState world = initial_world(cfg);
    std::vector<KnowledgeState> knowledge;
    for (std::size_t i = 0; i < n; ++i) knowledge.push_back(initial_knowledge(cfg, i));

    Timeline tl;
    std::optional<int> completed;
    double unused = 0.0;
    int idle = 0;
    int moves = 0;
    for (int t = 0; t < cfg.horizon; ++t) {
      JointAssignment assignment(n);
      for (std::size_t i = 0; i < n; ++i) {
        const ActionId prev = knowledge[i].previous;
        assignment[i] = inactive.count(i)
                            ? cfg.idle_at(cfg.location_of(prev))
                            : best_action(cfg, nets[i].forward(encode(cfg, knowledge[i])), prev);
        if (cfg.is_idle(assignment[i])) unused += cfg.agents[i].capability_sum();
        if (!completed) {
          if (cfg.is_idle(assignment[i])) ++idle;
          if (cfg.location_of(assignment[i]) != cfg.location_of(prev)) ++moves;
        }
      }
      TeamStep step = advance_team(cfg, world, knowledge, assignment, rng, nullptr);
      tl.decisions.push_back(assignment);
      tl.levels.push_back(step.next.levels);
      if (!completed && step.next.complete()) completed = t + 1;
      world = std::move(step.next);
      knowledge = std::move(step.knowledge);
    }
    rep.completion_steps.push_back(completed);
    rep.unused_capability.push_back(unused / static_cast<double>(n * cfg.horizon));
    rep.idle_count.push_back(idle);
    rep.reassignment_count.push_back(moves);
    rep.timelines.push_back(std::move(tl));
  }
  return rep;
}

using TypeVector = std::array<double, kNumTaskTypes>;

// u_k per agent: capability of type k spent, summed over the steps of each
// trial and averaged over trials.
inline std::vector<TypeVector> capability_usage(const ScenarioConfig& cfg, const EvalReport& rep) {
  std::vector<TypeVector> usage(cfg.num_agents(), TypeVector{});
  if (rep.timelines.empty()) return usage;
  for (const auto& tl : rep.timelines)
    for (const auto& joint : tl.decisions)
      for (std::size_t i = 0; i < joint.size(); ++i) {
        if (cfg.is_idle(joint[i])) continue;
        const auto k = static_cast<std::size_t>(cfg.tasks[joint[i].value].type);
        usage[i][k] += cfg.agents[i].capability[k];
      }
  for (auto& u : usage)
    for (auto& v : u) v /= static_cast<double>(rep.timelines.size());
  return usage;
}

// Share of all (trial, step, agent) task assignments that went to each type.
inline TypeVector task_urgency(const ScenarioConfig& cfg, const EvalReport& rep) {
  TypeVector counts{};
  for (const auto& tl : rep.timelines)
    for (const auto& joint : tl.decisions)
      for (auto a : joint)
        if (!cfg.is_idle(a)) counts[static_cast<std::size_t>(cfg.tasks[a.value].type)] += 1.0;
  double total = 0.0;
  for (double c : counts) total += c;
  if (total == 0.0)
    throw ContractViolation("task_urgency: no task assignments, urgency weights are undefined");
  for (auto& c : counts) c /= total;
  return counts;
}

inline std::vector<double> importance(const std::vector<TypeVector>& usage,
                                      const TypeVector& weights) {
  std::vector<double> zeta;
  zeta.reserve(usage.size());
  for (const auto& u : usage) {
    double z = 0.0;
    for (std::size_t k = 0; k < kNumTaskTypes; ++k) z += weights[k] * u[k];
    zeta.push_back(z);
  }
  return zeta;
}

struct ImportanceReport {
  std::vector<CapabilityVector> capability;
  std::vector<TypeVector> usage;
  std::vector<double> zeta;
  TypeVector urgency{};

  std::size_t least_important() const {
    return static_cast<std::size_t>(std::min_element(zeta.begin(), zeta.end()) - zeta.begin());
  }
  std::size_t most_important() const {
    return static_cast<std::size_t>(std::max_element(zeta.begin(), zeta.end()) - zeta.begin());
  }
};

inline ImportanceReport importance_report(const ScenarioConfig& cfg, const EvalReport& rep) {
  ImportanceReport out;
  for (const auto& a : cfg.agents) out.capability.push_back(a.capability);
  out.usage = capability_usage(cfg, rep);
  out.urgency = task_urgency(cfg, rep);
  out.zeta = importance(out.usage, out.urgency);
  return out;
}

struct InactivationRun {
  std::optional<std::size_t> inactive;  // agent index; nullopt for the baseline
  EvalReport report;
  EvalSummary summary;
};

// Baseline plus one run per inactivated agent, all on the same random streams.
inline std::vector<InactivationRun> inactivation_study(
    const ScenarioConfig& cfg, const std::vector<QNet>& nets, int trials, std::uint64_t seed,
    const std::optional<std::vector<std::size_t>>& only = std::nullopt) {
  std::vector<InactivationRun> runs;
  auto run = [&](std::optional<std::size_t> agent) {
    std::set<std::size_t> off;
    if (agent) off.insert(*agent);
    InactivationRun r{agent, evaluate(cfg, nets, trials, seed, off), {}};
    r.summary = summarize(cfg, r.report);
    runs.push_back(std::move(r));
  };
  run(std::nullopt);
  if (only) {
    for (auto i : *only) run(i);
  } else {
    for (std::size_t i = 0; i < cfg.num_agents(); ++i) run(i);
  }
  return runs;
}

}  // namespace htlm
