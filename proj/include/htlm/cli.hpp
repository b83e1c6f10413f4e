#pragma once

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "htlm/io.hpp"
#include "htlm/metrics.hpp"
#include "htlm/qlearn.hpp"

namespace htlm::cli {

namespace fs = std::filesystem;

struct Options {
  fs::path scenario;
  std::string preset;  // empty: the scenario file's own reward block
  int episodes = 5000;
  std::optional<int> trials;  // 500 for evaluate/importance, 200 for ablate
  std::uint64_t seed = 1;
  fs::path out;
  std::optional<fs::path> checkpoints;  // defaults to `out`
  std::vector<int> inactive;            // agent ids
  int timeline = 0;                     // steps per trial; 0 disables
  std::optional<int> agent;             // ablate: restrict to one agent id
  TrainConfig train;                    // episodes and seed are taken from above
};

struct Context {
  ScenarioDocument doc;
  std::vector<RewardConfig> rewards;
  std::string stamp;  // "# scenario=<fingerprint> seed=<seed>"
};

inline Context load_context(const Options& opt) {
  Context c;
  c.doc = load_scenario(opt.scenario);
  c.rewards = agent_rewards(c.doc, opt.preset);
  c.stamp = "# scenario=" + c.doc.fingerprint + " seed=" + std::to_string(opt.seed);
  return c;
}

inline void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
}

inline std::string preset_label(const Options& opt) {
  return opt.preset.empty() ? "scenario" : opt.preset;
}

inline json reward_json(const RewardConfig& rc) {
  return {{"level_rewards", rc.level_rewards},   {"belief_threshold", rc.belief_threshold},
          {"idle_reward", rc.idle_reward},       {"excess_penalty", rc.excess_penalty},
          {"excess_margin", rc.excess_margin},   {"traversing_cost", rc.traversing_cost}};
}

inline json train_json(const TrainConfig& tc, double gamma) {
  return {{"episodes", tc.episodes},
          {"gamma", gamma},
          {"epsilon_start", tc.epsilon_start},
          {"epsilon_end", tc.epsilon_end},
          {"epsilon_decay_episodes",
           tc.epsilon_decay_episodes.value_or(static_cast<int>(0.8 * tc.episodes))},
          {"learning_rate", tc.learning_rate},
          {"batch_size", tc.batch_size},
          {"replay_capacity", tc.replay_capacity},
          {"target_sync_period", tc.target_sync_period},
          {"hidden", tc.hidden},
          {"grad_clip", tc.grad_clip},
          {"optimizer", tc.optimizer == Optimizer::adam ? "adam" : "sgd"},
          {"reward_scale", tc.reward_scale},
          {"stop_at_completion", tc.stop_at_completion},
          {"bootstrap_at_horizon", tc.bootstrap_at_horizon},
          {"seed", tc.seed}};
}

inline std::string fixed(double v, int digits = 6) {
  std::ostringstream s;
  s << std::setprecision(digits) << std::fixed << v;
  return s.str();
}

inline json stat_json(const Statistic& s) {
  return {{"mean", s.mean}, {"standard_error", s.standard_error}, {"count", s.count}};
}

inline std::vector<std::size_t> agent_indices(const ScenarioConfig& cfg,
                                              const std::vector<int>& ids) {
  std::vector<std::size_t> out;
  for (int id : ids) out.push_back(cfg.agent_index(id));
  return out;
}

// ---- train -----------------------------------------------------------------

inline int cmd_train(const Options& opt, std::ostream& log) {
  const Context c = load_context(opt);
  prepare_out(opt.out);
  TrainConfig tc = opt.train;
  tc.episodes = opt.episodes;
  tc.seed = opt.seed;
  const TrainResult res = train(c.doc.scenario, c.rewards, tc);

  for (std::size_t i = 0; i < res.nets.size(); ++i) {
    const int id = c.doc.scenario.agents[i].id;
    save_checkpoint(opt.out / checkpoint_filename(id),
                    Checkpoint{res.nets[i], c.doc.fingerprint, opt.seed, id});
  }

  std::ostringstream csv;
  csv << c.stamp << "\n" << "episode,mean_loss,mean_reward,epsilon\n";
  csv << std::setprecision(17);
  for (const auto& e : res.curve)
    csv << e.episode << ',' << e.mean_loss << ',' << e.mean_reward << ',' << e.epsilon << '\n';
  write_text(opt.out / "training.csv", csv.str());

  json agents = json::array();
  for (std::size_t i = 0; i < c.rewards.size(); ++i)
    agents.push_back({{"id", c.doc.scenario.agents[i].id},
                      {"checkpoint", checkpoint_filename(c.doc.scenario.agents[i].id)},
                      {"reward", reward_json(c.rewards[i])}});
  json config{{"scenario_fingerprint", c.doc.fingerprint},
              {"preset", preset_label(opt)},
              {"train", train_json(tc, tc.gamma.value_or(c.doc.scenario.discount))},
              {"agents", agents}};
  json manifest{{"command", "train"},
                {"scenario", opt.scenario.filename().string()},
                {"scenario_fingerprint", c.doc.fingerprint},
                {"seed", opt.seed},
                {"config_hash", fingerprint_of(config)},
                {"config", config},
                {"zero_mass_fallbacks", res.diagnostics.zero_mass_fallbacks}};
  write_text(opt.out / "manifest.json", manifest.dump(2) + "\n");

  log << "trained " << res.nets.size() << " agents for " << tc.episodes << " episodes into "
      << opt.out.string() << "\n";
  return 0;
}

// ---- evaluate --------------------------------------------------------------

inline json summary_json(const EvalSummary& s) {
  return {{"completion_step", stat_json(s.completion_step)},
          {"failure_rate", s.failure_rate},
          {"unused_capability", stat_json(s.unused_capability)},
          {"unused_fraction", s.unused_fraction},
          {"idle_count", stat_json(s.idle_count)},
          {"reassignment_count", stat_json(s.reassignment_count)}};
}

inline int cmd_evaluate(const Options& opt, std::ostream& log) {
  const Context c = load_context(opt);
  const auto& cfg = c.doc.scenario;
  const auto nets = load_team(opt.checkpoints.value_or(opt.out), c.doc);
  prepare_out(opt.out);
  const int trials = opt.trials.value_or(500);
  if (opt.timeline < 0 || opt.timeline > cfg.horizon)
    throw ConfigError("timeline: must lie in [0, horizon]");
  const auto off = agent_indices(cfg, opt.inactive);
  const EvalReport rep =
      evaluate(cfg, nets, trials, opt.seed, std::set<std::size_t>(off.begin(), off.end()));
  const EvalSummary s = summarize(cfg, rep);

  std::ostringstream csv;
  csv << c.stamp << "\n"
      << "trial,completed,completion_step,unused_capability,idle_count,reassignment_count\n";
  csv << std::setprecision(17);
  for (int t = 0; t < trials; ++t) {
    const auto& done = rep.completion_steps[static_cast<std::size_t>(t)];
    csv << t << ',' << (done ? 1 : 0) << ',' << (done ? std::to_string(*done) : "") << ','
        << rep.unused_capability[static_cast<std::size_t>(t)] << ','
        << rep.idle_count[static_cast<std::size_t>(t)] << ','
        << rep.reassignment_count[static_cast<std::size_t>(t)] << '\n';
  }
  write_text(opt.out / "eval_trials.csv", csv.str());

  json summary{{"command", "evaluate"},
               {"scenario_fingerprint", c.doc.fingerprint},
               {"seed", opt.seed},
               {"trials", trials},
               {"horizon", cfg.horizon},
               {"inactive", opt.inactive},
               {"mean_capability_sum", mean_capability_sum(cfg)},
               {"summary", summary_json(s)}};
  write_text(opt.out / "eval_summary.json", summary.dump(2) + "\n");

  if (opt.timeline > 0) {
    std::ostringstream tl;
    tl << c.stamp << "\n" << "trial,step";
    for (const auto& a : cfg.agents) tl << ",agent_" << a.id;
    for (const auto& task : cfg.tasks) tl << ",level_" << task.id;
    tl << '\n';
    for (int t = 0; t < trials; ++t) {
      const auto& timeline = rep.timelines[static_cast<std::size_t>(t)];
      for (int step = 0; step < opt.timeline; ++step) {
        tl << t << ',' << step + 1;
        for (auto a : timeline.decisions[static_cast<std::size_t>(step)])
          tl << ',' << cfg.action_label(a);
        for (int l : timeline.levels[static_cast<std::size_t>(step)]) tl << ',' << l;
        tl << '\n';
      }
    }
    write_text(opt.out / "timeline.csv", tl.str());
  }

  log << "trials " << trials << "  completed " << fixed(100.0 * (1.0 - s.failure_rate), 1)
      << "%  completion step " << fixed(s.completion_step.mean, 2) << " +- "
      << fixed(s.completion_step.standard_error, 2) << "  unused "
      << fixed(100.0 * s.unused_fraction, 1) << "%  idle " << fixed(s.idle_count.mean, 2)
      << "  reassignments " << fixed(s.reassignment_count.mean, 2) << "\n";
  return 0;
}

// ---- importance ------------------------------------------------------------

inline int cmd_importance(const Options& opt, std::ostream& log) {
  const Context c = load_context(opt);
  const auto& cfg = c.doc.scenario;
  const auto nets = load_team(opt.checkpoints.value_or(opt.out), c.doc);
  prepare_out(opt.out);
  const int trials = opt.trials.value_or(500);
  const auto off = agent_indices(cfg, opt.inactive);
  const EvalReport rep =
      evaluate(cfg, nets, trials, opt.seed, std::set<std::size_t>(off.begin(), off.end()));
  ImportanceReport ir;
  try {
    ir = importance_report(cfg, rep);
  } catch (const ContractViolation&) {
    throw ConfigError("urgency undefined: the policies never assign any agent to a task");
  }

  std::ostringstream csv;
  csv << c.stamp << "\n" << "agent,c_fire,c_rescue,u_fire,u_rescue,zeta\n";
  csv << std::setprecision(17);
  json rows = json::array();
  for (std::size_t i = 0; i < cfg.num_agents(); ++i) {
    csv << cfg.agents[i].id << ',' << ir.capability[i][0] << ',' << ir.capability[i][1] << ','
        << ir.usage[i][0] << ',' << ir.usage[i][1] << ',' << ir.zeta[i] << '\n';
    rows.push_back({{"agent", cfg.agents[i].id},
                    {"capability", ir.capability[i]},
                    {"usage", ir.usage[i]},
                    {"zeta", ir.zeta[i]}});
  }
  write_text(opt.out / "importance.csv", csv.str());
  json doc{{"command", "importance"},
           {"scenario_fingerprint", c.doc.fingerprint},
           {"seed", opt.seed},
           {"trials", trials},
           {"urgency", ir.urgency},
           {"agents", rows},
           {"least_important", cfg.agents[ir.least_important()].id},
           {"most_important", cfg.agents[ir.most_important()].id}};
  write_text(opt.out / "importance.json", doc.dump(2) + "\n");

  log << cfg.name << ": W = [" << fixed(ir.urgency[0], 4) << ", " << fixed(ir.urgency[1], 4)
      << "]\n";
  log << "agent     C            U                  zeta\n";
  for (std::size_t i = 0; i < cfg.num_agents(); ++i)
    log << std::setw(5) << cfg.agents[i].id << "   [" << ir.capability[i][0] << ", "
        << ir.capability[i][1] << "]   [" << fixed(ir.usage[i][0], 2) << ", "
        << fixed(ir.usage[i][1], 2) << "]   " << fixed(ir.zeta[i], 2)
        << (i == ir.least_important() ? "  (least)" : "")
        << (i == ir.most_important() ? "  (most)" : "") << "\n";
  return 0;
}

// ---- ablate ----------------------------------------------------------------

inline int cmd_ablate(const Options& opt, std::ostream& log) {
  const Context c = load_context(opt);
  const auto& cfg = c.doc.scenario;
  const auto nets = load_team(opt.checkpoints.value_or(opt.out), c.doc);
  prepare_out(opt.out);
  const int trials = opt.trials.value_or(200);
  std::optional<std::vector<std::size_t>> only;
  if (opt.agent) only = std::vector<std::size_t>{cfg.agent_index(*opt.agent)};
  const auto runs =
      inactivation_study(cfg, nets, trials, substream_seed(opt.seed, "ablate"), only);

  auto column = [&](const InactivationRun& r) {
    return r.inactive ? "inactive_" + std::to_string(cfg.agents[*r.inactive].id)
                      : std::string("baseline");
  };
  std::ostringstream csv;
  csv << c.stamp << "\n" << "trial";
  for (const auto& r : runs) csv << ',' << column(r);
  csv << '\n';
  for (int t = 0; t < trials; ++t) {
    csv << t;
    for (const auto& r : runs) {
      const auto& done = r.report.completion_steps[static_cast<std::size_t>(t)];
      csv << ',' << (done ? std::to_string(*done) : "");
    }
    csv << '\n';
  }
  write_text(opt.out / "ablation.csv", csv.str());

  json summary = json::object();
  for (const auto& r : runs) summary[column(r)] = summary_json(r.summary);
  json doc{{"command", "ablate"},
           {"scenario_fingerprint", c.doc.fingerprint},
           {"seed", opt.seed},
           {"trials", trials},
           {"runs", summary}};
  write_text(opt.out / "ablation_summary.json", doc.dump(2) + "\n");

  for (const auto& r : runs)
    log << std::setw(12) << column(r) << "  mean completion step "
        << fixed(r.summary.completion_step.mean, 2) << "  failure rate "
        << fixed(100.0 * r.summary.failure_rate, 1) << "%\n";
  return 0;
}

// ---- entry point -----------------------------------------------------------

// Parses argv and dispatches. Returns the process exit code; failures print a
// single diagnostic line on `err`.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Decentralized team load management with deep Q-learning"};
  app.require_subcommand(1);
  Options opt;
  std::string optimizer = "sgd";

  auto common = [&](CLI::App* sub) {
    sub->add_option("--scenario", opt.scenario, "Scenario file")->required();
    sub->add_option("--preset", opt.preset,
                    "Reward preset: {no,with}_idle_{no,medium,high}_trp");
    sub->add_option("--seed", opt.seed, "Master random seed");
    sub->add_option("--out", opt.out, "Output directory")->required();
  };
  auto evaluation = [&](CLI::App* sub) {
    sub->add_option("--checkpoints", opt.checkpoints, "Checkpoint directory (default: --out)");
    sub->add_option("--trials", opt.trials, "Evaluation trials")->check(CLI::PositiveNumber);
  };

  auto* train_cmd = app.add_subcommand("train", "Train one network per agent");
  common(train_cmd);
  train_cmd->add_option("--episodes", opt.episodes, "Training episodes")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lr", opt.train.learning_rate, "Learning rate");
  train_cmd->add_option("--optimizer", optimizer, "sgd or adam")
      ->check(CLI::IsMember({"sgd", "adam"}));

  auto* eval_cmd = app.add_subcommand("evaluate", "Greedy rollouts of trained agents");
  common(eval_cmd);
  evaluation(eval_cmd);
  eval_cmd->add_option("--inactive", opt.inactive, "Agent ids forced to idle")->delimiter(',');
  eval_cmd->add_option("--timeline", opt.timeline, "Write the first N steps of each trial");

  auto* imp_cmd = app.add_subcommand("importance", "Capability usage and agent importance");
  common(imp_cmd);
  evaluation(imp_cmd);
  imp_cmd->add_option("--inactive", opt.inactive, "Agent ids forced to idle")->delimiter(',');

  auto* abl_cmd = app.add_subcommand("ablate", "Inactivate one agent at a time");
  common(abl_cmd);
  evaluation(abl_cmd);
  abl_cmd->add_option("--agent", opt.agent, "Only inactivate this agent id");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, log, err);
    err << "error: " << e.what() << "\n";
    return 2;
  }
  opt.train.optimizer = optimizer == "adam" ? Optimizer::adam : Optimizer::sgd;

  try {
    if (train_cmd->parsed()) return cmd_train(opt, log);
    if (eval_cmd->parsed()) return cmd_evaluate(opt, log);
    if (imp_cmd->parsed()) return cmd_importance(opt, log);
    return cmd_ablate(opt, log);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace htlm::cli
