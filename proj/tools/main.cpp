// Command-line front end: train, evaluate, sweep, replay.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ringdsq/baselines.hpp"
#include "ringdsq/checkpoint.hpp"
#include "ringdsq/config.hpp"
#include "ringdsq/harness.hpp"
#include "ringdsq/trace.hpp"
#include "ringdsq/version.hpp"

namespace {

using namespace ringdsq;
using nlohmann::json;

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    seeds.push_back(std::stoull(s.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return seeds;
}

std::vector<double> parse_range_spec(const std::string& s) {
  const std::size_t c1 = s.find(':');
  const std::size_t c2 = s.find(':', c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw CLI::ValidationError("--ranges expects a:b:step");
  const double a = std::stod(s.substr(0, c1));
  const double b = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
  const double step = std::stod(s.substr(c2 + 1));
  if (step <= 0 || b < a) throw CLI::ValidationError("--ranges expects a <= b, step > 0");
  std::vector<double> out;
  for (double x = a; x <= b + 1e-9; x += step) out.push_back(x);
  return out;
}

/// Builds the policy named on the command line, loading the agent from the
/// checkpoint when one is needed.
struct LoadedPolicy {
  policy::PolicyKind kind;
  agent::DsqAgent agent;
  policy::PolicyFn fn;
};

LoadedPolicy load_policy(const std::string& name, const std::string& ckpt_path) {
  LoadedPolicy p;
  p.kind = policy::policy_kind_from(name);
  if (policy::is_dsq(p.kind)) {
    if (ckpt_path.empty())
      throw CLI::ValidationError("policy '" + name + "' requires --ckpt");
    const harness::Checkpoint c = harness::load_checkpoint(ckpt_path);
    p.agent.cfg = c.cfg.agent;
    p.agent.nets = c.nets;
    p.fn = policy::make_policy(p.kind, &p.agent);
  } else {
    p.fn = policy::make_policy(p.kind);
  }
  return p;
}

int cmd_train(const std::string& config_path, const std::string& profile,
              std::optional<std::uint64_t> seed, const std::string& out_path,
              std::string log_path, bool resumable, const std::string& resume_path,
              std::optional<long> total_steps) {
  std::optional<harness::Trainer> trainer;
  std::uint64_t root_seed = seed.value_or(0);
  if (!resume_path.empty()) {
    harness::Checkpoint ckpt = harness::load_checkpoint(resume_path);
    if (total_steps) ckpt.cfg.total_steps = *total_steps;
    root_seed = ckpt.root_seed;
    trainer.emplace(ckpt);
  } else {
    config::TrainConfig cfg;
    if (!config_path.empty()) {
      cfg = config::load_train_config(config_path);
    } else if (profile == "desk") {
      cfg = harness::desk_train_config();
    } else {
      cfg = harness::default_train_config();
    }
    if (total_steps) cfg.total_steps = *total_steps;
    trainer.emplace(cfg, root_seed);
  }

  std::cerr << "training to " << trainer->config().total_steps << " steps (warm-up "
            << trainer->config().agent.warmup_steps << ")\n";
  trainer->run();

  harness::save_checkpoint(out_path, trainer->make_checkpoint(resumable));
  if (log_path.empty()) log_path = out_path + ".log.csv";
  harness::write_train_log_csv(log_path, trainer->log());
  const std::uint64_t seeds[] = {root_seed};
  harness::write_json_file(out_path + ".meta.json",
                           harness::run_metadata("train",
                                                 config::to_json(trainer->config()),
                                                 seeds));
  std::cerr << "wrote " << out_path << " and " << log_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& policy_name, const std::string& ckpt_path,
                 const std::string& env_config_path, int vehicles, int episodes,
                 const std::string& seed_list, const std::string& csv_path,
                 std::optional<double> connectivity, const std::string& trace_path) {
  env::EnvConfig cfg;
  if (!env_config_path.empty()) cfg = config::load_env_config(env_config_path);
  LoadedPolicy p = load_policy(policy_name, ckpt_path);
  if (policy::is_dsq(p.kind) && env_config_path.empty()) {
    const harness::Checkpoint c = harness::load_checkpoint(ckpt_path);
    cfg = c.cfg.env;
  }
  if (vehicles > 0) cfg.n_vehicles = vehicles;
  if (connectivity) cfg.ranges.connectivity = *connectivity;

  const std::vector<std::uint64_t> base = parse_seed_list(seed_list);
  const auto seeds = harness::episode_seeds(base, episodes);
  const harness::EvalStats stats =
      harness::evaluate(p.fn, cfg, episodes, seeds, trace_path);

  std::cout << "policy " << policy_name << "  vehicles " << cfg.n_vehicles
            << "  connectivity " << fmt_double(cfg.ranges.connectivity)
            << " m\n"
            << "mean " << fmt_double(stats.mean) << "  median "
            << fmt_double(stats.median) << "  sd " << fmt_double(stats.sd)
            << "  (" << episodes << " episodes)\n";

  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + csv_path + "'");
    out << "policy,vehicles,connectivity,episode,seed,return\n";
    for (std::size_t i = 0; i < stats.returns.size(); ++i)
      out << policy_name << ',' << cfg.n_vehicles << ','
          << fmt_double(cfg.ranges.connectivity) << ',' << i << ',' << seeds[i]
          << ',' << fmt_double(stats.returns[i]) << '\n';
    harness::write_json_file(
        csv_path + ".meta.json",
        harness::run_metadata("evaluate", config::to_json(cfg), seeds));
  }
  if (!trace_path.empty())
    harness::write_json_file(
        trace_path + ".meta.json",
        harness::run_metadata("evaluate-trace", config::to_json(cfg), seeds));
  return 0;
}

int cmd_sweep(const std::string& ckpt_path, const std::string& policy_name,
              const std::string& range_spec, int vehicles, int episodes,
              const std::string& seed_list, const std::string& csv_path, bool fit) {
  LoadedPolicy p = load_policy(policy_name, ckpt_path);
  env::EnvConfig cfg;
  if (policy::is_dsq(p.kind))
    cfg = harness::load_checkpoint(ckpt_path).cfg.env;
  if (vehicles > 0) cfg.n_vehicles = vehicles;

  const std::vector<double> ranges = parse_range_spec(range_spec);
  const std::vector<std::uint64_t> base = parse_seed_list(seed_list);
  const auto seeds = harness::episode_seeds(base, episodes);
  const harness::SweepOutcome outcome =
      harness::sweep_connectivity(p.fn, cfg, ranges, episodes, seeds, fit);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!csv_path.empty()) {
    file.open(csv_path, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write '" + csv_path + "'");
    out = &file;
  }
  *out << "connectivity_range,mean_return,median_return,sd,episodes\n";
  for (const auto& pt : outcome.points)
    *out << fmt_double(pt.range) << ',' << fmt_double(pt.stats.mean) << ','
         << fmt_double(pt.stats.median) << ',' << fmt_double(pt.stats.sd) << ','
         << episodes << '\n';

  if (outcome.fit) {
    const auto& f = *outcome.fit;
    std::cout << "trend r(x) = " << fmt_double(f.a) << " - " << fmt_double(f.b)
              << " * exp(-x/" << fmt_double(f.c) << ")  residual "
              << fmt_double(f.residual) << (f.degenerate ? "  [degenerate]" : "")
              << "\n";
    if (outcome.optimal && outcome.optimal->found)
      std::cout << "optimal connectivity range: " << fmt_double(outcome.optimal->x_opt)
                << " m (baseline gradient " << fmt_double(outcome.optimal->g0)
                << " per m at 100 m)\n";
    else
      std::cout << "no saturation detected; optimal range undefined\n";
  }
  if (!csv_path.empty()) {
    json meta = harness::run_metadata("sweep", config::to_json(cfg), seeds);
    if (outcome.fit) {
      meta["fit"] = {{"a", outcome.fit->a},
                     {"b", outcome.fit->b},
                     {"c", outcome.fit->c},
                     {"residual", outcome.fit->residual},
                     {"degenerate", outcome.fit->degenerate}};
      if (outcome.optimal && outcome.optimal->found)
        meta["optimal_range_m"] = outcome.optimal->x_opt;
    }
    harness::write_json_file(csv_path + ".meta.json", meta);
  }
  return 0;
}

int cmd_replay(const std::string& trace_path, long stride) {
  double length = 500;
  int lanes = 4;
  const std::string meta_path = trace_path + ".meta.json";
  if (std::filesystem::exists(meta_path)) {
    const json meta = config::read_json_file(meta_path);
    if (meta.contains("config")) {
      const env::EnvConfig cfg = config::env_from(meta.at("config"));
      length = cfg.track.length;
      lanes = cfg.track.num_lanes;
    }
  }
  const auto rows = trace::read_trace(trace_path);
  trace::render_trace(rows, std::cout, length, lanes, stride);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ring-road lane-change RL sandbox"};
  app.set_version_flag("--version", std::string("ringdsq ") + ringdsq::kVersion);
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train an agent");
  std::string train_config, profile = "full", train_out = "checkpoint.json";
  std::string train_log, resume_path;
  std::uint64_t train_seed = 0;
  bool seed_given = false, resumable = false;
  long total_steps_override = -1;
  train->add_option("--config", train_config, "training config JSON");
  train->add_option("--profile", profile, "named profile: full or desk")
      ->check(CLI::IsMember({"full", "desk"}));
  train->add_option("--seed", train_seed, "root seed")
      ->each([&](const std::string&) { seed_given = true; });
  train->add_option("--out", train_out, "checkpoint output path");
  train->add_option("--log", train_log, "training log CSV path");
  train->add_flag("--resumable", resumable, "embed full resume state in the checkpoint");
  train->add_option("--resume", resume_path, "continue from a resumable checkpoint");
  train->add_option("--total-steps", total_steps_override, "override the step budget");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "evaluate a policy");
  std::string ev_policy = "no_lane_change", ev_ckpt, ev_env_config, ev_seeds = "1";
  std::string ev_csv, ev_trace;
  int ev_vehicles = 0, ev_episodes = 10;
  double ev_connectivity = -1;
  ev->add_option("--policy", ev_policy,
                 "no_lane_change | rule_based | dsq_uniform | dsq_linear | "
                 "dsq_quadratic | dsq_sum");
  ev->add_option("--ckpt", ev_ckpt, "checkpoint for DSQ policies");
  ev->add_option("--config", ev_env_config, "environment config JSON");
  ev->add_option("--vehicles", ev_vehicles, "total vehicle count (CAV included)");
  ev->add_option("--episodes", ev_episodes, "episode count");
  ev->add_option("--seeds", ev_seeds, "comma-separated episode seeds");
  ev->add_option("--csv", ev_csv, "per-episode CSV output");
  ev->add_option("--connectivity", ev_connectivity, "connectivity range override, m");
  ev->add_option("--trace", ev_trace, "export the first episode as a trace CSV");

  // sweep
  auto* sw = app.add_subcommand("sweep", "connectivity-range sweep");
  std::string sw_ckpt, sw_policy = "dsq_linear", sw_ranges = "50:500:25";
  std::string sw_seeds = "1", sw_csv;
  int sw_vehicles = 0, sw_episodes = 10;
  bool sw_fit = false;
  sw->add_option("--ckpt", sw_ckpt, "checkpoint to sweep");
  sw->add_option("--policy", sw_policy, "policy name (default dsq_linear)");
  sw->add_option("--ranges", sw_ranges, "a:b:step in meters");
  sw->add_option("--vehicles", sw_vehicles, "total vehicle count");
  sw->add_option("--episodes", sw_episodes, "episodes per range");
  sw->add_option("--seeds", sw_seeds, "comma-separated episode seeds");
  sw->add_option("--csv", sw_csv, "sweep CSV output");
  sw->add_flag("--fit", sw_fit, "fit the saturating trend and report the optimal range");

  // replay
  auto* rp = app.add_subcommand("replay", "render an episode trace as text");
  std::string rp_trace;
  long rp_stride = 10;
  rp->add_option("--trace", rp_trace, "trace CSV from evaluate --trace")->required();
  rp->add_option("--stride", rp_stride, "render every n-th step");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train)
      return cmd_train(train_config, profile,
                       seed_given ? std::optional<std::uint64_t>(train_seed)
                                  : std::nullopt,
                       train_out, train_log, resumable, resume_path,
                       total_steps_override >= 0
                           ? std::optional<long>(total_steps_override)
                           : std::nullopt);
    if (*ev)
      return cmd_evaluate(ev_policy, ev_ckpt, ev_env_config, ev_vehicles,
                          ev_episodes, ev_seeds, ev_csv,
                          ev_connectivity > 0
                              ? std::optional<double>(ev_connectivity)
                              : std::nullopt,
                          ev_trace);
    if (*sw)
      return cmd_sweep(sw_ckpt, sw_policy, sw_ranges, sw_vehicles, sw_episodes,
                       sw_seeds, sw_csv, sw_fit);
    if (*rp) return cmd_replay(rp_trace, rp_stride);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
