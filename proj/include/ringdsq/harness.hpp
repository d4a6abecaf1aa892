#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ringdsq/baselines.hpp"
#include "ringdsq/checkpoint.hpp"
#include "ringdsq/config.hpp"
#include "ringdsq/env.hpp"
#include "ringdsq/format.hpp"
#include "ringdsq/trace.hpp"
#include "ringdsq/trend.hpp"
#include "ringdsq/version.hpp"

namespace ringdsq::harness {

// Root-seed stream ids; the environment seed feeds per-episode world seeds.
inline constexpr std::uint64_t kNetInitStream = 1;
inline constexpr std::uint64_t kActionStream = 2;
inline constexpr std::uint64_t kSampleStream = 3;
inline constexpr std::uint64_t kEnvStream = 4;

struct TrainLogRow {
  long step = 0;
  std::optional<double> loss;
  double epsilon = 0;
  std::optional<double> episode_return;
};

/// Sequential training driver for one seed: random-action warm-up fills the
/// buffer, then each step acts epsilon-greedily, stores the transition, and
/// performs one gradient step with target blending. Fully deterministic for a
/// given (config, seed); a resumable checkpoint continues the exact
/// trajectory.
class Trainer {
 public:
  Trainer(config::TrainConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        root_seed_(seed),
        action_rng_(mix_seed(seed, kActionStream)),
        sample_rng_(mix_seed(seed, kSampleStream)),
        buffer_(cfg_.agent.replay_capacity),
        env_(make_env(cfg_, seed)) {
    cfg_.validate();
    dsq_ = agent::make_agent(cfg_.agent, mix_seed(seed, kNetInitStream),
                             nn::AdamParams{.lr = cfg_.learning_rate});
    obs_ = env_.reset();
  }

  explicit Trainer(const Checkpoint& ckpt)
      : cfg_(ckpt.cfg),
        root_seed_(ckpt.root_seed),
        action_rng_(0),
        sample_rng_(0),
        buffer_(1),
        env_(make_env(ckpt.cfg, ckpt.root_seed)) {
    if (!ckpt.resume)
      throw std::invalid_argument("checkpoint was saved without resume state");
    const ResumeState& r = *ckpt.resume;
    dsq_.cfg = cfg_.agent;
    dsq_.nets = ckpt.nets;
    dsq_.phi_adam = ckpt.phi_adam;
    dsq_.rho_adam = ckpt.rho_adam;
    steps_done_ = ckpt.steps_done;
    grad_steps_ = ckpt.grad_steps;
    buffer_ = r.buffer;
    action_rng_.restore(r.action_rng);
    sample_rng_.restore(r.sample_rng);
    episode_return_ = r.episode_return;
    env_.restore(r.world, r.episode_index, r.episode_steps, r.env_done);
    obs_ = obs::build_observation(env_.world(), cfg_.env.ranges);
  }

  /// Advances to the configured step budget (no-op when already there).
  void run() { run_until(cfg_.total_steps); }

  void run_until(long target_steps) {
    target_steps = std::min(target_steps, cfg_.total_steps);
    while (steps_done_ < target_steps) step_once();
  }

  void step_once() {
    const bool warmup = steps_done_ < cfg_.agent.warmup_steps;
    const Action a = warmup ? random_legal_action() : greedy_or_explore();
    env::Environment::StepResult sr = env_.step(a);
    ++steps_done_;
    episode_return_ += sr.reward;
    buffer_.push(agent::Transition{std::move(obs_), a, sr.reward, sr.obs, sr.done});

    TrainLogRow row;
    row.step = steps_done_;
    row.epsilon = warmup ? 1.0 : cfg_.agent.epsilon;
    if (!warmup) {
      const auto mode = cfg_.target_update == config::TargetUpdatePolicy::Soft
                            ? agent::TargetUpdateMode::Soft
                            : agent::TargetUpdateMode::None;
      row.loss = agent::train_step(buffer_, dsq_.nets, dsq_.phi_adam,
                                   dsq_.rho_adam, cfg_.agent, sample_rng_,
                                   scratch_, mode);
      if (row.loss) ++grad_steps_;
      if (cfg_.target_update == config::TargetUpdatePolicy::HardPeriodic &&
          grad_steps_ > 0 && grad_steps_ % cfg_.hard_update_interval == 0)
        nn::hard_update(dsq_.nets);
    }
    if (sr.done) {
      row.episode_return = episode_return_;
      episode_return_ = 0;
      obs_ = env_.reset();
    } else {
      obs_ = std::move(sr.obs);
    }
    log_.push_back(row);
  }

  bool finished() const { return steps_done_ >= cfg_.total_steps; }
  long steps_done() const { return steps_done_; }
  long grad_steps() const { return grad_steps_; }
  const std::vector<TrainLogRow>& log() const { return log_; }
  const agent::DsqAgent& agent_state() const { return dsq_; }
  const config::TrainConfig& config() const { return cfg_; }

  Checkpoint make_checkpoint(bool resumable) const {
    Checkpoint c;
    c.cfg = cfg_;
    c.nets = dsq_.nets;
    c.phi_adam = dsq_.phi_adam;
    c.rho_adam = dsq_.rho_adam;
    c.steps_done = steps_done_;
    c.grad_steps = grad_steps_;
    c.root_seed = root_seed_;
    if (resumable) {
      ResumeState r;
      r.buffer = buffer_;
      r.world = env_.world();
      r.episode_index = env_.episode_index();
      r.episode_steps = env_.episode_steps();
      r.env_done = env_.done();
      r.episode_return = episode_return_;
      r.action_rng = action_rng_.save();
      r.sample_rng = sample_rng_.save();
      c.resume = std::move(r);
    }
    return c;
  }

 private:
  static env::Environment make_env(const config::TrainConfig& cfg,
                                   std::uint64_t seed) {
    env::EnvConfig ec = cfg.env;
    ec.seed = mix_seed(seed, kEnvStream);
    return env::Environment(ec);
  }

  Action random_legal_action() {
    int legal[kNumActions];
    int count = 0;
    for (int i = 0; i < kNumActions; ++i)
      if (obs_.action_mask[i]) legal[count++] = i;
    return static_cast<Action>(legal[action_rng_.uniform_int(count)]);
  }

  Action greedy_or_explore() {
    const auto q = agent::q_values_scratch(obs_, dsq_.nets.phi, dsq_.nets.rho,
                                           cfg_.agent.scheme, cfg_.agent.pool,
                                           act_enc_, act_head_);
    return agent::select_action(q, obs_.action_mask, cfg_.agent.epsilon,
                                action_rng_);
  }

  config::TrainConfig cfg_;
  std::uint64_t root_seed_;
  Rng action_rng_, sample_rng_;
  agent::ReplayBuffer buffer_;
  env::Environment env_;
  agent::DsqAgent dsq_;
  obs::Observation obs_;
  agent::TrainScratch scratch_;
  agent::EncodeScratch act_enc_;
  nn::MlpCache act_head_;
  double episode_return_ = 0;
  long steps_done_ = 0;
  long grad_steps_ = 0;
  std::vector<TrainLogRow> log_;
};

struct TrainOutput {
  Checkpoint checkpoint;
  std::vector<TrainLogRow> log;
};

inline TrainOutput train(const config::TrainConfig& cfg, std::uint64_t seed,
                         bool resumable = false) {
  Trainer t(cfg, seed);
  t.run();
  return {t.make_checkpoint(resumable), t.log()};
}

inline void write_train_log_csv(const std::string& path,
                                std::span<const TrainLogRow> log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "step,loss,epsilon,episode_return\n";
  for (const TrainLogRow& r : log) {
    out << r.step << ',';
    if (r.loss) out << fmt_double(*r.loss);
    out << ',' << fmt_double(r.epsilon) << ',';
    if (r.episode_return) out << fmt_double(*r.episode_return);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

/// Per-scenario evaluation statistics over full-episode returns.
struct EvalStats {
  double mean = 0;
  double median = 0;
  double sd = 0;  // sample standard deviation
  std::vector<double> returns;
};

inline EvalStats summarize(std::vector<double> returns) {
  if (returns.empty()) throw std::invalid_argument("no returns to summarize");
  EvalStats s;
  s.returns = returns;
  const std::size_t n = returns.size();
  double sum = 0;
  for (double r : returns) sum += r;
  s.mean = sum / static_cast<double>(n);
  std::sort(returns.begin(), returns.end());
  s.median = n % 2 == 1 ? returns[n / 2]
                        : 0.5 * (returns[n / 2 - 1] + returns[n / 2]);
  if (n > 1) {
    double ss = 0;
    for (double r : returns) ss += (r - s.mean) * (r - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return s;
}

/// Expands a base list to exactly `episodes` per-episode seeds.
inline std::vector<std::uint64_t> episode_seeds(std::span<const std::uint64_t> base,
                                                int episodes) {
  if (episodes < 1) throw std::invalid_argument("need at least one episode");
  std::vector<std::uint64_t> seeds(base.begin(), base.end());
  const std::uint64_t anchor = seeds.empty() ? 12345 : seeds.back();
  while (seeds.size() < static_cast<std::size_t>(episodes))
    seeds.push_back(mix_seed(anchor, seeds.size()));
  seeds.resize(episodes);
  return seeds;
}

/// Greedy rollouts of full episodes; one environment per episode seeded from
/// the list, so results are a pure function of (policy, config, seeds). When
/// `trace_path` is set the first episode is exported as a step/vehicle CSV.
inline EvalStats evaluate(const policy::PolicyFn& policy, env::EnvConfig cfg,
                          int episodes, std::span<const std::uint64_t> seeds,
                          const std::string& trace_path = "") {
  const std::vector<std::uint64_t> ep_seeds = episode_seeds(seeds, episodes);
  std::vector<double> returns;
  returns.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    cfg.seed = ep_seeds[e];
    env::Environment environment(cfg);
    obs::Observation o = environment.reset();
    std::ofstream trace_out;
    const bool tracing = e == 0 && !trace_path.empty();
    if (tracing) {
      trace_out.open(trace_path, std::ios::trunc);
      if (!trace_out) throw std::runtime_error("cannot write '" + trace_path + "'");
      trace_out << trace::kHeader << '\n';
      trace::write_step(trace_out, 0, environment.world());
    }
    double ret = 0;
    long step = 0;
    while (true) {
      const Action a = policy(o, environment.world());
      auto sr = environment.step(a);
      ret += sr.reward;
      ++step;
      if (tracing) trace::write_step(trace_out, step, environment.world());
      if (sr.done) break;
      o = std::move(sr.obs);
    }
    returns.push_back(ret);
  }
  return summarize(std::move(returns));
}

struct SweepPoint {
  double range = 0;  // m
  EvalStats stats;
};

struct SweepOutcome {
  std::vector<SweepPoint> points;
  std::optional<TrendFit> fit;
  std::optional<OptimalRange> optimal;
};

/// Evaluates one trained policy across connectivity ranges without
/// retraining; only the observation window (and hence the re-normalized
/// weights) changes. Every range reuses the same episode seeds.
inline SweepOutcome sweep_connectivity(const policy::PolicyFn& policy,
                                       env::EnvConfig cfg,
                                       std::span<const double> ranges,
                                       int episodes,
                                       std::span<const std::uint64_t> seeds,
                                       bool fit_trend = false) {
  if (ranges.empty()) throw std::invalid_argument("sweep needs at least one range");
  if (!std::is_sorted(ranges.begin(), ranges.end()))
    throw std::invalid_argument("sweep ranges must be ascending");
  SweepOutcome out;
  for (double r : ranges) {
    env::EnvConfig c = cfg;
    c.ranges.connectivity = r;
    out.points.push_back({r, evaluate(policy, c, episodes, seeds)});
  }
  if (fit_trend && out.points.size() >= 4) {
    std::vector<double> x, y;
    for (const auto& p : out.points) {
      x.push_back(p.range);
      y.push_back(p.stats.mean);
    }
    out.fit = fit_saturating_trend(x, y);
    out.optimal = optimal_range(*out.fit);
  }
  return out;
}

/// Default sweep grid, 50 m to 500 m in 25 m steps.
inline std::vector<double> default_sweep_ranges() {
  std::vector<double> r;
  for (double x = 50; x <= 500 + 1e-9; x += 25) r.push_back(x);
  return r;
}

/// Full-scale profile: the published training volume. Training episodes end
/// at the step cap only; collisions are penalized in place.
inline config::TrainConfig default_train_config() {
  config::TrainConfig cfg;
  cfg.env.terminate_on_collision = false;
  return cfg;
}

/// Desk-scale profile: 2e4 warm-up plus 1e5 training steps with 30 vehicles,
/// sized so a training run finishes in minutes on a laptop core.
inline config::TrainConfig desk_train_config() {
  config::TrainConfig cfg;
  cfg.env.n_vehicles = 30;
  cfg.env.terminate_on_collision = false;
  cfg.agent.warmup_steps = 20'000;
  cfg.agent.replay_capacity = 500'000;
  cfg.total_steps = 120'000;
  return cfg;
}

inline constexpr std::uint64_t kDeskSeeds[] = {101, 202, 303};

/// Run-metadata sidecar written next to every artifact the CLI produces.
inline json run_metadata(const std::string& command, const json& config,
                         std::span<const std::uint64_t> seeds) {
  return {{"tool", std::string("ringdsq ") + kVersion},
          {"command", command},
          {"config_hash", fnv1a_hex(config.dump())},
          {"config", config},
          {"seeds", std::vector<std::uint64_t>(seeds.begin(), seeds.end())}};
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace ringdsq::harness
