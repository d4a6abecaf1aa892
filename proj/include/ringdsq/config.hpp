#pragma once

#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ringdsq/agent.hpp"
#include "ringdsq/env.hpp"

namespace ringdsq::config {

using nlohmann::json;

/// Environment variable that overrides the configured seed.
inline constexpr const char* kSeedEnvVar = "RINGDSQ_SEED";

inline std::string to_string(obs::WeightScheme s) {
  switch (s) {
    case obs::WeightScheme::Uniform: return "uniform";
    case obs::WeightScheme::Linear: return "linear";
    case obs::WeightScheme::Quadratic: return "quadratic";
  }
  throw std::invalid_argument("unknown weight scheme");
}

inline obs::WeightScheme weight_scheme_from(const std::string& s) {
  if (s == "uniform") return obs::WeightScheme::Uniform;
  if (s == "linear") return obs::WeightScheme::Linear;
  if (s == "quadratic") return obs::WeightScheme::Quadratic;
  throw std::invalid_argument("unknown weight scheme '" + s + "'");
}

inline std::string to_string(agent::PoolMode p) {
  return p == agent::PoolMode::Weighted ? "weighted" : "sum";
}

inline agent::PoolMode pool_mode_from(const std::string& s) {
  if (s == "weighted") return agent::PoolMode::Weighted;
  if (s == "sum") return agent::PoolMode::UnnormalizedSum;
  throw std::invalid_argument("unknown pool mode '" + s + "'");
}

inline std::string to_string(agent::TargetRule r) {
  return r == agent::TargetRule::DoubleQ ? "double" : "max";
}

inline agent::TargetRule target_rule_from(const std::string& s) {
  if (s == "double") return agent::TargetRule::DoubleQ;
  if (s == "max") return agent::TargetRule::VanillaMax;
  throw std::invalid_argument("unknown target rule '" + s + "'");
}

inline json to_json(const sim::TrackConfig& t) {
  return {{"length", t.length},
          {"num_lanes", t.num_lanes},
          {"speed_limit", t.speed_limit},
          {"dt", t.dt},
          {"lane_change",
           {{"incentive_threshold", t.lane_change.incentive_threshold},
            {"safe_decel", t.lane_change.safe_decel},
            {"cooldown_s", t.lane_change.cooldown_s},
            {"hdv_enabled", t.lane_change.hdv_enabled}}}};
}

inline sim::TrackConfig track_from(const json& j) {
  sim::TrackConfig t;
  t.length = j.value("length", t.length);
  t.num_lanes = j.value("num_lanes", t.num_lanes);
  t.speed_limit = j.value("speed_limit", t.speed_limit);
  t.dt = j.value("dt", t.dt);
  if (j.contains("lane_change")) {
    const json& lc = j.at("lane_change");
    t.lane_change.incentive_threshold =
        lc.value("incentive_threshold", t.lane_change.incentive_threshold);
    t.lane_change.safe_decel = lc.value("safe_decel", t.lane_change.safe_decel);
    t.lane_change.cooldown_s = lc.value("cooldown_s", t.lane_change.cooldown_s);
    t.lane_change.hdv_enabled = lc.value("hdv_enabled", t.lane_change.hdv_enabled);
  }
  return t;
}

inline json to_json(const env::EnvConfig& c) {
  return {{"track", to_json(c.track)},
          {"n_vehicles", c.n_vehicles},
          {"ranges", {{"sensing", c.ranges.sensing},
                      {"connectivity", c.ranges.connectivity}}},
          {"episode_max_steps", c.episode_max_steps},
          {"reward",
           {{"w1", c.reward.w1},
            {"w2", c.reward.w2},
            {"w3", c.reward.w3},
            {"w4", c.reward.w4},
            {"loop_bonus", c.reward.loop_bonus},
            {"collision_penalty", c.reward.collision_penalty},
            {"lane_change_penalty", c.reward.lane_change_penalty}}},
          {"terminate_on_collision", c.terminate_on_collision},
          {"seed", c.seed},
          {"mix",
           {{"hdv_speed_min", c.mix.hdv_speed_min},
            {"hdv_speed_max", c.mix.hdv_speed_max},
            {"hdv_desired_speed_min", c.mix.hdv_desired_speed_min},
            {"hdv_desired_speed_max", c.mix.hdv_desired_speed_max},
            {"noise_sd_min", c.mix.noise_sd_min},
            {"noise_sd_max", c.mix.noise_sd_max}}}};
}

inline env::EnvConfig env_from(const json& j) {
  env::EnvConfig c;
  if (j.contains("track")) c.track = track_from(j.at("track"));
  c.n_vehicles = j.value("n_vehicles", c.n_vehicles);
  if (j.contains("ranges")) {
    c.ranges.sensing = j.at("ranges").value("sensing", c.ranges.sensing);
    c.ranges.connectivity =
        j.at("ranges").value("connectivity", c.ranges.connectivity);
  }
  c.episode_max_steps = j.value("episode_max_steps", c.episode_max_steps);
  if (j.contains("reward")) {
    const json& r = j.at("reward");
    c.reward.w1 = r.value("w1", c.reward.w1);
    c.reward.w2 = r.value("w2", c.reward.w2);
    c.reward.w3 = r.value("w3", c.reward.w3);
    c.reward.w4 = r.value("w4", c.reward.w4);
    c.reward.loop_bonus = r.value("loop_bonus", c.reward.loop_bonus);
    c.reward.collision_penalty =
        r.value("collision_penalty", c.reward.collision_penalty);
    c.reward.lane_change_penalty =
        r.value("lane_change_penalty", c.reward.lane_change_penalty);
  }
  c.terminate_on_collision =
      j.value("terminate_on_collision", c.terminate_on_collision);
  c.seed = j.value("seed", c.seed);
  if (j.contains("mix")) {
    const json& m = j.at("mix");
    c.mix.hdv_speed_min = m.value("hdv_speed_min", c.mix.hdv_speed_min);
    c.mix.hdv_speed_max = m.value("hdv_speed_max", c.mix.hdv_speed_max);
    c.mix.hdv_desired_speed_min =
        m.value("hdv_desired_speed_min", c.mix.hdv_desired_speed_min);
    c.mix.hdv_desired_speed_max =
        m.value("hdv_desired_speed_max", c.mix.hdv_desired_speed_max);
    c.mix.noise_sd_min = m.value("noise_sd_min", c.mix.noise_sd_min);
    c.mix.noise_sd_max = m.value("noise_sd_max", c.mix.noise_sd_max);
  }
  return c;
}

inline json to_json(const agent::AgentConfig& a) {
  return {{"gamma", a.gamma},
          {"epsilon", a.epsilon},
          {"batch_size", a.batch_size},
          {"tau", a.tau},
          {"weight_scheme", to_string(a.scheme)},
          {"pooling", to_string(a.pool)},
          {"target_rule", to_string(a.target_rule)},
          {"warmup_steps", a.warmup_steps},
          {"replay_capacity", a.replay_capacity}};
}

inline agent::AgentConfig agent_from(const json& j) {
  agent::AgentConfig a;
  a.gamma = j.value("gamma", a.gamma);
  a.epsilon = j.value("epsilon", a.epsilon);
  a.batch_size = j.value("batch_size", a.batch_size);
  a.tau = j.value("tau", a.tau);
  if (j.contains("weight_scheme"))
    a.scheme = weight_scheme_from(j.at("weight_scheme").get<std::string>());
  if (j.contains("pooling"))
    a.pool = pool_mode_from(j.at("pooling").get<std::string>());
  if (j.contains("target_rule"))
    a.target_rule = target_rule_from(j.at("target_rule").get<std::string>());
  a.warmup_steps = j.value("warmup_steps", a.warmup_steps);
  a.replay_capacity = j.value("replay_capacity", a.replay_capacity);
  return a;
}

/// How the target network tracks the online network during training.
enum class TargetUpdatePolicy { Soft, HardPeriodic };

struct TrainConfig {
  env::EnvConfig env{};
  agent::AgentConfig agent{};
  long total_steps = 1'000'000;  // warm-up included
  TargetUpdatePolicy target_update = TargetUpdatePolicy::Soft;
  long hard_update_interval = 1000;
  double learning_rate = 1e-4;

  void validate() const {
    env.validate();
    agent.validate();
    if (total_steps < 0) throw std::invalid_argument("total_steps must be >= 0");
    if (hard_update_interval < 1)
      throw std::invalid_argument("hard_update_interval must be >= 1");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  }
};

inline std::string to_string(TargetUpdatePolicy p) {
  return p == TargetUpdatePolicy::Soft ? "soft" : "hard";
}

inline TargetUpdatePolicy target_update_from(const std::string& s) {
  if (s == "soft") return TargetUpdatePolicy::Soft;
  if (s == "hard") return TargetUpdatePolicy::HardPeriodic;
  throw std::invalid_argument("unknown target update policy '" + s + "'");
}

inline json to_json(const TrainConfig& t) {
  return {{"env", to_json(t.env)},
          {"agent", to_json(t.agent)},
          {"total_steps", t.total_steps},
          {"target_update", to_string(t.target_update)},
          {"hard_update_interval", t.hard_update_interval},
          {"learning_rate", t.learning_rate}};
}

inline TrainConfig train_from(const json& j) {
  TrainConfig t;
  if (j.contains("env")) t.env = env_from(j.at("env"));
  if (j.contains("agent")) t.agent = agent_from(j.at("agent"));
  t.total_steps = j.value("total_steps", t.total_steps);
  if (j.contains("target_update"))
    t.target_update = target_update_from(j.at("target_update").get<std::string>());
  t.hard_update_interval = j.value("hard_update_interval", t.hard_update_interval);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  return t;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return json::parse(in);  // parse errors carry the byte offset
}

/// Loads a training config, applying the seed override when the
/// RINGDSQ_SEED variable is set.
inline TrainConfig load_train_config(const std::string& path) {
  TrainConfig c = train_from(read_json_file(path));
  if (const char* s = std::getenv(kSeedEnvVar)) c.env.seed = std::stoull(s);
  c.validate();
  return c;
}

/// Loads an environment config, applying the seed override when the
/// RINGDSQ_SEED variable is set.
inline env::EnvConfig load_env_config(const std::string& path) {
  env::EnvConfig c = env_from(read_json_file(path));
  if (const char* s = std::getenv(kSeedEnvVar)) c.seed = std::stoull(s);
  c.validate();
  return c;
}

}  // namespace ringdsq::config
