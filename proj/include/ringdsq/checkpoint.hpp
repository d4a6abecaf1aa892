#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ringdsq/agent.hpp"
#include "ringdsq/config.hpp"
#include "ringdsq/env.hpp"
#include "ringdsq/neural.hpp"
#include "ringdsq/sim.hpp"

namespace ringdsq::harness {

using nlohmann::json;

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline json mlp_to_json(const nn::Mlp& net) {
  json specs = json::array();
  json weights = json::array();
  json biases = json::array();
  for (const auto& l : net.layers) {
    specs.push_back({l.out, l.in});
    weights.push_back(l.weight);  // row-major out x in
    biases.push_back(l.bias);
  }
  return {{"layer_specs", specs}, {"weights", weights}, {"biases", biases}};
}

inline nn::Mlp mlp_from_json(const json& j) {
  nn::Mlp net;
  const json& specs = j.at("layer_specs");
  const json& weights = j.at("weights");
  const json& biases = j.at("biases");
  for (std::size_t k = 0; k < specs.size(); ++k) {
    nn::LayerParams l(specs[k][1].get<int>(), specs[k][0].get<int>());
    l.weight = weights[k].get<std::vector<double>>();
    l.bias = biases[k].get<std::vector<double>>();
    if (l.weight.size() != static_cast<std::size_t>(l.in) * l.out ||
        l.bias.size() != static_cast<std::size_t>(l.out))
      throw std::runtime_error("checkpoint layer shape mismatch");
    net.layers.push_back(std::move(l));
  }
  return net;
}

inline json adam_to_json(const nn::AdamState& s) {
  json m = json::array(), v = json::array();
  for (std::size_t k = 0; k < s.m.size(); ++k) {
    m.push_back({{"weight", s.m[k].weight}, {"bias", s.m[k].bias}});
    v.push_back({{"weight", s.v[k].weight}, {"bias", s.v[k].bias}});
  }
  return {{"t", s.t},
          {"lr", s.hp.lr},
          {"beta1", s.hp.beta1},
          {"beta2", s.hp.beta2},
          {"eps", s.hp.eps},
          {"m", m},
          {"v", v}};
}

inline nn::AdamState adam_from_json(const json& j, const nn::Mlp& net) {
  nn::AdamState s(net);
  s.t = j.at("t").get<long>();
  s.hp.lr = j.at("lr").get<double>();
  s.hp.beta1 = j.at("beta1").get<double>();
  s.hp.beta2 = j.at("beta2").get<double>();
  s.hp.eps = j.at("eps").get<double>();
  for (std::size_t k = 0; k < s.m.size(); ++k) {
    s.m[k].weight = j.at("m")[k].at("weight").get<std::vector<double>>();
    s.m[k].bias = j.at("m")[k].at("bias").get<std::vector<double>>();
    s.v[k].weight = j.at("v")[k].at("weight").get<std::vector<double>>();
    s.v[k].bias = j.at("v")[k].at("bias").get<std::vector<double>>();
  }
  return s;
}

inline json vehicle_to_json(const sim::Vehicle& v) {
  json j{{"id", v.id},
         {"kind", v.kind == sim::VehicleKind::Cav ? "cav" : "hdv"},
         {"position", v.position},
         {"lane", v.lane},
         {"speed", v.speed},
         {"length", v.length},
         {"idm",
          {{"desired_speed", v.idm.desired_speed},
           {"time_headway", v.idm.time_headway},
           {"min_gap", v.idm.min_gap},
           {"max_accel", v.idm.max_accel},
           {"comfort_decel", v.idm.comfort_decel},
           {"exponent", v.idm.exponent}}},
         {"accel_noise_sd", v.accel_noise_sd},
         {"cumulative_distance", v.cumulative_distance},
         {"lc_cooldown", v.lc_cooldown}};
  if (v.maneuver)
    j["maneuver"] = {{"target_lane", v.maneuver->target_lane},
                     {"steps_left", v.maneuver->steps_left},
                     {"total_steps", v.maneuver->total_steps}};
  return j;
}

inline sim::Vehicle vehicle_from_json(const json& j) {
  sim::Vehicle v;
  v.id = j.at("id").get<int>();
  v.kind = j.at("kind").get<std::string>() == "cav" ? sim::VehicleKind::Cav
                                                    : sim::VehicleKind::Hdv;
  v.position = j.at("position").get<double>();
  v.lane = j.at("lane").get<int>();
  v.speed = j.at("speed").get<double>();
  v.length = j.at("length").get<double>();
  const json& idm = j.at("idm");
  v.idm.desired_speed = idm.at("desired_speed").get<double>();
  v.idm.time_headway = idm.at("time_headway").get<double>();
  v.idm.min_gap = idm.at("min_gap").get<double>();
  v.idm.max_accel = idm.at("max_accel").get<double>();
  v.idm.comfort_decel = idm.at("comfort_decel").get<double>();
  v.idm.exponent = idm.at("exponent").get<double>();
  v.accel_noise_sd = j.at("accel_noise_sd").get<double>();
  v.cumulative_distance = j.at("cumulative_distance").get<double>();
  v.lc_cooldown = j.at("lc_cooldown").get<double>();
  if (j.contains("maneuver")) {
    sim::Maneuver m;
    m.target_lane = j.at("maneuver").at("target_lane").get<int>();
    m.steps_left = j.at("maneuver").at("steps_left").get<int>();
    m.total_steps = j.at("maneuver").at("total_steps").get<int>();
    v.maneuver = m;
  }
  return v;
}

inline json world_to_json(const sim::WorldState& w) {
  json vehicles = json::array();
  for (const auto& v : w.vehicles) vehicles.push_back(vehicle_to_json(v));
  return {{"vehicles", vehicles},
          {"step_count", w.step_count},
          {"rng", w.rng.save()},
          {"track", config::to_json(w.track)}};
}

inline sim::WorldState world_from_json(const json& j) {
  sim::WorldState w;
  for (const json& vj : j.at("vehicles")) w.vehicles.push_back(vehicle_from_json(vj));
  w.step_count = j.at("step_count").get<long>();
  w.rng.restore(j.at("rng").get<std::string>());
  w.track = config::track_from(j.at("track"));
  return w;
}

inline json observation_to_json(const obs::Observation& o) {
  return {{"downstream", o.downstream},
          {"local", o.local},
          {"cav", o.cav},
          {"mask", o.action_mask}};
}

inline obs::Observation observation_from_json(const json& j) {
  obs::Observation o;
  o.downstream = j.at("downstream").get<std::vector<std::array<double, 3>>>();
  o.local = j.at("local").get<std::array<std::array<double, 3>, 3>>();
  o.cav = j.at("cav").get<std::array<double, 3>>();
  o.action_mask = j.at("mask").get<std::array<bool, 3>>();
  return o;
}

inline json transition_to_json(const agent::Transition& t) {
  return {{"obs", observation_to_json(t.obs)},
          {"action", static_cast<int>(t.action)},
          {"reward", t.reward},
          {"next_obs", observation_to_json(t.next_obs)},
          {"done", t.done}};
}

inline agent::Transition transition_from_json(const json& j) {
  agent::Transition t;
  t.obs = observation_from_json(j.at("obs"));
  t.action = static_cast<Action>(j.at("action").get<int>());
  t.reward = j.at("reward").get<double>();
  t.next_obs = observation_from_json(j.at("next_obs"));
  t.done = j.at("done").get<bool>();
  return t;
}

}  // namespace detail

/// Everything needed to continue a training run exactly where it stopped.
struct ResumeState {
  agent::ReplayBuffer buffer{1};
  sim::WorldState world;
  long episode_index = 0;
  long episode_steps = 0;
  bool env_done = false;
  double episode_return = 0;
  std::string action_rng;
  std::string sample_rng;
};

struct Checkpoint {
  config::TrainConfig cfg;
  nn::NetworkPair nets;
  nn::AdamState phi_adam, rho_adam;
  long steps_done = 0;  // environment steps taken, warm-up included
  long grad_steps = 0;
  std::uint64_t root_seed = 0;
  std::optional<ResumeState> resume;
};

inline json checkpoint_to_json(const Checkpoint& c) {
  json j{{"version", kCheckpointVersion},
         {"kind", "ringdsq-checkpoint"},
         {"phi", detail::mlp_to_json(c.nets.phi)},
         {"rho", detail::mlp_to_json(c.nets.rho)},
         {"phi_target", detail::mlp_to_json(c.nets.phi_target)},
         {"rho_target", detail::mlp_to_json(c.nets.rho_target)},
         {"tau", c.nets.tau},
         {"adam_phi", detail::adam_to_json(c.phi_adam)},
         {"adam_rho", detail::adam_to_json(c.rho_adam)},
         {"config", config::to_json(c.cfg)},
         {"steps_done", c.steps_done},
         {"grad_steps", c.grad_steps},
         {"root_seed", c.root_seed}};
  if (c.resume) {
    json transitions = json::array();
    for (std::size_t i = 0; i < c.resume->buffer.size(); ++i)
      transitions.push_back(detail::transition_to_json(c.resume->buffer.oldest(i)));
    j["resume"] = {{"buffer_capacity", c.resume->buffer.capacity()},
                   {"transitions", transitions},
                   {"world", detail::world_to_json(c.resume->world)},
                   {"episode_index", c.resume->episode_index},
                   {"episode_steps", c.resume->episode_steps},
                   {"env_done", c.resume->env_done},
                   {"episode_return", c.resume->episode_return},
                   {"action_rng", c.resume->action_rng},
                   {"sample_rng", c.resume->sample_rng}};
  }
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  const int version = j.at("version").get<int>();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint version " + std::to_string(version) +
                             " is not readable by this build (expects version " +
                             std::to_string(kCheckpointVersion) + ")");
  Checkpoint c;
  c.nets.phi = detail::mlp_from_json(j.at("phi"));
  c.nets.rho = detail::mlp_from_json(j.at("rho"));
  c.nets.phi_target = detail::mlp_from_json(j.at("phi_target"));
  c.nets.rho_target = detail::mlp_from_json(j.at("rho_target"));
  c.nets.tau = j.at("tau").get<double>();
  c.phi_adam = detail::adam_from_json(j.at("adam_phi"), c.nets.phi);
  c.rho_adam = detail::adam_from_json(j.at("adam_rho"), c.nets.rho);
  c.cfg = config::train_from(j.at("config"));
  c.steps_done = j.at("steps_done").get<long>();
  c.grad_steps = j.at("grad_steps").get<long>();
  c.root_seed = j.at("root_seed").get<std::uint64_t>();
  if (j.contains("resume")) {
    const json& r = j.at("resume");
    ResumeState rs;
    rs.buffer = agent::ReplayBuffer(r.at("buffer_capacity").get<std::size_t>());
    for (const json& tj : r.at("transitions"))
      rs.buffer.push(detail::transition_from_json(tj));
    rs.world = detail::world_from_json(r.at("world"));
    rs.episode_index = r.at("episode_index").get<long>();
    rs.episode_steps = r.at("episode_steps").get<long>();
    rs.env_done = r.at("env_done").get<bool>();
    rs.episode_return = r.at("episode_return").get<double>();
    rs.action_rng = r.at("action_rng").get<std::string>();
    rs.sample_rng = r.at("sample_rng").get<std::string>();
    c.resume = std::move(rs);
  }
  return c;
}

/// Writes via a temporary file and rename, so a crash cannot leave a
/// half-written checkpoint under the final name.
inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << checkpoint_to_json(c).dump();
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  return checkpoint_from_json(json::parse(in));
}

}  // namespace ringdsq::harness
