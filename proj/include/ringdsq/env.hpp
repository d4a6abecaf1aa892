#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "ringdsq/observe.hpp"
#include "ringdsq/sim.hpp"

namespace ringdsq::env {

/// R_total = w1*R_v + w2*R_D - w3*P_c - w4*P_LC. The magnitudes are artifact
/// defaults, declared here rather than taken from anywhere else.
struct RewardWeights {
  double w1 = 1.0, w2 = 1.0, w3 = 1.0, w4 = 1.0;
  double loop_bonus = 100.0;         // R_D, per completed loop
  double collision_penalty = 200.0;  // P_c
  double lane_change_penalty = 1.0;  // P_LC, charged on initiation

  void validate() const {
    if (w1 < 0 || w2 < 0 || w3 < 0 || w4 < 0 || loop_bonus < 0 ||
        collision_penalty < 0 || lane_change_penalty < 0)
      throw std::invalid_argument("reward weights must be nonnegative");
  }
};

struct EnvConfig {
  sim::TrackConfig track{};
  int n_vehicles = 51;
  obs::RangeConfig ranges{};
  int episode_max_steps = 1200;
  RewardWeights reward{};
  bool terminate_on_collision = true;
  std::uint64_t seed = 0;
  sim::VehicleMix mix{};

  void validate() const {
    track.validate();
    ranges.validate();
    reward.validate();
    if (episode_max_steps < 1)
      throw std::invalid_argument("episode must span at least one step");
  }
};

struct RewardBreakdown {
  double speed = 0;        // w1 * v/v_max
  double loop = 0;         // w2 * R_D * [loop completed]
  double collision = 0;    // w3 * P_c * [CAV collision]
  double lane_change = 0;  // w4 * P_LC * [maneuver initiated]
  double total = 0;
};

namespace detail {

/// Pins a value to a rounded double so the compiler cannot contract the
/// producing multiply into a later sum; the component/total identity must be
/// reproducible from the stored components alone.
inline double rounded(double v) {
#if defined(__x86_64__) || defined(__i386__)
  asm volatile("" : "+x"(v));
#else
  volatile double pinned = v;
  v = pinned;
#endif
  return v;
}

}  // namespace detail

/// Only contacts involving the given CAV id are penalized; HDV-HDV contacts
/// pass through unrewarded. The total is the exact IEEE sum
/// speed + loop - collision - lane_change of the rounded components.
inline RewardBreakdown compute_reward(const sim::StepEvents& events, double v_cav,
                                      double v_max, int cav_id,
                                      const RewardWeights& rw) {
  const bool cav_collision =
      events.collision &&
      (events.collision->first == cav_id || events.collision->second == cav_id);
  RewardBreakdown b;
  b.speed = detail::rounded(rw.w1 * (v_cav / v_max));
  b.loop = events.cav_loop_completed ? detail::rounded(rw.w2 * rw.loop_bonus) : 0.0;
  b.collision =
      cav_collision ? detail::rounded(rw.w3 * rw.collision_penalty) : 0.0;
  b.lane_change = events.cav_lane_change_initiated
                      ? detail::rounded(rw.w4 * rw.lane_change_penalty)
                      : 0.0;
  b.total = detail::rounded(detail::rounded(b.speed + b.loop) - b.collision) -
            b.lane_change;
  return b;
}

/// Episode lifecycle around the simulator: reset seeds a fresh world, step
/// advances one dt and scores it. Episode k of a given environment is seeded
/// as mix_seed(config seed, k), so the first episode is a pure function of
/// the config.
class Environment {
 public:
  explicit Environment(EnvConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  struct StepResult {
    obs::Observation obs;
    double reward = 0;
    bool done = false;
    sim::StepEvents events;
    RewardBreakdown breakdown;
  };

  const EnvConfig& config() const { return cfg_; }

  obs::Observation reset() {
    world_ = sim::init_world(cfg_.track, cfg_.n_vehicles,
                             mix_seed(cfg_.seed, episode_index_), cfg_.mix);
    ++episode_index_;
    episode_steps_ = 0;
    done_ = false;
    return obs::build_observation(world_, cfg_.ranges);
  }

  StepResult step(Action action) {
    if (done_ || episode_steps_ < 0)
      throw std::logic_error("step() on a finished or unreset episode");
    auto [next, events] = sim::step_world(std::move(world_), action);
    world_ = std::move(next);
    ++episode_steps_;

    const int cav_id = world_.cav().id;
    StepResult r;
    r.events = events;
    r.breakdown = compute_reward(events, world_.cav().speed,
                                 cfg_.track.speed_limit, cav_id, cfg_.reward);
    r.reward = r.breakdown.total;
    const bool cav_collision =
        events.collision && (events.collision->first == cav_id ||
                             events.collision->second == cav_id);
    done_ = episode_steps_ >= cfg_.episode_max_steps ||
            (cfg_.terminate_on_collision && cav_collision);
    r.done = done_;
    r.obs = obs::build_observation(world_, cfg_.ranges);
    return r;
  }

  const sim::WorldState& world() const { return world_; }
  bool done() const { return done_; }
  long episode_steps() const { return episode_steps_; }
  long episode_index() const { return episode_index_; }

  /// Resume support: reinstates mid-episode progress captured elsewhere.
  void restore(sim::WorldState world, long episode_index, long episode_steps,
               bool done) {
    world_ = std::move(world);
    episode_index_ = episode_index;
    episode_steps_ = episode_steps;
    done_ = done;
  }

 private:
  EnvConfig cfg_;
  sim::WorldState world_;
  long episode_index_ = 0;
  long episode_steps_ = -1;  // -1 until the first reset
  bool done_ = false;
};

}  // namespace ringdsq::env
