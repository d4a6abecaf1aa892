#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ringdsq/action.hpp"
#include "ringdsq/rng.hpp"

namespace ringdsq::sim {

inline constexpr double kVehicleLength = 5.0;     // m
inline constexpr double kEmergencyDecel = 9.0;    // m/s^2, applied when the gap is gone
inline constexpr double kLaneChangeDuration = 2.0;  // s, full maneuver
inline constexpr double kNoLeaderGap = std::numeric_limits<double>::infinity();

/// Thresholds for the rule-based lateral controller used by background
/// vehicles (and by the rule-based baseline policy).
struct LaneChangeRules {
  double incentive_threshold = 0.1;  // m/s^2 gain required to leave the lane
  double safe_decel = 3.0;           // m/s^2 braking tolerated for the new follower
  double cooldown_s = 5.0;           // s between maneuvers of one vehicle
  bool hdv_enabled = true;
};

struct TrackConfig {
  double length = 500.0;      // m, circular
  int num_lanes = 4;          // lane 0 = rightmost
  double speed_limit = 50.0;  // m/s
  double dt = 0.1;            // s per step
  LaneChangeRules lane_change{};

  void validate() const {
    if (!(length > 0)) throw std::invalid_argument("track length must be positive");
    if (num_lanes < 2) throw std::invalid_argument("track needs at least 2 lanes");
    if (!(speed_limit > 0)) throw std::invalid_argument("speed limit must be positive");
    if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  }
};

struct IdmParams {
  double desired_speed = 50.0;  // v0, m/s
  double time_headway = 1.5;    // T, s
  double min_gap = 2.0;         // s0, m
  double max_accel = 1.0;       // a, m/s^2
  double comfort_decel = 1.5;   // b, m/s^2
  double exponent = 4.0;        // delta
};

enum class VehicleKind { Cav, Hdv };

/// Ongoing lane change. Timing is tracked in whole steps so the midpoint flip
/// and the completion land on exact step boundaries. After the midpoint flip
/// `target_lane` holds the lane being vacated; the vehicle occupies both lanes
/// for the entire maneuver.
struct Maneuver {
  int target_lane = 0;
  int steps_left = 0;
  int total_steps = 0;

  double remaining_s(double dt) const { return steps_left * dt; }
};

struct Vehicle {
  int id = 0;
  VehicleKind kind = VehicleKind::Hdv;
  double position = 0.0;  // front bumper, [0, track.length)
  int lane = 0;
  double speed = 0.0;
  double length = kVehicleLength;
  IdmParams idm{};
  double accel_noise_sd = 0.0;  // HDV only
  std::optional<Maneuver> maneuver{};
  double cumulative_distance = 0.0;
  double lc_cooldown = 0.0;  // s remaining

  bool occupies(int l) const {
    return l == lane || (maneuver && maneuver->target_lane == l);
  }
  bool shares_lane_with(const Vehicle& other) const {
    if (other.occupies(lane)) return true;
    return maneuver && other.occupies(maneuver->target_lane);
  }
};

struct StepEvents {
  std::optional<std::pair<int, int>> collision{};  // vehicle ids
  bool cav_loop_completed = false;
  bool cav_lane_change_initiated = false;
  bool cav_lane_change_completed = false;
};

struct WorldState {
  std::vector<Vehicle> vehicles;
  long step_count = 0;
  Rng rng{0};
  TrackConfig track{};

  int cav_index() const {
    for (std::size_t i = 0; i < vehicles.size(); ++i)
      if (vehicles[i].kind == VehicleKind::Cav) return static_cast<int>(i);
    throw std::logic_error("world has no CAV");
  }
  const Vehicle& cav() const { return vehicles[cav_index()]; }
};

/// Forward displacement from `from` to `to` along driving direction, in [0, L).
inline double forward_distance(double from, double to, double length) {
  double d = std::fmod(to - from, length);
  if (d < 0) d += length;
  return d;
}

/// Signed wrapped displacement in (-L/2, L/2]; positive = ahead.
inline double signed_displacement(double from, double to, double length) {
  double d = forward_distance(from, to, length);
  if (d > length / 2) d -= length;
  return d;
}

/// Bumper-to-bumper forward gap; negative means overlap.
inline double ring_gap(const Vehicle& follower, const Vehicle& leader,
                       const TrackConfig& track) {
  return forward_distance(follower.position, leader.position, track.length) -
         leader.length;
}

/// Intelligent Driver Model longitudinal acceleration. Pass gap = +inf for a
/// free road. The desired-gap term is floored at zero so a fast-receding
/// leader cannot attract the follower.
inline double idm_acceleration(double v, double v_leader, double gap,
                               const IdmParams& p) {
  if (gap <= 0) return -kEmergencyDecel;
  const double free_flow = 1.0 - std::pow(v / p.desired_speed, p.exponent);
  if (!std::isfinite(gap)) return p.max_accel * free_flow;
  double s_star = p.min_gap + v * p.time_headway +
                  v * (v - v_leader) /
                      (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
  s_star = std::max(s_star, 0.0);
  const double ratio = s_star / gap;
  return p.max_accel * (free_flow - ratio * ratio);
}

/// Index of the nearest vehicle ahead of `idx` that shares a lane with it
/// (mid-maneuver vehicles occupy both lanes), or -1 on a free road.
inline int find_leader(const WorldState& w, int idx) {
  const Vehicle& me = w.vehicles[idx];
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < w.vehicles.size(); ++j) {
    if (static_cast<int>(j) == idx) continue;
    const Vehicle& other = w.vehicles[j];
    if (!me.shares_lane_with(other)) continue;
    const double d = forward_distance(me.position, other.position, w.track.length);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

/// Nearest vehicle ahead of / behind `idx` among vehicles occupying `lane`.
inline int find_leader_in_lane(const WorldState& w, int idx, int lane) {
  const Vehicle& me = w.vehicles[idx];
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < w.vehicles.size(); ++j) {
    if (static_cast<int>(j) == idx) continue;
    const Vehicle& other = w.vehicles[j];
    if (!other.occupies(lane)) continue;
    const double d = forward_distance(me.position, other.position, w.track.length);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

inline int find_follower_in_lane(const WorldState& w, int idx, int lane) {
  const Vehicle& me = w.vehicles[idx];
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < w.vehicles.size(); ++j) {
    if (static_cast<int>(j) == idx) continue;
    const Vehicle& other = w.vehicles[j];
    if (!other.occupies(lane)) continue;
    const double d = forward_distance(other.position, me.position, w.track.length);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

enum class LaneDecision { Stay, Left, Right };

namespace detail {

inline double accel_toward(const WorldState& w, const Vehicle& me, int leader_idx) {
  if (leader_idx < 0) return idm_acceleration(me.speed, 0.0, kNoLeaderGap, me.idm);
  const Vehicle& leader = w.vehicles[leader_idx];
  return idm_acceleration(me.speed, leader.speed, ring_gap(me, leader, w.track),
                          me.idm);
}

/// Incentive/safety screen for moving `idx` into `lane`. Returns the IDM
/// acceleration gain if the move qualifies.
inline std::optional<double> lane_gain(const WorldState& w, int idx, int lane,
                                       double current_accel) {
  if (lane < 0 || lane >= w.track.num_lanes) return std::nullopt;
  const Vehicle& me = w.vehicles[idx];
  const LaneChangeRules& rules = w.track.lane_change;

  const int leader = find_leader_in_lane(w, idx, lane);
  const int follower = find_follower_in_lane(w, idx, lane);

  double lead_gap = kNoLeaderGap;
  double lead_speed = 0.0;
  if (leader >= 0) {
    lead_gap = ring_gap(me, w.vehicles[leader], w.track);
    lead_speed = w.vehicles[leader].speed;
    if (lead_gap <= me.idm.min_gap) return std::nullopt;
  }
  if (follower >= 0) {
    const Vehicle& f = w.vehicles[follower];
    const double rear_gap = ring_gap(f, me, w.track);
    if (rear_gap <= f.idm.min_gap) return std::nullopt;
    if (idm_acceleration(f.speed, me.speed, rear_gap, f.idm) < -rules.safe_decel)
      return std::nullopt;
  }

  const double gain =
      idm_acceleration(me.speed, lead_speed, lead_gap, me.idm) - current_accel;
  if (gain <= rules.incentive_threshold) return std::nullopt;
  return gain;
}

}  // namespace detail

/// Incentive/safety lane-change heuristic. Also used by the rule-based
/// baseline for the CAV, so the vehicle kind is not checked here.
inline LaneDecision hdv_lane_change_decision(const WorldState& w, int idx) {
  const Vehicle& me = w.vehicles[idx];
  if (me.maneuver || me.lc_cooldown > 0) return LaneDecision::Stay;

  const double current_accel = detail::accel_toward(w, me, find_leader(w, idx));
  const auto right = detail::lane_gain(w, idx, me.lane - 1, current_accel);
  const auto left = detail::lane_gain(w, idx, me.lane + 1, current_accel);

  if (right && left) return *right >= *left ? LaneDecision::Right : LaneDecision::Left;
  if (right) return LaneDecision::Right;
  if (left) return LaneDecision::Left;
  return LaneDecision::Stay;
}

namespace detail {

inline bool pair_overlaps(const Vehicle& a, const Vehicle& b, const TrackConfig& tr) {
  if (!a.shares_lane_with(b)) return false;
  return ring_gap(a, b, tr) < 0 || ring_gap(b, a, tr) < 0;
}

}  // namespace detail

/// One synchronous simulation step: accelerations from the frozen snapshot,
/// HDV noise, Euler integration, lane-change intents, maneuver timers,
/// collision scan. A collision is reported once, at contact onset; the pair's
/// speeds are frozen at zero for that step and the ordinary dynamics resolve
/// the contact afterwards. Episode consequences are the environment's concern.
inline std::pair<WorldState, StepEvents> step_world(WorldState w, Action cav_action) {
  const TrackConfig& tr = w.track;
  const double dt = tr.dt;
  const int n = static_cast<int>(w.vehicles.size());
  StepEvents events;

  // contacts already present before the step are not re-reported
  std::vector<bool> pre_contact(static_cast<std::size_t>(n) * n, false);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (detail::pair_overlaps(w.vehicles[i], w.vehicles[j], tr))
        pre_contact[static_cast<std::size_t>(i) * n + j] = true;

  // accelerations against same-lane leaders, all from the pre-step state
  std::vector<double> accel(n);
  for (int i = 0; i < n; ++i)
    accel[i] = detail::accel_toward(w, w.vehicles[i], find_leader(w, i));
  for (int i = 0; i < n; ++i) {
    Vehicle& v = w.vehicles[i];
    if (v.kind == VehicleKind::Hdv && v.accel_noise_sd > 0)
      accel[i] += w.rng.normal(0.0, v.accel_noise_sd);
  }

  for (int i = 0; i < n; ++i) {
    Vehicle& v = w.vehicles[i];
    v.speed = std::clamp(v.speed + accel[i] * dt, 0.0, v.idm.desired_speed);
    const double travelled = v.speed * dt;
    const double laps_before = std::floor(v.cumulative_distance / tr.length);
    v.cumulative_distance += travelled;
    const double laps_after = std::floor(v.cumulative_distance / tr.length);
    v.position = std::fmod(v.position + travelled, tr.length);
    if (v.kind == VehicleKind::Cav && laps_after > laps_before)
      events.cav_loop_completed = true;
  }

  // CAV lateral command; illegal, off-road, or mid-maneuver requests degrade
  // to keep-lane without initiating anything
  const int maneuver_steps = static_cast<int>(std::ceil(kLaneChangeDuration / dt));
  const int ci = w.cav_index();
  {
    Vehicle& cav = w.vehicles[ci];
    if (cav_action != Action::KeepLane && !cav.maneuver) {
      const int target =
          cav.lane + (cav_action == Action::ChangeLeft ? 1 : -1);
      if (target >= 0 && target < tr.num_lanes) {
        cav.maneuver = Maneuver{target, maneuver_steps, maneuver_steps};
        events.cav_lane_change_initiated = true;
      }
    }
  }

  // HDV lateral decisions, all taken against the same intermediate snapshot
  if (tr.lane_change.hdv_enabled) {
    std::vector<LaneDecision> decisions(n, LaneDecision::Stay);
    for (int i = 0; i < n; ++i)
      if (w.vehicles[i].kind == VehicleKind::Hdv)
        decisions[i] = hdv_lane_change_decision(w, i);
    for (int i = 0; i < n; ++i) {
      if (decisions[i] == LaneDecision::Stay) continue;
      Vehicle& v = w.vehicles[i];
      const int target = v.lane + (decisions[i] == LaneDecision::Left ? 1 : -1);
      v.maneuver = Maneuver{target, maneuver_steps, maneuver_steps};
      v.lc_cooldown = tr.lane_change.cooldown_s;
    }
  }

  // timers: lane index flips at the halfway point, maneuver ends at zero
  for (int i = 0; i < n; ++i) {
    Vehicle& v = w.vehicles[i];
    v.lc_cooldown = std::max(0.0, v.lc_cooldown - dt);
    if (!v.maneuver) continue;
    Maneuver& m = *v.maneuver;
    --m.steps_left;
    if (m.steps_left == m.total_steps / 2) std::swap(v.lane, m.target_lane);
    if (m.steps_left <= 0) {
      v.maneuver.reset();
      if (v.kind == VehicleKind::Cav) events.cav_lane_change_completed = true;
    }
  }

  // collision scan over lane-sharing pairs, onset contacts only; a CAV pair
  // takes priority in the report since only CAV contacts are penalized
  // downstream
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (pre_contact[static_cast<std::size_t>(i) * n + j]) continue;
      const Vehicle& a = w.vehicles[i];
      const Vehicle& b = w.vehicles[j];
      if (!detail::pair_overlaps(a, b, tr)) continue;
      w.vehicles[i].speed = 0.0;
      w.vehicles[j].speed = 0.0;
      const bool has_cav = a.kind == VehicleKind::Cav || b.kind == VehicleKind::Cav;
      if (!events.collision || has_cav)
        events.collision = std::make_pair(a.id, b.id);
    }
  }

  ++w.step_count;
  return {std::move(w), events};
}

/// Initial speed/ability distributions for background traffic.
struct VehicleMix {
  double hdv_speed_min = 0.0, hdv_speed_max = 15.0;
  double hdv_desired_speed_min = 15.0, hdv_desired_speed_max = 30.0;
  double noise_sd_min = 0.0, noise_sd_max = 1.0;
};

/// Uniformly spaced vehicles on the loop, one CAV at position 0, random lanes.
/// Deterministic for a given seed.
inline WorldState init_world(const TrackConfig& track, int n_vehicles,
                             std::uint64_t seed, const VehicleMix& mix = {}) {
  track.validate();
  if (n_vehicles < 1) throw std::invalid_argument("need at least one vehicle");
  const IdmParams defaults{};
  if (n_vehicles * (kVehicleLength + defaults.min_gap) >= track.length)
    throw std::invalid_argument("vehicle count exceeds track capacity");

  WorldState w;
  w.track = track;
  w.rng = Rng(seed);
  w.vehicles.reserve(n_vehicles);
  const double spacing = track.length / n_vehicles;
  for (int i = 0; i < n_vehicles; ++i) {
    Vehicle v;
    v.id = i;
    v.position = i * spacing;
    v.lane = static_cast<int>(w.rng.uniform_int(track.num_lanes));
    if (i == 0) {
      v.kind = VehicleKind::Cav;
      v.speed = 0.0;
      v.idm.desired_speed = track.speed_limit;
    } else {
      v.kind = VehicleKind::Hdv;
      v.speed = w.rng.uniform(mix.hdv_speed_min, mix.hdv_speed_max);
      v.idm.desired_speed =
          w.rng.uniform(mix.hdv_desired_speed_min, mix.hdv_desired_speed_max);
      v.accel_noise_sd = w.rng.uniform(mix.noise_sd_min, mix.noise_sd_max);
    }
    w.vehicles.push_back(v);
  }
  return w;
}

}  // namespace ringdsq::sim
