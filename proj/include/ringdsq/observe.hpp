#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "ringdsq/action.hpp"
#include "ringdsq/sim.hpp"

namespace ringdsq::obs {

struct RangeConfig {
  double sensing = 50.0;        // m, two-sided local window
  double connectivity = 300.0;  // m, forward communication range

  void validate() const {
    if (!(sensing > 0)) throw std::invalid_argument("sensing range must be positive");
    if (!(connectivity > 0))
      throw std::invalid_argument("connectivity range must be positive");
  }
};

enum class WeightScheme { Uniform, Linear, Quadratic };

/// Distances below this fraction of the connectivity range are clamped before
/// inversion, so one near-zero distance cannot absorb all weight.
inline constexpr double kWeightDistanceFloor = 0.01;

/// Row indices of the local matrix.
inline constexpr int kLeftRow = 0;
inline constexpr int kCurrentRow = 1;
inline constexpr int kRightRow = 2;

/// Tripartite state: variable-length downstream rows (dx, dv, dl) sorted by
/// ascending dx, a fixed 3x3 left/current/right local summary, and the
/// normalized ego vector. `action_mask[a]` is true when the action keeps the
/// vehicle on the road; keep-lane is always available.
struct Observation {
  std::vector<std::array<double, 3>> downstream;
  std::array<std::array<double, 3>, 3> local{};
  std::array<double, 3> cav{};
  std::array<bool, 3> action_mask{true, true, true};
};

/// (dx, dv, dl) of `other` relative to `cav`: signed wrapped displacement over
/// the connectivity range, speed difference over the speed limit, lane index
/// difference.
inline std::array<double, 3> relative_features(const sim::Vehicle& other,
                                               const sim::Vehicle& cav,
                                               const RangeConfig& ranges,
                                               const sim::TrackConfig& track) {
  const double dx =
      sim::signed_displacement(cav.position, other.position, track.length) /
      ranges.connectivity;
  const double dv = (other.speed - cav.speed) / track.speed_limit;
  const double dl = static_cast<double>(other.lane - cav.lane);
  return {dx, dv, dl};
}

/// Rows for vehicles ahead of the CAV with raw forward distance in
/// (sensing, connectivity], ascending by distance.
inline std::vector<std::array<double, 3>> downstream_matrix(
    const sim::WorldState& w, const RangeConfig& ranges) {
  const sim::Vehicle& cav = w.cav();
  std::vector<std::pair<double, int>> in_window;  // (forward distance, index)
  for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
    const sim::Vehicle& v = w.vehicles[i];
    if (v.kind == sim::VehicleKind::Cav) continue;
    const double fwd =
        sim::forward_distance(cav.position, v.position, w.track.length);
    if (fwd > ranges.sensing && fwd <= ranges.connectivity)
      in_window.emplace_back(fwd, static_cast<int>(i));
  }
  std::sort(in_window.begin(), in_window.end());

  std::vector<std::array<double, 3>> rows;
  rows.reserve(in_window.size());
  for (const auto& [fwd, idx] : in_window) {
    const sim::Vehicle& v = w.vehicles[idx];
    rows.push_back({fwd / ranges.connectivity,
                    (v.speed - cav.speed) / w.track.speed_limit,
                    static_cast<double>(v.lane - cav.lane)});
  }
  return rows;
}

namespace detail {

/// One local row: mean signed dx and dv over vehicles of `lane` within the
/// sensing window. Empty lane reads as free road far ahead; a lane off the
/// road is the all-zero sentinel.
inline std::array<double, 3> local_row(const sim::WorldState& w,
                                       const RangeConfig& ranges, int lane,
                                       double label) {
  if (lane < 0 || lane >= w.track.num_lanes) return {0.0, 0.0, label};
  const sim::Vehicle& cav = w.cav();
  double sum_dx = 0, sum_dv = 0;
  int count = 0;
  for (const sim::Vehicle& v : w.vehicles) {
    if (v.kind == sim::VehicleKind::Cav || v.lane != lane) continue;
    const double disp =
        sim::signed_displacement(cav.position, v.position, w.track.length);
    if (std::abs(disp) > ranges.sensing) continue;
    sum_dx += disp / ranges.connectivity;
    sum_dv += (v.speed - cav.speed) / w.track.speed_limit;
    ++count;
  }
  if (count == 0) return {1.0, 0.0, label};
  return {sum_dx / count, sum_dv / count, label};
}

}  // namespace detail

/// Left/current/right rows with fixed labels (-1, 0, +1). Lane 0 is the
/// rightmost lane, so "left" is the next-higher index.
inline std::array<std::array<double, 3>, 3> local_matrix(const sim::WorldState& w,
                                                         const RangeConfig& ranges) {
  const int lane = w.cav().lane;
  return {detail::local_row(w, ranges, lane + 1, -1.0),
          detail::local_row(w, ranges, lane, 0.0),
          detail::local_row(w, ranges, lane - 1, 1.0)};
}

/// Ego state scaled by the scenario totals.
inline std::array<double, 3> cav_vector(const sim::WorldState& w) {
  const sim::Vehicle& cav = w.cav();
  return {cav.position / w.track.length, cav.speed / w.track.speed_limit,
          static_cast<double>(cav.lane) / w.track.num_lanes};
}

inline Observation build_observation(const sim::WorldState& w,
                                     const RangeConfig& ranges) {
  Observation o;
  o.downstream = downstream_matrix(w, ranges);
  o.local = local_matrix(w, ranges);
  o.cav = cav_vector(w);
  const int lane = w.cav().lane;
  o.action_mask = {lane + 1 < w.track.num_lanes, true, lane - 1 >= 0};
  return o;
}

/// Normalized importance weights over downstream distances. Uniform reads as
/// mean pooling; Linear and Quadratic are inverse (squared) distance.
inline std::vector<double> weights(std::span<const double> dx, WeightScheme scheme) {
  const std::size_t n = dx.size();
  std::vector<double> w(n);
  if (n == 0) return w;
  if (scheme == WeightScheme::Uniform) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
    return w;
  }
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double inv = 1.0 / std::max(dx[i], kWeightDistanceFloor);
    w[i] = scheme == WeightScheme::Linear ? inv : inv * inv;
    total += w[i];
  }
  for (double& wi : w) wi /= total;
  return w;
}

}  // namespace ringdsq::obs
