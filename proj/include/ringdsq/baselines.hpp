#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "ringdsq/agent.hpp"
#include "ringdsq/observe.hpp"
#include "ringdsq/sim.hpp"

namespace ringdsq::policy {

enum class PolicyKind {
  NoLaneChange,
  RuleBased,
  DsqUniform,
  DsqLinear,
  DsqQuadratic,
  DsqUnnormalizedSum,
};

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::NoLaneChange: return "no_lane_change";
    case PolicyKind::RuleBased: return "rule_based";
    case PolicyKind::DsqUniform: return "dsq_uniform";
    case PolicyKind::DsqLinear: return "dsq_linear";
    case PolicyKind::DsqQuadratic: return "dsq_quadratic";
    case PolicyKind::DsqUnnormalizedSum: return "dsq_sum";
  }
  throw std::invalid_argument("unknown policy kind");
}

inline PolicyKind policy_kind_from(const std::string& s) {
  for (PolicyKind k :
       {PolicyKind::NoLaneChange, PolicyKind::RuleBased, PolicyKind::DsqUniform,
        PolicyKind::DsqLinear, PolicyKind::DsqQuadratic,
        PolicyKind::DsqUnnormalizedSum})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown policy '" + s + "'");
}

inline bool is_dsq(PolicyKind k) {
  return k != PolicyKind::NoLaneChange && k != PolicyKind::RuleBased;
}

/// Weighting configuration a DSQ policy kind implies.
inline std::pair<obs::WeightScheme, agent::PoolMode> dsq_weighting(PolicyKind k) {
  switch (k) {
    case PolicyKind::DsqUniform:
      return {obs::WeightScheme::Uniform, agent::PoolMode::Weighted};
    case PolicyKind::DsqLinear:
      return {obs::WeightScheme::Linear, agent::PoolMode::Weighted};
    case PolicyKind::DsqQuadratic:
      return {obs::WeightScheme::Quadratic, agent::PoolMode::Weighted};
    case PolicyKind::DsqUnnormalizedSum:
      return {obs::WeightScheme::Uniform, agent::PoolMode::UnnormalizedSum};
    default:
      throw std::invalid_argument("not a DSQ policy");
  }
}

inline Action no_lane_change_policy(const obs::Observation&) {
  return Action::KeepLane;
}

/// The background-traffic incentive/safety heuristic applied to the CAV;
/// keep-lane while a maneuver is in progress.
inline Action rule_based_policy(const sim::WorldState& world) {
  const int ci = world.cav_index();
  if (world.vehicles[ci].maneuver) return Action::KeepLane;
  switch (sim::hdv_lane_change_decision(world, ci)) {
    case sim::LaneDecision::Left: return Action::ChangeLeft;
    case sim::LaneDecision::Right: return Action::ChangeRight;
    case sim::LaneDecision::Stay: break;
  }
  return Action::KeepLane;
}

/// Uniform call shape for every policy; DSQ policies read the observation,
/// the rule-based one reads the world, and none of them draws randomness at
/// evaluation time.
using PolicyFn =
    std::function<Action(const obs::Observation&, const sim::WorldState&)>;

inline PolicyFn make_policy(PolicyKind kind, const agent::DsqAgent* dsq = nullptr) {
  switch (kind) {
    case PolicyKind::NoLaneChange:
      return [](const obs::Observation& o, const sim::WorldState&) {
        return no_lane_change_policy(o);
      };
    case PolicyKind::RuleBased:
      return [](const obs::Observation&, const sim::WorldState& w) {
        return rule_based_policy(w);
      };
    default: {
      if (dsq == nullptr)
        throw std::invalid_argument("DSQ policy needs a trained agent");
      const auto [scheme, pool] = dsq_weighting(kind);
      if (scheme != dsq->cfg.scheme || pool != dsq->cfg.pool)
        throw std::invalid_argument(
            "checkpoint weighting does not match the requested policy");
      const agent::DsqAgent* a = dsq;
      return [a](const obs::Observation& o, const sim::WorldState&) {
        const auto q = a->q(o);
        Rng unused(0);
        return agent::select_action(q, o.action_mask, 0.0, unused);
      };
    }
  }
}

}  // namespace ringdsq::policy
