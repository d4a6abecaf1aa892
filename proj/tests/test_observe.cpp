#include "ringdsq/observe.hpp"

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace ringdsq;
using namespace ringdsq::obs;
using sim::Vehicle;
using sim::VehicleKind;
using test::make_vehicle;
using test::make_world;

TEST(RelativeFeatures, DirectEvaluation) {
  sim::TrackConfig track{};
  RangeConfig ranges;
  ranges.connectivity = 200;
  const Vehicle cav = make_vehicle(0, VehicleKind::Cav, 250, 1, 10, 50);
  const Vehicle other = make_vehicle(1, VehicleKind::Hdv, 350, 2, 20, 30);
  const auto f = relative_features(other, cav, ranges, track);
  EXPECT_DOUBLE_EQ(f[0], 0.5);
  EXPECT_DOUBLE_EQ(f[1], 0.2);
  EXPECT_DOUBLE_EQ(f[2], 1.0);
}

TEST(RelativeFeatures, IdenticalKinematicsAreZero) {
  sim::TrackConfig track{};
  RangeConfig ranges;
  const Vehicle cav = make_vehicle(0, VehicleKind::Cav, 120, 2, 17, 50);
  const Vehicle other = make_vehicle(1, VehicleKind::Hdv, 120, 2, 17, 30);
  const auto f = relative_features(other, cav, ranges, track);
  EXPECT_DOUBLE_EQ(f[0], 0.0);
  EXPECT_DOUBLE_EQ(f[1], 0.0);
  EXPECT_DOUBLE_EQ(f[2], 0.0);
}

TEST(RelativeFeatures, WrapsAhead) {
  sim::TrackConfig track{};
  RangeConfig ranges;
  ranges.connectivity = 200;
  const Vehicle cav = make_vehicle(0, VehicleKind::Cav, 490, 1, 10, 50);
  const Vehicle other = make_vehicle(1, VehicleKind::Hdv, 10, 1, 10, 30);
  EXPECT_DOUBLE_EQ(relative_features(other, cav, ranges, track)[0], 0.1);
}

TEST(DownstreamMatrix, EmptyWhenNothingConnected) {
  auto w = make_world(sim::TrackConfig{},
                      {make_vehicle(0, VehicleKind::Cav, 0, 1, 10, 50)});
  EXPECT_TRUE(downstream_matrix(w, RangeConfig{}).empty());
}

TEST(DownstreamMatrix, SensedVehiclesAreExcluded) {
  auto w = make_world(sim::TrackConfig{},
                      {make_vehicle(0, VehicleKind::Cav, 0, 1, 10, 50),
                       make_vehicle(1, VehicleKind::Hdv, 30, 1, 10, 30)});
  RangeConfig ranges;  // sensing 50
  EXPECT_TRUE(downstream_matrix(w, ranges).empty());
  // boundary: exactly at the sensing range still counts as local
  w.vehicles[1].position = 50;
  EXPECT_TRUE(downstream_matrix(w, ranges).empty());
  w.vehicles[1].position = 50.1;
  EXPECT_EQ(downstream_matrix(w, ranges).size(), 1u);
}

TEST(DownstreamMatrix, SortedRowsMatchBruteForce) {
  sim::TrackConfig track{};
  RangeConfig ranges;
  ranges.connectivity = 200;
  auto w = make_world(track, {make_vehicle(0, VehicleKind::Cav, 0, 1, 10, 50),
                              make_vehicle(1, VehicleKind::Hdv, 100, 2, 12, 30),
                              make_vehicle(2, VehicleKind::Hdv, 60, 0, 8, 30),
                              make_vehicle(3, VehicleKind::Hdv, 150, 1, 20, 30),
                              make_vehicle(4, VehicleKind::Hdv, 260, 1, 20, 30),
                              make_vehicle(5, VehicleKind::Hdv, 495, 3, 20, 30)});
  const auto rows = downstream_matrix(w, ranges);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_DOUBLE_EQ(rows[0][0], 60.0 / 200);
  EXPECT_DOUBLE_EQ(rows[1][0], 100.0 / 200);
  EXPECT_DOUBLE_EQ(rows[2][0], 150.0 / 200);
  EXPECT_DOUBLE_EQ(rows[0][2], -1.0);  // lane 0 vs lane 1

  // brute-force filter over a randomized world agrees on the row count
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    auto world = sim::init_world(track, 40, rng.raw());
    const auto got = downstream_matrix(world, ranges);
    const Vehicle& cav = world.cav();
    std::size_t expected = 0;
    for (const Vehicle& v : world.vehicles) {
      if (v.kind == VehicleKind::Cav) continue;
      const double fwd = sim::forward_distance(cav.position, v.position, track.length);
      expected += fwd > ranges.sensing && fwd <= ranges.connectivity;
    }
    ASSERT_EQ(got.size(), expected);
    for (std::size_t i = 1; i < got.size(); ++i) ASSERT_LE(got[i - 1][0], got[i][0]);
    for (const auto& row : got) {
      ASSERT_GT(row[0], 0.0);
      ASSERT_LE(row[0], 1.0);
      ASSERT_GE(row[1], -1.0);
      ASSERT_LE(row[1], 1.0);
    }
  }
}

TEST(LocalMatrix, EmptyLanesReadAsFreeRoad) {
  auto w = make_world(sim::TrackConfig{},
                      {make_vehicle(0, VehicleKind::Cav, 100, 1, 10, 50)});
  const auto local = local_matrix(w, RangeConfig{});
  EXPECT_EQ(local[kLeftRow], (std::array<double, 3>{1.0, 0.0, -1.0}));
  EXPECT_EQ(local[kCurrentRow], (std::array<double, 3>{1.0, 0.0, 0.0}));
  EXPECT_EQ(local[kRightRow], (std::array<double, 3>{1.0, 0.0, 1.0}));
}

TEST(LocalMatrix, OffRoadLaneIsZeroSentinelAndMasked) {
  auto w = make_world(sim::TrackConfig{},
                      {make_vehicle(0, VehicleKind::Cav, 100, 0, 10, 50)});
  const auto o = build_observation(w, RangeConfig{});
  EXPECT_EQ(o.local[kRightRow], (std::array<double, 3>{0.0, 0.0, 1.0}));
  EXPECT_FALSE(o.action_mask[static_cast<int>(Action::ChangeRight)]);
  EXPECT_TRUE(o.action_mask[static_cast<int>(Action::KeepLane)]);
  EXPECT_TRUE(o.action_mask[static_cast<int>(Action::ChangeLeft)]);

  w.vehicles[0].lane = w.track.num_lanes - 1;
  const auto o2 = build_observation(w, RangeConfig{});
  EXPECT_EQ(o2.local[kLeftRow], (std::array<double, 3>{0.0, 0.0, -1.0}));
  EXPECT_FALSE(o2.action_mask[static_cast<int>(Action::ChangeLeft)]);
  EXPECT_TRUE(o2.action_mask[static_cast<int>(Action::ChangeRight)]);
}

TEST(LocalMatrix, AveragesSignedDistances) {
  sim::TrackConfig track{};
  RangeConfig ranges;
  ranges.connectivity = 100;  // raw 10 m and 30 m ahead -> dx 0.1 and 0.3
  auto w = make_world(track, {make_vehicle(0, VehicleKind::Cav, 200, 1, 10, 50),
                              make_vehicle(1, VehicleKind::Hdv, 210, 1, 10, 30),
                              make_vehicle(2, VehicleKind::Hdv, 230, 1, 10, 30)});
  const auto local = local_matrix(w, ranges);
  EXPECT_NEAR(local[kCurrentRow][0], 0.2, 1e-12);
  EXPECT_DOUBLE_EQ(local[kCurrentRow][1], 0.0);

  // a vehicle behind contributes a negative signed distance
  w.vehicles[2].position = 190;
  const auto local2 = local_matrix(w, ranges);
  EXPECT_NEAR(local2[kCurrentRow][0], 0.0, 1e-12);
}

TEST(CavVector, ScaledByScenarioTotals) {
  auto w = make_world(sim::TrackConfig{},
                      {make_vehicle(0, VehicleKind::Cav, 250, 2, 25, 50)});
  EXPECT_EQ(cav_vector(w), (std::array<double, 3>{0.5, 0.5, 0.5}));
  w.vehicles[0] = make_vehicle(0, VehicleKind::Cav, 0, 0, 0, 50);
  EXPECT_EQ(cav_vector(w), (std::array<double, 3>{0.0, 0.0, 0.0}));
  w.vehicles[0].lane = 3;
  EXPECT_DOUBLE_EQ(cav_vector(w)[2], 0.75);
}

TEST(Weights, SingleVehicleTakesAllWeight) {
  const double dx[] = {0.37};
  for (auto scheme : {WeightScheme::Uniform, WeightScheme::Linear,
                      WeightScheme::Quadratic}) {
    const auto w = weights(dx, scheme);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_DOUBLE_EQ(w[0], 1.0);
  }
}

TEST(Weights, HandComputedExamples) {
  const double dx[] = {0.2, 0.4};
  const auto lin = weights(dx, WeightScheme::Linear);
  EXPECT_EQ(lin[0], 2.0 / 3.0);
  EXPECT_EQ(lin[1], 1.0 / 3.0);
  const auto quad = weights(dx, WeightScheme::Quadratic);
  EXPECT_EQ(quad[0], 0.8);
  EXPECT_EQ(quad[1], 0.2);
}

TEST(Weights, EmptyInputGivesEmptyOutput) {
  EXPECT_TRUE(weights({}, WeightScheme::Linear).empty());
}

TEST(Weights, NormalizedNonnegativeAndDecreasing) {
  Rng rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform_int(20));
    std::vector<double> dx(n);
    double d = rng.uniform(0.02, 0.1);
    for (int i = 0; i < n; ++i) {
      dx[i] = d;
      d += rng.uniform(0.01, 0.05);
    }
    for (auto scheme : {WeightScheme::Uniform, WeightScheme::Linear,
                        WeightScheme::Quadratic}) {
      const auto w = weights(dx, scheme);
      double sum = 0;
      for (double wi : w) {
        ASSERT_GE(wi, 0.0);
        sum += wi;
      }
      ASSERT_NEAR(sum, 1.0, 1e-12);
      if (scheme != WeightScheme::Uniform)
        for (int i = 1; i < n; ++i) ASSERT_GT(w[i - 1], w[i]);
      else
        for (int i = 1; i < n; ++i) ASSERT_EQ(w[i - 1], w[i]);
    }
  }
}

TEST(Weights, ScaleInvariantAboveTheClamp) {
  const double dx[] = {0.05, 0.12, 0.4};
  std::vector<double> scaled(std::begin(dx), std::end(dx));
  for (double& d : scaled) d *= 2.0;
  for (auto scheme : {WeightScheme::Linear, WeightScheme::Quadratic}) {
    const auto a = weights(dx, scheme);
    const auto b = weights(scaled, scheme);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(Weights, NearZeroDistanceIsClamped) {
  const double dx[] = {1e-9, 0.5};
  const auto w = weights(dx, WeightScheme::Linear);
  // clamped to 0.01: weights (100, 2) / 102
  EXPECT_NEAR(w[0], 100.0 / 102.0, 1e-12);
  EXPECT_NEAR(w[1], 2.0 / 102.0, 1e-12);
}

TEST(Observation, ShapeContractHolds) {
  Rng rng(23);
  sim::TrackConfig track{};
  for (int rep = 0; rep < 20; ++rep) {
    auto w = sim::init_world(track, 30, rng.raw());
    const auto o = build_observation(w, RangeConfig{});
    EXPECT_EQ(o.local.size(), 3u);
    EXPECT_EQ(o.cav.size(), 3u);
    for (const auto& row : o.downstream) EXPECT_GT(row[0], 0.0);
    EXPECT_TRUE(o.action_mask[1]);
  }
}
