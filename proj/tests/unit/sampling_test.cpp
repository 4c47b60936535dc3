#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "dgon/errors.hpp"
#include "dgon/sampling.hpp"

using namespace dgon;

namespace {

Trajectory ramp(std::size_t rows, double dt, std::size_t nodes = 2) {
  Tensor s({rows, nodes});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < nodes; ++i) s(r, i) = static_cast<double>(r) + 1000.0 * i;
  }
  return Trajectory(std::make_shared<const Graph>(Graph::path(nodes)), dt, 0.0, std::move(s));
}

std::vector<Trajectory> ramps(std::size_t count, std::size_t rows) {
  std::vector<Trajectory> out;
  for (std::size_t k = 0; k < count; ++k) {
    Tensor s({rows, 2});
    for (std::size_t r = 0; r < rows; ++r) {
      s(r, 0) = static_cast<double>(k * 10000 + r);
      s(r, 1) = -s(r, 0);
    }
    out.emplace_back(std::make_shared<const Graph>(Graph::path(2)), 1e-3, 0.0, std::move(s));
  }
  return out;
}

}  // namespace

TEST(FixedWindow, GridOffsets) {
  Trajectory t = ramp(200, 1e-3);
  MemoryWindow w = fixed_window(t, 120, 0.05, 51);
  ASSERT_EQ(w.sensor_count(), 51u);
  for (std::size_t k = 0; k < 51; ++k) {
    EXPECT_NEAR(w.offsets[k], 0.05 - 0.001 * k, 1e-15);
    EXPECT_EQ(w.values(0, k), static_cast<double>(120 - 50 + k));
  }
  EXPECT_EQ(w.anchor_time, t.time(120));
}

TEST(FixedWindow, TwoSensors) {
  Trajectory t = ramp(100, 1e-3);
  MemoryWindow w = fixed_window(t, 60, 0.05, 2);
  EXPECT_EQ(w.offsets, (std::vector<double>{0.05, 0.0}));
  EXPECT_EQ(w.values(1, 0), 1010.0);
  EXPECT_EQ(w.values(1, 1), 1060.0);
}

TEST(FixedWindow, Errors) {
  Trajectory t = ramp(100, 1e-3);
  EXPECT_THROW(fixed_window(t, 49, 0.05, 51), DataError);
  EXPECT_THROW(fixed_window(t, 60, 0.05, 52), DomainError);
  EXPECT_THROW(fixed_window(t, 60, 0.0505, 11), DomainError);
  EXPECT_THROW(fixed_window(t, 60, 0.05, 1), DomainError);
}

TEST(FixedWindow, NoHiddenRandomness) {
  Trajectory t = ramp(100, 1e-3);
  MemoryWindow a = fixed_window(t, 70, 0.05, 11), b = fixed_window(t, 70, 0.05, 11);
  EXPECT_EQ(a.offsets, b.offsets);
  EXPECT_EQ(a.values, b.values);
}

TEST(RandomWindow, HalfTheSensorsIncludingNow) {
  Trajectory t = ramp(100, 1e-3);
  MemoryWindow w = random_window(t, 60, 0.003, 4, 9);
  ASSERT_EQ(w.sensor_count(), 2u);
  EXPECT_EQ(w.offsets.back(), 0.0);
}

TEST(RandomWindow, SeededAndOnGrid) {
  Trajectory t = ramp(300, 1e-3);
  std::set<double> grid;
  for (std::size_t k = 0; k < 51; ++k) grid.insert(fixed_window(t, 150, 0.05, 51).offsets[k]);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    MemoryWindow a = random_window(t, 150, 0.05, 51, seed);
    MemoryWindow b = random_window(t, 150, 0.05, 51, seed);
    EXPECT_EQ(a.offsets, b.offsets);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.sensor_count(), 25u);
    EXPECT_EQ(a.offsets.back(), 0.0);
    for (double tau : a.offsets) {
      EXPECT_TRUE(grid.count(tau)) << tau;
      EXPECT_GE(tau, 0.0);
      EXPECT_LE(tau, 0.05);
    }
    a.validate();
  }
}

TEST(CanonicalWindow, SortsByDescendingOffset) {
  Tensor v = Tensor::matrix({{1, 2, 3}});
  MemoryWindow w = canonical_window({0.0, 0.04, 0.02}, v, 0.05);
  EXPECT_EQ(w.offsets, (std::vector<double>{0.04, 0.02, 0.0}));
  EXPECT_EQ(w.values, Tensor::matrix({{2, 3, 1}}));
  EXPECT_THROW(canonical_window({0.0, 0.0}, Tensor::matrix({{1, 2}}), 0.05), DataError);
  EXPECT_THROW(canonical_window({0.06, 0.0}, Tensor::matrix({{1, 2}}), 0.05), DataError);
}

TEST(BuildTriplets, ExactFitGivesOneAnchor) {
  SamplingConfig cfg;
  cfg.memory_length = 0.05;
  cfg.horizon = 0.02;
  cfg.sensors = 11;
  cfg.anchor_stride = 1000;
  std::vector<Trajectory> trajs{ramp(71, 1e-3)};
  TripletSet set = build_triplets(trajs, cfg);
  EXPECT_EQ(set.windows.size(), 1u);
  EXPECT_EQ(set.size(), 4u);
}

TEST(BuildTriplets, SingleQueryIsHorizon) {
  SamplingConfig cfg;
  cfg.queries_per_anchor = 1;
  cfg.sensors = 11;
  std::vector<Trajectory> trajs{ramp(300, 1e-3)};
  TripletSet set = build_triplets(trajs, cfg);
  ASSERT_FALSE(set.empty());
  for (const Query& q : set.queries) EXPECT_DOUBLE_EQ(q.offset, 0.02);
}

TEST(BuildTriplets, CountAndTargets) {
  SamplingConfig cfg;
  cfg.memory_length = 0.01;
  cfg.horizon = 0.005;
  cfg.sensors = 6;
  cfg.queries_per_anchor = 3;
  cfg.anchor_stride = 7;
  for (std::size_t rows : {16u, 17u, 40u, 101u}) {
    std::vector<Trajectory> trajs{ramp(rows, 1e-3, 3)};
    TripletSet set = build_triplets(trajs, cfg);
    // anchors a = 10 + 7k with a + 5 <= rows - 1
    const std::size_t anchors = rows - 1 >= 15 ? (rows - 1 - 15) / 7 + 1 : 0;
    EXPECT_EQ(set.windows.size(), anchors);
    EXPECT_EQ(set.size(), anchors * 3);
    for (std::size_t k = 0; k < set.size(); ++k) {
      const auto tr = set[k];
      const std::size_t anchor = set.sources[set.queries[k].window].anchor;
      const double steps = std::round(tr.query / 1e-3);
      EXPECT_GE(tr.query, 0.0);
      EXPECT_LE(tr.query, 0.005 + 1e-15);
      EXPECT_EQ(tr.target[0], static_cast<double>(anchor) + steps);
      for (double tau : tr.window.offsets) {
        EXPECT_GE(tau, 0.0);
        EXPECT_LE(tau, cfg.memory_length);
      }
    }
  }
}

TEST(BuildTriplets, ShortTrajectoriesSkipped) {
  SamplingConfig cfg;
  cfg.sensors = 11;
  std::vector<Trajectory> trajs{ramp(30, 1e-3), ramp(200, 1e-3)};
  TripletSet set = build_triplets(trajs, cfg);
  EXPECT_EQ(set.skipped_trajectories, 1u);
  EXPECT_FALSE(set.empty());
}

TEST(Split, Sizes) {
  auto trajs = ramps(10, 80);
  DatasetSplit s = split_trajectories(trajs, {0.6, 0.2, 0.2}, 1);
  EXPECT_EQ(s.train.size(), 6u);
  EXPECT_EQ(s.validation.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
  auto three = ramps(3, 80);
  DatasetSplit t = split_trajectories(three, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1);
  EXPECT_EQ(t.train.size(), 1u);
  EXPECT_EQ(t.validation.size(), 1u);
  EXPECT_EQ(t.test.size(), 1u);
}

TEST(Split, SeededAndValidated) {
  auto trajs = ramps(10, 80);
  EXPECT_EQ(split_trajectories(trajs, {0.6, 0.2, 0.2}, 4).train_indices,
            split_trajectories(trajs, {0.6, 0.2, 0.2}, 4).train_indices);
  EXPECT_THROW(split_trajectories(trajs, {0.6, 0.2, 0.3}, 4), ConfigError);
  EXPECT_THROW(split_trajectories(trajs, {0.8, 0.2, 0.0}, 4), ConfigError);
  auto two = ramps(2, 80);
  EXPECT_THROW(split_trajectories(two, {0.6, 0.2, 0.2}, 4), DataError);
}

TEST(Split, PartitionsAreDisjoint) {
  auto trajs = ramps(23, 120);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    DatasetSplit s = split_trajectories(trajs, {0.6, 0.2, 0.2}, seed);
    SamplingConfig cfg;
    cfg.memory_length = 0.02;
    cfg.horizon = 0.01;
    cfg.sensors = 5;
    build_split_triplets(s, cfg);
    std::set<std::size_t> seen;
    for (auto* idx : {&s.train_indices, &s.validation_indices, &s.test_indices}) {
      for (std::size_t i : *idx) EXPECT_TRUE(seen.insert(i).second);
    }
    EXPECT_EQ(seen.size(), 23u);
    // Values encode the source trajectory, so the triplet sets must not share any.
    auto owners = [](const TripletSet& set) {
      std::set<long> o;
      for (const auto& w : set.windows) o.insert(std::lround(w.values(0, 0)) / 10000);
      return o;
    };
    auto a = owners(s.train_set), b = owners(s.validation_set), c = owners(s.test_set);
    for (long x : a) {
      EXPECT_FALSE(b.count(x));
      EXPECT_FALSE(c.count(x));
    }
    for (long x : b) EXPECT_FALSE(c.count(x));
  }
}

TEST(Split, ByTimeIsContiguous) {
  Trajectory t = ramp(101, 1e-3);
  DatasetSplit s = split_by_time(t, {0.6, 0.2, 0.2});
  EXPECT_EQ(s.train.size(), 1u);
  EXPECT_EQ(s.train[0].states()(0, 0), 0.0);
  const double last_train = s.train[0].states()(s.train[0].rows() - 1, 0);
  EXPECT_GT(s.validation[0].states()(0, 0), last_train - 1);
  EXPECT_GT(s.test[0].states()(0, 0), s.validation[0].states()(0, 0));
}
