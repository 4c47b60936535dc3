#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dgon/dynamics.hpp"
#include "dgon/tensor.hpp"

namespace dgon {

/// Finite history of the node states: sensor values at offsets τ before the anchor time t.
///
/// Offsets are strictly decreasing (sensor times ascend) and lie in [0, t_M];
/// column k of `values` is the state at t - offsets[k].
struct MemoryWindow {
  std::vector<double> offsets;
  Tensor values;  // [nodes x sensors]
  double memory_length = 0.0;
  double anchor_time = 0.0;

  std::size_t sensor_count() const noexcept { return offsets.size(); }
  std::size_t node_count() const noexcept { return values.rows(); }
  /// Throws DataError if any window invariant is broken.
  void validate() const;
};

enum class WindowMode { fixed, random };

/// Time in seconds converted to a whole number of grid steps.
/// Throws DomainError unless `seconds` is a non-negative integer multiple of dt.
std::size_t grid_steps(double seconds, double dt);

/// m sensors evenly spaced on [t - t_M, t], both ends included.
MemoryWindow fixed_window(const Trajectory& traj, std::size_t anchor_index, double memory_length,
                          std::size_t sensors);

/// floor(m/2) distinct points of the m-point grid, drawn without replacement,
/// always containing the current time (offset 0).
MemoryWindow random_window(const Trajectory& traj, std::size_t anchor_index, double memory_length,
                           std::size_t sensors, std::uint64_t seed);

struct SamplingConfig {
  double memory_length = 0.05;  // t_M, seconds
  std::size_t sensors = 51;     // m
  double horizon = 0.02;        // h, seconds
  std::size_t queries_per_anchor = 4;
  std::size_t anchor_stride = 0;  // grid steps; 0 means h / dt
  WindowMode mode = WindowMode::fixed;
  std::uint64_t seed = 0;
};

/// Window for `anchor_index` in the configured mode. Random windows draw from a
/// stream keyed by (seed, trajectory_index, anchor_index).
MemoryWindow make_window(const Trajectory& traj, std::size_t anchor_index,
                         const SamplingConfig& cfg, std::uint64_t seed,
                         std::size_t trajectory_index);

struct WindowSource {
  std::size_t trajectory = 0;
  std::size_t anchor = 0;
};

struct Query {
  std::size_t window = 0;  // index into TripletSet::windows
  double offset = 0.0;     // h_n, seconds
  Tensor target;           // state at t + h_n
};

/// Window from arbitrary (offset, column) pairs, reordered into canonical
/// descending-offset order; validated.
MemoryWindow canonical_window(std::vector<double> offsets, const Tensor& values,
                              double memory_length, double anchor_time = 0.0);

/// Non-owning view of one (window, h_n, target) training triplet.
struct Triplet {
  const MemoryWindow& window;
  double query;
  const Tensor& target;
};

/// Triplets sharing storage for windows: several queries reference one window.
struct TripletSet {
  std::vector<MemoryWindow> windows;
  std::vector<WindowSource> sources;  // parallel to windows
  std::vector<Query> queries;
  std::size_t skipped_trajectories = 0;

  std::size_t size() const noexcept { return queries.size(); }
  bool empty() const noexcept { return queries.empty(); }
  Triplet operator[](std::size_t k) const {
    const Query& q = queries[k];
    return Triplet{windows[q.window], q.offset, q.target};
  }
};

/// Anchor row indices used for `traj`: t_M/dt, stepped by the stride, while t + h fits.
std::vector<std::size_t> anchor_indices(const Trajectory& traj, const SamplingConfig& cfg);

/// One window per valid anchor and `queries_per_anchor` queries per window.
/// h_n = h is always one of them; the rest are grid points drawn from [0, h).
/// Trajectories shorter than t_M + h are skipped and counted.
TripletSet build_triplets(std::span<const Trajectory> trajs, const SamplingConfig& cfg);

/// Replaces every window with a freshly drawn one (random mode) keyed by `seed`.
void resample_windows(TripletSet& set, std::span<const Trajectory> trajs,
                      const SamplingConfig& cfg, std::uint64_t seed);

struct DatasetSplit {
  std::vector<Trajectory> train;
  std::vector<Trajectory> validation;
  std::vector<Trajectory> test;
  // Source indices of each partition (empty for time-based splits).
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
  std::vector<std::size_t> test_indices;
  std::array<double, 3> fractions{0.6, 0.2, 0.2};
  std::uint64_t seed = 0;
  SamplingConfig sampling;  // set by build_split_triplets

  TripletSet train_set;
  TripletSet validation_set;
  TripletSet test_set;
};

/// Shuffles trajectory indices and partitions them; train and validation sizes
/// are floor(n * fraction), the remainder goes to test.
DatasetSplit split_trajectories(std::span<const Trajectory> trajs, std::array<double, 3> fractions,
                                std::uint64_t seed);

/// Contiguous train | validation | test segments of one long trajectory.
DatasetSplit split_by_time(const Trajectory& traj, std::array<double, 3> fractions);

/// Builds the three triplet sets, each from its own partition only.
void build_split_triplets(DatasetSplit& split, const SamplingConfig& cfg);

}  // namespace dgon
