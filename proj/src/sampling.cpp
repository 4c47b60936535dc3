#include "dgon/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dgon/errors.hpp"
#include "dgon/random.hpp"

namespace dgon {

namespace {

void check_fractions(const std::array<double, 3>& f) {
  for (double x : f) {
    if (!(x > 0.0)) throw ConfigError("split fractions must be positive");
  }
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

std::size_t floor_share(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
}

// Grid positions (0 = oldest, steps_M = anchor) of the m evenly spaced sensors.
std::vector<std::size_t> sensor_grid(std::size_t memory_steps, std::size_t sensors) {
  std::vector<std::size_t> grid(sensors);
  for (std::size_t k = 0; k < sensors; ++k) {
    grid[k] = static_cast<std::size_t>(std::llround(static_cast<double>(k * memory_steps) /
                                                    static_cast<double>(sensors - 1)));
  }
  return grid;
}

struct WindowGeometry {
  std::size_t memory_steps;
  std::vector<std::size_t> grid;
};

WindowGeometry window_geometry(const Trajectory& traj, std::size_t anchor_index,
                               double memory_length, std::size_t sensors) {
  if (sensors < 2) throw DomainError("memory window needs at least 2 sensors");
  const std::size_t memory_steps = grid_steps(memory_length, traj.dt());
  if (memory_steps + 1 < sensors) {
    throw DomainError("memory length of " + std::to_string(memory_steps) + " steps cannot hold " +
                      std::to_string(sensors) + " distinct grid sensors");
  }
  if (anchor_index < memory_steps || anchor_index >= traj.rows()) {
    throw DataError("insufficient history: anchor row " + std::to_string(anchor_index) +
                    " needs " + std::to_string(memory_steps) + " rows of history");
  }
  return {memory_steps, sensor_grid(memory_steps, sensors)};
}

MemoryWindow gather(const Trajectory& traj, std::size_t anchor_index, double memory_length,
                    std::size_t memory_steps, const std::vector<std::size_t>& positions) {
  const std::size_t n = traj.node_count();
  MemoryWindow w;
  w.memory_length = memory_length;
  w.anchor_time = traj.time(anchor_index);
  w.values = Tensor({n, positions.size()});
  w.offsets.reserve(positions.size());
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const std::size_t back = memory_steps - positions[k];
    w.offsets.push_back(static_cast<double>(back) * traj.dt());
    const auto row = traj.row(anchor_index - back);
    for (std::size_t i = 0; i < n; ++i) w.values(i, k) = row[i];
  }
  return w;
}

}  // namespace

void MemoryWindow::validate() const {
  if (offsets.empty()) throw DataError("memory window has no sensors");
  if (values.rank() != 2 || values.cols() != offsets.size()) {
    throw DataError("memory window values " + values.shape_string() + " do not match " +
                    std::to_string(offsets.size()) + " sensor offsets");
  }
  const double tol = 1e-12 * std::max(1.0, memory_length);
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    if (offsets[k] < -tol || offsets[k] > memory_length + tol) {
      throw DataError("sensor offset outside [0, t_M]");
    }
    if (k > 0 && !(offsets[k] < offsets[k - 1])) {
      throw DataError("sensor offsets must be strictly decreasing");
    }
  }
  if (!values.all_finite()) throw DataError("memory window contains non-finite values");
}

MemoryWindow canonical_window(std::vector<double> offsets, const Tensor& values,
                              double memory_length, double anchor_time) {
  if (values.rank() != 2 || values.cols() != offsets.size()) {
    throw DataError("window values " + values.shape_string() + " do not match " +
                    std::to_string(offsets.size()) + " offsets");
  }
  std::vector<std::size_t> order(offsets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return offsets[a] > offsets[b]; });
  MemoryWindow w;
  w.memory_length = memory_length;
  w.anchor_time = anchor_time;
  w.values = Tensor({values.rows(), offsets.size()});
  for (std::size_t k = 0; k < order.size(); ++k) {
    w.offsets.push_back(offsets[order[k]]);
    for (std::size_t i = 0; i < values.rows(); ++i) w.values(i, k) = values(i, order[k]);
  }
  w.validate();
  return w;
}

std::size_t grid_steps(double seconds, double dt) {
  if (!(dt > 0.0) || !(seconds >= 0.0)) throw DomainError("grid_steps: invalid time or dt");
  const double ratio = seconds / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-6 * std::max(1.0, ratio)) {
    throw DomainError(std::to_string(seconds) + " s is not a whole multiple of dt = " +
                      std::to_string(dt));
  }
  return static_cast<std::size_t>(rounded);
}

MemoryWindow fixed_window(const Trajectory& traj, std::size_t anchor_index, double memory_length,
                          std::size_t sensors) {
  const auto geo = window_geometry(traj, anchor_index, memory_length, sensors);
  return gather(traj, anchor_index, memory_length, geo.memory_steps, geo.grid);
}

MemoryWindow random_window(const Trajectory& traj, std::size_t anchor_index, double memory_length,
                           std::size_t sensors, std::uint64_t seed) {
  const auto geo = window_geometry(traj, anchor_index, memory_length, sensors);
  const std::size_t count = sensors / 2;
  Rng rng(seed);
  // The newest grid point is always kept; the others come from the older m - 1.
  std::vector<std::size_t> picks = rng.sample_without_replacement(sensors - 1, count - 1);
  picks.push_back(sensors - 1);
  std::sort(picks.begin(), picks.end());
  std::vector<std::size_t> positions;
  positions.reserve(picks.size());
  for (std::size_t k : picks) positions.push_back(geo.grid[k]);
  return gather(traj, anchor_index, memory_length, geo.memory_steps, positions);
}

MemoryWindow make_window(const Trajectory& traj, std::size_t anchor_index,
                         const SamplingConfig& cfg, std::uint64_t seed,
                         std::size_t trajectory_index) {
  if (cfg.mode == WindowMode::fixed) {
    return fixed_window(traj, anchor_index, cfg.memory_length, cfg.sensors);
  }
  return random_window(traj, anchor_index, cfg.memory_length, cfg.sensors,
                       derive_seed(seed, trajectory_index, anchor_index));
}

std::vector<std::size_t> anchor_indices(const Trajectory& traj, const SamplingConfig& cfg) {
  const std::size_t memory_steps = grid_steps(cfg.memory_length, traj.dt());
  const std::size_t horizon_steps = grid_steps(cfg.horizon, traj.dt());
  if (horizon_steps == 0) throw DomainError("prediction horizon must span at least one step");
  const std::size_t stride = cfg.anchor_stride == 0 ? horizon_steps : cfg.anchor_stride;
  std::vector<std::size_t> anchors;
  for (std::size_t a = memory_steps; a + horizon_steps < traj.rows(); a += stride) {
    anchors.push_back(a);
  }
  return anchors;
}

TripletSet build_triplets(std::span<const Trajectory> trajs, const SamplingConfig& cfg) {
  if (cfg.queries_per_anchor == 0) throw ConfigError("queries_per_anchor must be at least 1");
  TripletSet set;
  Rng query_rng(derive_seed(cfg.seed, 0x71u));
  for (std::size_t ti = 0; ti < trajs.size(); ++ti) {
    const Trajectory& traj = trajs[ti];
    const std::vector<std::size_t> anchors = anchor_indices(traj, cfg);
    if (anchors.empty()) {
      ++set.skipped_trajectories;
      continue;
    }
    const std::size_t horizon_steps = grid_steps(cfg.horizon, traj.dt());
    const std::size_t extra = cfg.queries_per_anchor - 1;
    for (std::size_t a : anchors) {
      const std::size_t w = set.windows.size();
      set.windows.push_back(make_window(traj, a, cfg, cfg.seed, ti));
      set.sources.push_back({ti, a});
      std::vector<std::size_t> steps{horizon_steps};
      if (extra <= horizon_steps) {
        for (std::size_t s : query_rng.sample_without_replacement(horizon_steps, extra)) {
          steps.push_back(s);
        }
      } else {
        for (std::size_t k = 0; k < extra; ++k) steps.push_back(query_rng.index(horizon_steps));
      }
      for (std::size_t s : steps) {
        Query q;
        q.window = w;
        q.offset = static_cast<double>(s) * traj.dt();
        q.target = Tensor::vector(traj.row(a + s));
        set.queries.push_back(std::move(q));
      }
    }
  }
  return set;
}

void resample_windows(TripletSet& set, std::span<const Trajectory> trajs,
                      const SamplingConfig& cfg, std::uint64_t seed) {
  for (std::size_t w = 0; w < set.windows.size(); ++w) {
    const WindowSource& src = set.sources[w];
    set.windows[w] = make_window(trajs[src.trajectory], src.anchor, cfg, seed, src.trajectory);
  }
}

DatasetSplit split_trajectories(std::span<const Trajectory> trajs, std::array<double, 3> fractions,
                                std::uint64_t seed) {
  check_fractions(fractions);
  const std::size_t n = trajs.size();
  if (n < 3) throw DataError("need at least 3 trajectories to split, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5u));
  rng.shuffle(order);
  const std::size_t n_train = floor_share(n, fractions[0]);
  const std::size_t n_val = floor_share(n, fractions[1]);
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw DataError("split fractions leave an empty partition for " + std::to_string(n) +
                    " trajectories");
  }
  DatasetSplit split;
  split.fractions = fractions;
  split.seed = seed;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t idx = order[k];
    if (k < n_train) {
      split.train_indices.push_back(idx);
      split.train.push_back(trajs[idx]);
    } else if (k < n_train + n_val) {
      split.validation_indices.push_back(idx);
      split.validation.push_back(trajs[idx]);
    } else {
      split.test_indices.push_back(idx);
      split.test.push_back(trajs[idx]);
    }
  }
  return split;
}

DatasetSplit split_by_time(const Trajectory& traj, std::array<double, 3> fractions) {
  check_fractions(fractions);
  const std::size_t rows = traj.rows();
  const std::size_t r_train = floor_share(rows, fractions[0]);
  const std::size_t r_val = floor_share(rows, fractions[1]);
  if (r_train < 2 || r_val < 2 || rows - r_train - r_val < 2) {
    throw DataError("trajectory too short for a time-based split");
  }
  auto segment = [&](std::size_t begin, std::size_t count) {
    Tensor states({count, traj.node_count()});
    for (std::size_t r = 0; r < count; ++r) {
      const auto src = traj.row(begin + r);
      std::copy(src.begin(), src.end(), states.row(r).begin());
    }
    return Trajectory(traj.graph_ptr(), traj.dt(), traj.time(begin), std::move(states));
  };
  DatasetSplit split;
  split.fractions = fractions;
  split.train.push_back(segment(0, r_train));
  split.validation.push_back(segment(r_train, r_val));
  split.test.push_back(segment(r_train + r_val, rows - r_train - r_val));
  return split;
}

void build_split_triplets(DatasetSplit& split, const SamplingConfig& cfg) {
  split.sampling = cfg;
  split.train_set = build_triplets(split.train, cfg);
  SamplingConfig held_out = cfg;
  held_out.seed = derive_seed(cfg.seed, 0xa1u);
  split.validation_set = build_triplets(split.validation, held_out);
  held_out.seed = derive_seed(cfg.seed, 0xa2u);
  split.test_set = build_triplets(split.test, held_out);
}

}  // namespace dgon
