#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dgon/graph.hpp"
#include "dgon/tensor.hpp"

namespace dgon {

/// Node states sampled on a uniform time grid, one row per time step.
///
/// Node states are scalar (d = 1), so `states` is [rows x |V|].
class Trajectory {
 public:
  Trajectory() = default;
  /// Throws DataError unless rows >= 2, dt > 0, values finite and columns match the graph.
  Trajectory(std::shared_ptr<const Graph> graph, double dt, double t0, Tensor states);

  const Graph& graph() const { return *graph_; }
  const std::shared_ptr<const Graph>& graph_ptr() const noexcept { return graph_; }
  double dt() const noexcept { return dt_; }
  double t0() const noexcept { return t0_; }
  const Tensor& states() const noexcept { return states_; }

  std::size_t rows() const noexcept { return states_.rows(); }
  std::size_t node_count() const noexcept { return states_.cols(); }
  double time(std::size_t row) const noexcept { return t0_ + static_cast<double>(row) * dt_; }
  /// Time spanned by the grid, (rows - 1) * dt.
  double duration() const noexcept { return static_cast<double>(rows() - 1) * dt_; }
  std::span<const double> row(std::size_t r) const { return states_.row(r); }

 private:
  std::shared_ptr<const Graph> graph_;
  double dt_ = 0.0;
  double t0_ = 0.0;
  Tensor states_;
};

enum class SystemKind { heat, kuramoto };

SystemKind parse_system_kind(const std::string& name);
std::string to_string(SystemKind kind);

/// Synthetic networked system and its initial-condition distribution.
struct SystemSpec {
  SystemKind kind = SystemKind::heat;
  double diffusivity = 1.0;    // heat: k
  double coupling = 1.0;       // kuramoto: K
  std::vector<double> omega;   // kuramoto: natural frequency per node
  // Uniform initial-condition bounds; one entry broadcasts to every node.
  std::vector<double> x0_low{-1.0};
  std::vector<double> x0_high{1.0};
  std::uint64_t seed = 0;

  /// Throws ConfigError when parameters are inconsistent with `node_count`.
  void validate(std::size_t node_count) const;
};

using RightHandSide = std::function<Tensor(const Tensor&)>;

/// dx/dt = -k L x.
Tensor heat_rhs(const Graph& g, const Tensor& x, double diffusivity);

/// dθ_i/dt = ω_i + (K / |N_i|) Σ_{j∈N_i} sin(θ_j − θ_i); isolated nodes drift at ω_i.
Tensor kuramoto_rhs(const Graph& g, const Tensor& theta, const Tensor& omega, double coupling);

/// Classical fourth-order Runge-Kutta step. Throws DivergenceError on non-finite results.
Tensor rk4_step(const RightHandSide& rhs, const Tensor& x, double dt);

/// Right-hand side of `spec` bound to `g`.
RightHandSide make_rhs(const SystemSpec& spec, const Graph& g);

/// Draws x0 from the spec's uniform bounds using `spec.seed`.
Tensor sample_initial_condition(const SystemSpec& spec, std::size_t node_count);

/// Integrates `steps` RK4 steps from a seeded random initial condition.
/// The trajectory has steps + 1 rows (the initial state plus one row per step).
Trajectory simulate(const SystemSpec& spec, std::shared_ptr<const Graph> g, std::size_t steps,
                    double dt);
Trajectory simulate_from(const SystemSpec& spec, std::shared_ptr<const Graph> g, Tensor x0,
                         std::size_t steps, double dt);

struct CsvOptions {
  bool header = false;  // skip the first line
};

/// One row per time step, one column per node. DataError names the row and
/// column of any offending cell; IoError if the file cannot be opened.
Trajectory load_trajectory_csv(const std::filesystem::path& path,
                               std::shared_ptr<const Graph> g, double dt, CsvOptions options = {});
/// Shortest round-trip decimal formatting, no header.
void save_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);

/// Columns of `traj` for the parent nodes in `spec`, bound to the induced subgraph.
Trajectory restrict_to_subgraph(const Trajectory& traj, const SubgraphSpec& spec);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

}  // namespace dgon
