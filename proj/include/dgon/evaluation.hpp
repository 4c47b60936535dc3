#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dgon/dynamics.hpp"
#include "dgon/model.hpp"
#include "dgon/sampling.hpp"

namespace dgon {

/// 100 * sum|pred - truth| / sum|truth|. Throws DomainError when truth is all zero.
double l1_relative_error(const Tensor& pred, const Tensor& truth);

struct RolloutConfig {
  double memory_length = 0.05;
  std::size_t sensors = 51;
  double horizon = 0.02;
  WindowMode mode = WindowMode::fixed;
  std::uint64_t seed = 0;

  static RolloutConfig for_model(const ModelConfig& model, std::uint64_t seed = 0);
};

/// Throws CompatibilityError if windows built with `cfg` cannot feed `model`.
void check_compatible(const ModelConfig& model, const RolloutConfig& cfg);

struct Rollout {
  std::vector<double> times;  // one per predicted row
  Tensor predicted;           // [rows x nodes]
  Tensor truth;               // [rows x nodes]
  std::size_t horizons = 0;
  std::size_t window_reads = 0;       // windows built, one per horizon
  std::vector<double> sample_errors;  // per (window, query) relative error, %
};

/// Complete-trajectory prediction from observed memory. Horizon n anchors at
/// t_M + n*h, reads one window of ground truth and predicts every grid point in
/// (t, t + h]; the last horizon is cut at the trajectory end.
/// `trajectory_index` keys the random sensor draws.
Rollout rollout_teacher_forced(const Predictor& model, const Graph& g, const Trajectory& traj,
                               const RolloutConfig& cfg, std::size_t trajectory_index = 0);

/// Like the teacher-forced rollout, but only the first t_M of `traj` is
/// observed; later windows are built from the model's own predictions.
/// `horizons` = 0 covers the whole trajectory. Truth is taken from `traj`
/// for scoring only. Throws DivergenceError naming the horizon.
Rollout rollout_autoregressive(const Predictor& model, const Graph& g, const Trajectory& traj,
                               const RolloutConfig& cfg, std::size_t horizons = 0,
                               std::size_t trajectory_index = 0);

/// Replays a known trajectory: predicts exactly the true state at anchor + query.
class OraclePredictor : public Predictor {
 public:
  explicit OraclePredictor(Trajectory truth) : truth_(std::move(truth)) {}
  Tensor predict(const Graph& g, const MemoryWindow& window,
                 std::span<const double> queries) const override;

 private:
  Trajectory truth_;
};

enum class RolloutMode { teacher_forced, autoregressive };
std::string to_string(RolloutMode mode);

struct EvalReport {
  RolloutMode mode = RolloutMode::teacher_forced;
  double pooled_error = 0.0;  // L1 relative error over every rollout, %
  double sample_mean = 0.0;   // mean of per-sample errors, %
  double sample_std = 0.0;
  std::size_t samples = 0;
  std::vector<double> node_errors;        // pooled per node, %
  std::vector<double> trajectory_errors;  // pooled per rollout, %
  std::vector<Rollout> rollouts;
  RolloutConfig rollout;
  std::string variant;
  std::string graph_id;
  std::string train_graph_id;
  std::string model_config;  // weight-file config block, if any
  double seconds = 0.0;

  /// JSON with a separate "timing" block; rollouts are summarized, not embedded.
  std::string to_json() const;
};

/// Rolls out every trajectory and aggregates the errors.
EvalReport evaluate(const Predictor& model, const Graph& g, std::span<const Trajectory> trajs,
                    const RolloutConfig& cfg, RolloutMode mode = RolloutMode::teacher_forced);

/// Same, with a separate predictor per trajectory index.
using PredictorFor = std::function<const Predictor&(std::size_t trajectory)>;
EvalReport evaluate(const PredictorFor& model_for, const Graph& g,
                    std::span<const Trajectory> trajs, const RolloutConfig& cfg,
                    RolloutMode mode = RolloutMode::teacher_forced);

/// Every trajectory replayed by its own OraclePredictor.
EvalReport evaluate_oracle(const Graph& g, std::span<const Trajectory> trajs,
                           const RolloutConfig& cfg,
                           RolloutMode mode = RolloutMode::teacher_forced);

/// Evaluates unchanged weights on another graph. Throws GraphError when
/// `g_prime` is not connected.
EvalReport zero_shot_eval(const DeepGraphONet& model, const Graph& g_prime,
                          std::span<const Trajectory> trajs, const RolloutConfig& cfg,
                          RolloutMode mode = RolloutMode::teacher_forced);

/// Writes pred_<stem>.csv and true_<stem>.csv: a time column, then one column per node.
void write_rollout_csv(const Rollout& rollout, const std::filesystem::path& dir,
                       const std::string& stem);

struct SweepCell {
  double memory_length = 0.05;
  double horizon = 0.02;
  std::string variant = "standard";
};

struct SweepRow {
  SweepCell cell;
  bool ok = false;
  std::string message;
  double pooled_error = 0.0;
  double sample_mean = 0.0;
  double sample_std = 0.0;
};

/// Cartesian grid of memory lengths and horizons.
std::vector<SweepCell> sweep_grid(std::span<const double> memory_lengths,
                                  std::span<const double> horizons, const std::string& variant);

/// Runs every cell; an exception marks that cell failed and the sweep goes on.
/// Cells run on up to `threads` workers; rows keep the grid order.
std::vector<SweepRow> sweep(std::span<const SweepCell> cells,
                            const std::function<EvalReport(const SweepCell&)>& run,
                            std::size_t threads = 1);

/// memory_length,horizon,variant,status,pooled_error,mean_error,std_error,message
std::string sweep_to_csv(std::span<const SweepRow> rows);

}  // namespace dgon
