#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgon/dynamics.hpp"
#include "dgon/evaluation.hpp"
#include "dgon/model.hpp"
#include "dgon/sampling.hpp"
#include "dgon/training.hpp"

namespace dgon::cli {

namespace fs = std::filesystem;

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kDivergence = 3;
inline constexpr int kIoError = 4;

struct RandomGraphSpec {
  std::size_t nodes = 6;
  double extra_edge_probability = 0.3;
  std::uint64_t seed = 7;
};

struct GraphSource {
  fs::path path;                          // graph JSON, or
  std::optional<RandomGraphSpec> random;  // generated topology
};

struct GenerateSection {
  std::size_t count = 10;
  std::size_t steps = 700;
  double dt = 1e-3;  // seconds
  std::size_t threads = 1;
};

struct DataSection {
  fs::path manifest;
  std::vector<std::size_t> subgraph;  // empty: every node
};

enum class SplitMode { trajectory, time };

struct SamplingSection {
  SamplingConfig sampling;
  std::array<double, 3> split_fractions{0.6, 0.2, 0.2};
  SplitMode split_mode = SplitMode::trajectory;
};

struct EvalSection {
  fs::path weights;  // empty: <out>/weights.dgon
  bool autoregressive = false;
  bool oracle = false;
  bool rollout_csv = true;
};

struct ZeroShotSection {
  fs::path graph;     // empty: the manifest's graph
  fs::path manifest;  // empty: data.manifest
  std::vector<std::size_t> subgraph;
};

struct SweepSection {
  std::vector<double> memory_lengths{0.05};
  std::vector<double> horizons{0.02};
  std::vector<std::string> variants{"standard"};
  std::size_t threads = 1;
};

struct RunConfig {
  std::uint64_t seed = 0;
  fs::path out = "out";
  GraphSource graph;
  SystemSpec system;
  GenerateSection generate;
  DataSection data;
  SamplingSection sampling;
  ModelConfig model;
  TrainConfig train;
  EvalSection eval;
  ZeroShotSection zeroshot;
  SweepSection sweep;

  /// Parses a config document; unknown keys are a ConfigError.
  static RunConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

/// Applies `key.path=value`; value is JSON if it parses, else a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

struct Manifest {
  std::shared_ptr<const Graph> graph;
  std::vector<Trajectory> trajectories;
  double dt = 0.0;
};

Manifest load_manifest(const fs::path& path);

// Command bodies; each writes into cfg.out and returns an exit code.
int cmd_generate(const RunConfig& cfg, bool dry_run, std::ostream& log);
int cmd_train(const RunConfig& cfg, bool dry_run, std::ostream& log);
int cmd_eval(const RunConfig& cfg, bool dry_run, std::ostream& log);
int cmd_zeroshot(const RunConfig& cfg, bool dry_run, std::ostream& log);
int cmd_sweep(const RunConfig& cfg, bool dry_run, std::ostream& log);

/// Full command line; maps exceptions to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dgon::cli
