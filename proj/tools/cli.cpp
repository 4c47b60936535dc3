#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "dgon/errors.hpp"
#include "dgon/graph.hpp"
#include "dgon/random.hpp"
#include "dgon/weights_io.hpp"

namespace dgon::cli {

using nlohmann::json;

namespace {

// Stream tags for derive_seed; every random draw of a run hangs off cfg.seed.
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kSamplingStream = 2;
constexpr std::uint64_t kInitStream = 3;
constexpr std::uint64_t kTrainStream = 4;
constexpr std::uint64_t kRolloutStream = 5;
constexpr std::uint64_t kTrajectoryStream = 6;

constexpr const char* kManifestFormat = "dgon-manifest";

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + "." + key + "' has the wrong type");
  }
}

void read_path(const json& obj, const char* key, fs::path& dst, const std::string& where) {
  std::string s;
  read(obj, key, s, where);
  if (!s.empty()) dst = s;
}

const json& section(const json& doc, const char* name) {
  static const json empty = json::object();
  return doc.contains(name) ? doc.at(name) : empty;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void require_exists(const fs::path& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is not set");
  if (!fs::exists(path)) throw ConfigError(what + " does not exist: " + path.string());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

json system_json(const SystemSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"diffusivity", s.diffusivity},
          {"coupling", s.coupling},
          {"omega", s.omega},
          {"x0_low", s.x0_low},
          {"x0_high", s.x0_high}};
}

std::uint64_t trajectory_seed(const RunConfig& cfg, std::size_t k) {
  return derive_seed(cfg.seed, kTrajectoryStream, k);
}

// Graph named by the config: a file or a seeded random topology.
Graph config_graph(const RunConfig& cfg) {
  if (!cfg.graph.path.empty()) return load_graph(cfg.graph.path);
  const RandomGraphSpec spec = cfg.graph.random.value_or(RandomGraphSpec{});
  return random_connected_graph(spec.nodes, spec.extra_edge_probability, spec.seed);
}

std::vector<Trajectory> restrict_all(std::vector<Trajectory> trajs,
                                     const std::vector<std::size_t>& nodes) {
  if (nodes.empty()) return trajs;
  const SubgraphSpec spec{nodes};
  std::vector<Trajectory> out;
  out.reserve(trajs.size());
  for (const Trajectory& t : trajs) out.push_back(restrict_to_subgraph(t, spec));
  // one graph object for the whole set
  for (auto& t : out) {
    if (t.graph_ptr() != out.front().graph_ptr()) {
      t = Trajectory(out.front().graph_ptr(), t.dt(), t.t0(), t.states());
    }
  }
  return out;
}

std::vector<Trajectory> rebind(const std::vector<Trajectory>& trajs,
                               std::shared_ptr<const Graph> g) {
  std::vector<Trajectory> out;
  out.reserve(trajs.size());
  for (const Trajectory& t : trajs) {
    if (t.node_count() != g->node_count()) {
      throw DimensionError("trajectory has " + std::to_string(t.node_count()) +
                           " nodes, graph has " + std::to_string(g->node_count()));
    }
    out.emplace_back(g, t.dt(), t.t0(), t.states());
  }
  return out;
}

DatasetSplit make_split(const RunConfig& cfg, std::span<const Trajectory> trajs) {
  const SamplingSection& s = cfg.sampling;
  DatasetSplit split;
  if (s.split_mode == SplitMode::time) {
    if (trajs.size() != 1) throw ConfigError("split_mode 'time' needs exactly one trajectory");
    split = split_by_time(trajs.front(), s.split_fractions);
  } else {
    split = split_trajectories(trajs, s.split_fractions, derive_seed(cfg.seed, kSplitStream));
  }
  return split;
}

SamplingConfig sampling_for(const RunConfig& cfg) {
  SamplingConfig sc = cfg.sampling.sampling;
  sc.seed = derive_seed(cfg.seed, kSamplingStream);
  return sc;
}

RolloutConfig rollout_for(const RunConfig& cfg) {
  const SamplingConfig& s = cfg.sampling.sampling;
  RolloutConfig rc;
  rc.memory_length = s.memory_length;
  rc.sensors = s.sensors;
  rc.horizon = s.horizon;
  rc.mode = s.mode;
  rc.seed = derive_seed(cfg.seed, kRolloutStream);
  return rc;
}

struct PreparedData {
  std::shared_ptr<const Graph> graph;
  DatasetSplit split;
};

PreparedData prepare(const RunConfig& cfg, const fs::path& manifest_path,
                     const std::vector<std::size_t>& subgraph) {
  Manifest m = load_manifest(manifest_path);
  std::vector<Trajectory> trajs = restrict_all(std::move(m.trajectories), subgraph);
  if (trajs.empty()) throw DataError("manifest lists no trajectories");
  PreparedData p;
  p.graph = trajs.front().graph_ptr();
  p.split = make_split(cfg, trajs);
  return p;
}

fs::path weights_path(const RunConfig& cfg) {
  return cfg.eval.weights.empty() ? cfg.out / "weights.dgon" : cfg.eval.weights;
}

void write_rollouts(const EvalReport& report, const std::vector<std::size_t>& indices,
                    const fs::path& dir) {
  make_dir(dir);
  for (std::size_t k = 0; k < report.rollouts.size(); ++k) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "traj%04zu", k < indices.size() ? indices[k] : k);
    write_rollout_csv(report.rollouts[k], dir, stem);
  }
}

struct TrainResult {
  TrainHistory history;
  std::optional<double> final_validation;
};

// Train on cfg's data and write weights.dgon, history.csv and train.json into `dir`.
TrainResult train_into(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
  require_exists(cfg.data.manifest, "data.manifest");
  PreparedData data = prepare(cfg, cfg.data.manifest, cfg.data.subgraph);
  build_split_triplets(data.split, sampling_for(cfg));
  make_dir(dir);

  DeepGraphONet model(cfg.model, derive_seed(cfg.seed, kInitStream));
  model.set_train_graph_id(graph_id(*data.graph));
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, kTrainStream);
  tc.checkpoint = dir / "weights.dgon";

  TrainResult res;
  res.history = train(model, data.split, tc, [&](std::size_t epoch, double loss, std::optional<double> val) {
    if (epoch == 1 || epoch == tc.epochs || epoch % 10 == 0) {
      log << "epoch " << epoch << " train " << fmt(loss);
      if (val) log << " val " << fmt(*val);
      log << '\n';
    }
  });
  save_model(model, dir / "weights.dgon");
  write_text(dir / "history.csv", res.history.to_csv());

  const TrainHistory& h = res.history;
  if (!h.validation_loss.empty()) res.final_validation = h.validation_loss.back();
  double total = 0.0;
  for (double s : h.epoch_seconds) total += s;
  json summary{{"epochs", h.train_loss.size()},
               {"initial_train_loss", h.initial_train_loss},
               {"final_train_loss", h.train_loss.empty() ? 0.0 : h.train_loss.back()},
               {"best_epoch", h.best_epoch},
               {"graph_id", graph_id(*data.graph)},
               {"train_triplets", data.split.train_set.size()},
               {"validation_triplets", data.split.validation_set.size()},
               {"test_triplets", data.split.test_set.size()},
               {"config", cfg.to_json()},
               {"timing", {{"seconds", total}, {"epoch_seconds", h.epoch_seconds}}}};
  summary["final_validation_loss"] =
      res.final_validation ? json(*res.final_validation) : json(nullptr);
  write_text(dir / "train.json", summary.dump(2) + "\n");
  return res;
}

// Evaluate weights on the test split; writes report.json and rollouts/ into `dir`.
EvalReport eval_into(const RunConfig& cfg, const fs::path& weights, const fs::path& dir,
                     std::ostream& log) {
  require_exists(cfg.data.manifest, "data.manifest");
  PreparedData data = prepare(cfg, cfg.data.manifest, cfg.data.subgraph);
  const RolloutConfig rc = rollout_for(cfg);
  const RolloutMode mode =
      cfg.eval.autoregressive ? RolloutMode::autoregressive : RolloutMode::teacher_forced;
  EvalReport report;
  if (cfg.eval.oracle) {
    report = evaluate_oracle(*data.graph, data.split.test, rc, mode);
  } else {
    require_exists(weights, "weights");
    const DeepGraphONet model = load_model(weights);
    check_compatible(model.config(), rc);
    report = evaluate(model, *data.graph, data.split.test, rc, mode);
    report.model_config = weight_config_block(model);
  }
  make_dir(dir);
  write_text(dir / "report.json", report.to_json());
  if (cfg.eval.rollout_csv) write_rollouts(report, data.split.test_indices, dir / "rollouts");
  log << "test L1 relative error " << fmt(report.pooled_error) << "% (mean "
      << fmt(report.sample_mean) << "%, std " << fmt(report.sample_std) << "%)\n";
  return report;
}

}  // namespace

// ---- config ----

RunConfig RunConfig::from_json(const json& doc) {
  check_keys(doc, "", {"seed", "out", "graph", "system", "generate", "data", "sampling", "model",
                       "train", "eval", "zeroshot", "sweep"});
  RunConfig c;
  read(doc, "seed", c.seed, "");
  read_path(doc, "out", c.out, "");

  const json& g = section(doc, "graph");
  check_keys(g, "graph", {"path", "random"});
  read_path(g, "path", c.graph.path, "graph");
  if (g.contains("random")) {
    const json& r = g.at("random");
    check_keys(r, "graph.random", {"nodes", "extra_edge_probability", "seed"});
    RandomGraphSpec spec;
    read(r, "nodes", spec.nodes, "graph.random");
    read(r, "extra_edge_probability", spec.extra_edge_probability, "graph.random");
    read(r, "seed", spec.seed, "graph.random");
    c.graph.random = spec;
  }
  if (!c.graph.path.empty() && c.graph.random) {
    throw ConfigError("graph: give either 'path' or 'random', not both");
  }

  const json& s = section(doc, "system");
  check_keys(s, "system", {"kind", "diffusivity", "coupling", "omega", "x0_low", "x0_high"});
  std::string kind = to_string(c.system.kind);
  read(s, "kind", kind, "system");
  try {
    c.system.kind = parse_system_kind(kind);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  read(s, "diffusivity", c.system.diffusivity, "system");
  read(s, "coupling", c.system.coupling, "system");
  read(s, "omega", c.system.omega, "system");
  read(s, "x0_low", c.system.x0_low, "system");
  read(s, "x0_high", c.system.x0_high, "system");

  const json& gen = section(doc, "generate");
  check_keys(gen, "generate", {"count", "steps", "dt", "threads"});
  read(gen, "count", c.generate.count, "generate");
  read(gen, "steps", c.generate.steps, "generate");
  read(gen, "dt", c.generate.dt, "generate");
  read(gen, "threads", c.generate.threads, "generate");
  if (c.generate.count == 0) throw ConfigError("generate.count must be positive");
  if (c.generate.steps == 0) throw ConfigError("generate.steps must be positive");
  if (!(c.generate.dt > 0.0)) throw ConfigError("generate.dt must be positive");

  const json& d = section(doc, "data");
  check_keys(d, "data", {"manifest", "subgraph"});
  read_path(d, "manifest", c.data.manifest, "data");
  read(d, "subgraph", c.data.subgraph, "data");

  const json& m = section(doc, "model");
  check_keys(m, "model", {"gnn_layers", "gnn_width", "trunk_layers", "trunk_width", "latent_dim",
                          "activation", "variant"});
  read(m, "gnn_layers", c.model.gnn_layers, "model");
  read(m, "gnn_width", c.model.gnn_width, "model");
  read(m, "trunk_layers", c.model.trunk_layers, "model");
  read(m, "trunk_width", c.model.trunk_width, "model");
  read(m, "latent_dim", c.model.latent_dim, "model");
  std::string act(to_string(c.model.activation));
  std::string variant = to_string(c.model.variant);
  read(m, "activation", act, "model");
  read(m, "variant", variant, "model");
  try {
    c.model.activation = parse_activation(act);
    c.model.variant = parse_variant(variant);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  const json& sm = section(doc, "sampling");
  check_keys(sm, "sampling", {"memory_length", "sensors", "horizon", "mode", "queries_per_anchor",
                              "anchor_stride", "split_fractions", "split_mode"});
  SamplingConfig& sc = c.sampling.sampling;
  read(sm, "memory_length", sc.memory_length, "sampling");
  read(sm, "sensors", sc.sensors, "sampling");
  read(sm, "horizon", sc.horizon, "sampling");
  read(sm, "queries_per_anchor", sc.queries_per_anchor, "sampling");
  read(sm, "anchor_stride", sc.anchor_stride, "sampling");
  read(sm, "split_fractions", c.sampling.split_fractions, "sampling");
  std::string split_mode = "trajectory";
  read(sm, "split_mode", split_mode, "sampling");
  if (split_mode == "trajectory") {
    c.sampling.split_mode = SplitMode::trajectory;
  } else if (split_mode == "time") {
    c.sampling.split_mode = SplitMode::time;
  } else {
    throw ConfigError("sampling.split_mode must be 'trajectory' or 'time'");
  }
  sc.mode = window_mode(c.model.variant);
  if (sm.contains("mode")) {
    std::string mode;
    read(sm, "mode", mode, "sampling");
    if (mode != "fixed" && mode != "random") {
      throw ConfigError("sampling.mode must be 'fixed' or 'random'");
    }
    const WindowMode wm = mode == "fixed" ? WindowMode::fixed : WindowMode::random;
    if (wm != sc.mode) {
      throw ConfigError("sampling.mode '" + mode + "' does not match model variant '" + variant + "'");
    }
  }
  // the model is sized from the sampling section
  c.model.sensors = sc.sensors;
  c.model.memory_length = sc.memory_length;
  c.model.horizon = sc.horizon;

  const json& t = section(doc, "train");
  check_keys(t, "train", {"epochs", "batch_size", "lr", "beta1", "beta2", "eps", "shuffle",
                          "validate_every"});
  read(t, "epochs", c.train.epochs, "train");
  read(t, "batch_size", c.train.batch_size, "train");
  read(t, "lr", c.train.adam.lr, "train");
  read(t, "beta1", c.train.adam.beta1, "train");
  read(t, "beta2", c.train.adam.beta2, "train");
  read(t, "eps", c.train.adam.eps, "train");
  read(t, "shuffle", c.train.shuffle, "train");
  read(t, "validate_every", c.train.validate_every, "train");

  const json& e = section(doc, "eval");
  check_keys(e, "eval", {"weights", "autoregressive", "oracle", "rollout_csv"});
  read_path(e, "weights", c.eval.weights, "eval");
  read(e, "autoregressive", c.eval.autoregressive, "eval");
  read(e, "oracle", c.eval.oracle, "eval");
  read(e, "rollout_csv", c.eval.rollout_csv, "eval");

  const json& z = section(doc, "zeroshot");
  check_keys(z, "zeroshot", {"graph", "manifest", "subgraph"});
  read_path(z, "graph", c.zeroshot.graph, "zeroshot");
  read_path(z, "manifest", c.zeroshot.manifest, "zeroshot");
  read(z, "subgraph", c.zeroshot.subgraph, "zeroshot");

  const json& sw = section(doc, "sweep");
  check_keys(sw, "sweep", {"memory_lengths", "horizons", "variants", "threads"});
  read(sw, "memory_lengths", c.sweep.memory_lengths, "sweep");
  read(sw, "horizons", c.sweep.horizons, "sweep");
  read(sw, "variants", c.sweep.variants, "sweep");
  read(sw, "threads", c.sweep.threads, "sweep");

  try {
    c.model.validate();
    c.train.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& err) {
    throw ConfigError(err.what());
  }
  return c;
}

json RunConfig::to_json() const {
  const SamplingConfig& sc = sampling.sampling;
  json graph_j = json::object();
  if (!graph.path.empty()) graph_j["path"] = graph.path.string();
  if (graph.random) {
    graph_j["random"] = {{"nodes", graph.random->nodes},
                         {"extra_edge_probability", graph.random->extra_edge_probability},
                         {"seed", graph.random->seed}};
  }
  return {{"seed", seed},
          {"graph", graph_j},
          {"system", system_json(system)},
          {"data", {{"manifest", data.manifest.string()}, {"subgraph", data.subgraph}}},
          {"sampling",
           {{"memory_length", sc.memory_length},
            {"sensors", sc.sensors},
            {"horizon", sc.horizon},
            {"mode", sc.mode == WindowMode::fixed ? "fixed" : "random"},
            {"queries_per_anchor", sc.queries_per_anchor},
            {"anchor_stride", sc.anchor_stride},
            {"split_fractions", sampling.split_fractions},
            {"split_mode", sampling.split_mode == SplitMode::time ? "time" : "trajectory"}}},
          {"model", json::parse(model_config_to_json(model))},
          {"train",
           {{"epochs", train.epochs},
            {"batch_size", train.batch_size},
            {"lr", train.adam.lr},
            {"beta1", train.adam.beta1},
            {"beta2", train.adam.beta2},
            {"eps", train.adam.eps},
            {"shuffle", train.shuffle},
            {"validate_every", train.validate_every}}}};
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("--set: malformed key '" + key + "'");
    if (!node->is_object()) throw ConfigError("--set: '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

// ---- manifest ----

Manifest load_manifest(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  try {
    if (doc.value("format", "") != kManifestFormat) {
      throw DataError("not a trajectory manifest: " + path.string());
    }
    const fs::path base = path.parent_path();
    Manifest m;
    m.dt = doc.at("dt").get<double>();
    m.graph = std::make_shared<const Graph>(load_graph(base / doc.at("graph").get<std::string>()));
    const std::string checksum = doc.at("graph_checksum").get<std::string>();
    if (graph_id(*m.graph) != checksum) {
      throw DataError("graph checksum mismatch for manifest " + path.string());
    }
    for (const json& entry : doc.at("trajectories")) {
      m.trajectories.push_back(
          load_trajectory_csv(base / entry.at("file").get<std::string>(), m.graph, m.dt));
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
}

// ---- commands ----

int cmd_generate(const RunConfig& cfg, bool dry_run, std::ostream& log) {
  if (!cfg.graph.path.empty()) require_exists(cfg.graph.path, "graph.path");
  auto g = std::make_shared<const Graph>(config_graph(cfg));
  if (!is_connected(*g)) throw GraphError("graph is not connected");
  cfg.system.validate(g->node_count());
  const GenerateSection& gen = cfg.generate;
  if (dry_run) {
    log << "would generate " << gen.count << " trajectories of " << gen.steps << " steps on "
        << g->node_count() << " nodes (dt " << fmt(gen.dt) << " s) into " << cfg.out.string() << '\n';
    return kOk;
  }
  make_dir(cfg.out);
  save_graph(*g, cfg.out / "graph.json");

  std::vector<std::string> names(gen.count);
  std::vector<std::exception_ptr> errors(gen.count);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < gen.count; k = next++) {
      try {
        char name[32];
        std::snprintf(name, sizeof name, "traj_%04zu.csv", k);
        names[k] = name;
        SystemSpec spec = cfg.system;
        spec.seed = trajectory_seed(cfg, k);
        save_trajectory_csv(simulate(spec, g, gen.steps, gen.dt), cfg.out / name);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(gen.threads, 1, gen.count);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  json entries = json::array();
  for (std::size_t k = 0; k < gen.count; ++k) {
    entries.push_back({{"file", names[k]}, {"seed", trajectory_seed(cfg, k)}});
  }
  json manifest{{"format", kManifestFormat},
                {"version", 1},
                {"seed", cfg.seed},
                {"graph", "graph.json"},
                {"graph_checksum", graph_id(*g)},
                {"nodes", g->node_count()},
                {"dt", gen.dt},
                {"steps", gen.steps},
                {"system", system_json(cfg.system)},
                {"trajectories", entries}};
  write_text(cfg.out / "manifest.json", manifest.dump(2) + "\n");
  log << "wrote " << gen.count << " trajectories and manifest.json to " << cfg.out.string() << '\n';
  return kOk;
}

int cmd_train(const RunConfig& cfg, bool dry_run, std::ostream& log) {
  require_exists(cfg.data.manifest, "data.manifest");
  if (dry_run) {
    PreparedData data = prepare(cfg, cfg.data.manifest, cfg.data.subgraph);
    build_split_triplets(data.split, sampling_for(cfg));
    const DeepGraphONet model(cfg.model, derive_seed(cfg.seed, kInitStream));
    log << "graph: " << data.graph->node_count() << " nodes, " << data.graph->edge_count()
        << " edges\n"
        << "trajectories: train " << data.split.train.size() << ", validation "
        << data.split.validation.size() << ", test " << data.split.test.size() << '\n'
        << "triplets: train " << data.split.train_set.size() << " ("
        << data.split.train_set.windows.size() << " windows), validation "
        << data.split.validation_set.size() << ", test " << data.split.test_set.size() << '\n'
        << "branch input: [" << data.graph->node_count() << " x " << cfg.model.feature_width()
        << "], parameters " << model.params().scalar_count() << '\n';
    if (data.split.train_set.empty()) throw DataError("no training triplets");
    return kOk;
  }
  const TrainResult res = train_into(cfg, cfg.out, log);
  if (res.final_validation) {
    log << "final validation loss " << fmt(*res.final_validation) << '\n';
  } else {
    log << "final validation loss n/a\n";
  }
  return kOk;
}

int cmd_eval(const RunConfig& cfg, bool dry_run, std::ostream& log) {
  require_exists(cfg.data.manifest, "data.manifest");
  const fs::path weights = weights_path(cfg);
  if (!cfg.eval.oracle) require_exists(weights, "weights");
  if (dry_run) {
    if (!cfg.eval.oracle) check_compatible(load_model(weights).config(), rollout_for(cfg));
    const PreparedData data = prepare(cfg, cfg.data.manifest, cfg.data.subgraph);
    log << "would evaluate " << data.split.test.size() << " test trajectories\n";
    return kOk;
  }
  eval_into(cfg, weights, cfg.out, log);
  return kOk;
}

int cmd_zeroshot(const RunConfig& cfg, bool dry_run, std::ostream& log) {
  const fs::path weights = weights_path(cfg);
  require_exists(weights, "weights");
  std::shared_ptr<const Graph> g_prime;
  if (!cfg.zeroshot.graph.empty()) {
    require_exists(cfg.zeroshot.graph, "zeroshot.graph");
    g_prime = std::make_shared<const Graph>(load_graph(cfg.zeroshot.graph));
    if (!is_connected(*g_prime)) throw GraphError("subgraph not connected");
  }
  const bool own_data = !cfg.zeroshot.manifest.empty();
  const fs::path manifest = own_data ? cfg.zeroshot.manifest : cfg.data.manifest;
  require_exists(manifest, own_data ? "zeroshot.manifest" : "data.manifest");
  const DeepGraphONet model = load_model(weights);
  const RolloutConfig rc = rollout_for(cfg);
  check_compatible(model.config(), rc);

  PreparedData data = prepare(cfg, manifest, own_data ? cfg.zeroshot.subgraph : cfg.data.subgraph);
  std::vector<Trajectory> test = data.split.test;
  if (g_prime) {
    test = rebind(test, g_prime);
  } else {
    g_prime = data.graph;
  }
  if (dry_run) {
    log << "would evaluate " << test.size() << " trajectories on a " << g_prime->node_count()
        << "-node graph\n";
    return kOk;
  }
  const RolloutMode mode =
      cfg.eval.autoregressive ? RolloutMode::autoregressive : RolloutMode::teacher_forced;
  EvalReport report = zero_shot_eval(model, *g_prime, test, rc, mode);
  report.model_config = weight_config_block(model);
  make_dir(cfg.out);
  write_text(cfg.out / "zeroshot.json", report.to_json());
  if (cfg.eval.rollout_csv) write_rollouts(report, data.split.test_indices, cfg.out / "rollouts");
  log << "zero-shot on graph " << report.graph_id << " (trained on " << report.train_graph_id
      << "): L1 relative error " << fmt(report.pooled_error) << "%\n";
  return kOk;
}

int cmd_sweep(const RunConfig& cfg, bool dry_run, std::ostream& log) {
  require_exists(cfg.data.manifest, "data.manifest");
  std::vector<SweepCell> cells;
  for (const std::string& v : cfg.sweep.variants) {
    auto part = sweep_grid(cfg.sweep.memory_lengths, cfg.sweep.horizons, v);
    cells.insert(cells.end(), part.begin(), part.end());
  }
  if (cells.empty()) throw ConfigError("sweep grid is empty");

  // every cell's config is checked up front; runtime failures are per cell
  std::vector<RunConfig> cell_cfgs;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    json doc = cfg.to_json();
    doc["sampling"]["memory_length"] = cells[k].memory_length;
    doc["sampling"]["horizon"] = cells[k].horizon;
    doc["sampling"].erase("mode");
    doc["model"] = {{"gnn_layers", cfg.model.gnn_layers},
                    {"gnn_width", cfg.model.gnn_width},
                    {"trunk_layers", cfg.model.trunk_layers},
                    {"trunk_width", cfg.model.trunk_width},
                    {"latent_dim", cfg.model.latent_dim},
                    {"activation", std::string(to_string(cfg.model.activation))},
                    {"variant", cells[k].variant}};
    doc["out"] = (cfg.out / "cells" / ("cell_" + std::to_string(k))).string();
    doc["eval"] = {{"autoregressive", cfg.eval.autoregressive},
                   {"rollout_csv", cfg.eval.rollout_csv}};
    cell_cfgs.push_back(RunConfig::from_json(doc));
  }
  if (dry_run) {
    log << "would run " << cells.size() << " sweep cells\n";
    return kOk;
  }

  std::mutex log_mu;
  const auto rows = sweep(
      cells,
      [&](const SweepCell& cell) {
        const std::size_t k = static_cast<std::size_t>(&cell - cells.data());
        const RunConfig& cc = cell_cfgs[k];
        std::ostringstream cell_log;
        train_into(cc, cc.out, cell_log);
        EvalReport r = eval_into(cc, cc.out / "weights.dgon", cc.out, cell_log);
        std::lock_guard lock(log_mu);
        log << "cell " << k << " (t_M " << fmt(cell.memory_length) << ", h " << fmt(cell.horizon)
            << ", " << cell.variant << "): " << fmt(r.pooled_error) << "%\n";
        return r;
      },
      cfg.sweep.threads);
  make_dir(cfg.out);
  write_text(cfg.out / "sweep.csv", sweep_to_csv(rows));
  const auto ok = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.ok; });
  log << ok << " of " << rows.size() << " cells succeeded; table in "
      << (cfg.out / "sweep.csv").string() << '\n';
  for (const SweepRow& r : rows) {
    if (!r.ok) log << "failed cell: " << r.message << '\n';
  }
  return ok > 0 ? kOk : kDivergence;
}

// ---- entry point ----

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"DeepGraphONet toolkit: simulate graph dynamics, train, evaluate, sweep"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::string out_dir;
  bool dry_run = false;
  app.add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (overrides config)");
  app.add_option("--set", sets, "override a config key, e.g. --set train.epochs=20");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_flag("--dry-run", dry_run, "validate config and data, do no work");

  auto* gen = app.add_subcommand("generate", "simulate trajectories and write a manifest");
  auto* trn = app.add_subcommand("train", "train a model from a manifest");
  auto* evl = app.add_subcommand("eval", "roll out a trained model on the test split");
  auto* zs = app.add_subcommand("zeroshot", "evaluate trained weights on another graph");
  app.add_subcommand("sweep", "train and evaluate over a (t_M, h, variant) grid");

  std::string weights;
  std::string graph_prime;
  bool autoregressive = false;
  bool oracle = false;
  for (auto* sub : {evl, zs}) {
    sub->add_option("--weights", weights, "weight file");
    sub->add_flag("--autoregressive", autoregressive, "feed predictions back as history");
  }
  evl->add_flag("--oracle", oracle, "replay ground truth instead of a model");
  zs->add_option("--graph", graph_prime, "target graph JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    json doc = json::object();
    if (!config_path.empty()) {
      try {
        doc = json::parse(read_text(config_path));
      } catch (const json::exception& e) {
        throw ConfigError("config " + config_path + ": " + e.what());
      }
    }
    for (const std::string& s : sets) apply_override(doc, s);
    if (seed) doc["seed"] = *seed;
    if (!out_dir.empty()) doc["out"] = out_dir;
    if (!weights.empty()) doc["eval"]["weights"] = weights;
    if (autoregressive) doc["eval"]["autoregressive"] = true;
    if (oracle) doc["eval"]["oracle"] = true;
    if (!graph_prime.empty()) doc["zeroshot"]["graph"] = graph_prime;
    const RunConfig cfg = RunConfig::from_json(doc);

    if (gen->parsed()) return cmd_generate(cfg, dry_run, out);
    if (trn->parsed()) return cmd_train(cfg, dry_run, out);
    if (evl->parsed()) return cmd_eval(cfg, dry_run, out);
    if (zs->parsed()) return cmd_zeroshot(cfg, dry_run, out);
    return cmd_sweep(cfg, dry_run, out);
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kIoError;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const CompatibilityError& e) {
    err << "incompatible: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    // config, graph, domain and dimension problems
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace dgon::cli
