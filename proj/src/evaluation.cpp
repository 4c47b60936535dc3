#include "dgon/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>
#include <json.hpp>

#include "dgon/errors.hpp"

namespace dgon {

using nlohmann::json;

namespace {

SamplingConfig sampling_of(const RolloutConfig& cfg) {
  SamplingConfig s;
  s.memory_length = cfg.memory_length;
  s.sensors = cfg.sensors;
  s.horizon = cfg.horizon;
  s.mode = cfg.mode;
  s.seed = cfg.seed;
  return s;
}

struct Steps {
  std::size_t memory;
  std::size_t horizon;
  std::size_t horizons;
};

Steps rollout_steps(const Trajectory& traj, const RolloutConfig& cfg) {
  const std::size_t memory = grid_steps(cfg.memory_length, traj.dt());
  const std::size_t horizon = grid_steps(cfg.horizon, traj.dt());
  if (horizon == 0) throw DomainError("prediction horizon must span at least one step");
  const std::size_t last = traj.rows() - 1;
  if (last < memory + horizon) {
    throw DataError("trajectory too short: " + std::to_string(traj.rows()) +
                    " rows cannot cover t_M + h");
  }
  return {memory, horizon, (last - memory + horizon - 1) / horizon};
}

std::vector<double> horizon_queries(const RolloutConfig& cfg, std::size_t steps_h,
                                    std::size_t count) {
  std::vector<double> q(count);
  for (std::size_t k = 1; k <= count; ++k) {
    q[k - 1] = cfg.horizon * static_cast<double>(k) / static_cast<double>(steps_h);
  }
  return q;
}

double row_error(std::span<const double> pred, std::span<const double> truth, bool& defined) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    num += std::abs(pred[i] - truth[i]);
    den += std::abs(truth[i]);
  }
  defined = den > 0.0;
  return defined ? 100.0 * num / den : 0.0;
}

// Copies one horizon of predictions into the rollout and scores its rows.
void append_horizon(Rollout& out, const Trajectory& traj, std::size_t anchor, const Tensor& pred,
                    std::size_t& row) {
  for (std::size_t k = 0; k < pred.rows(); ++k) {
    const std::size_t src = anchor + k + 1;
    out.times.push_back(traj.time(src));
    const auto truth = traj.row(src);
    auto p = out.predicted.row(row);
    auto t = out.truth.row(row);
    std::copy(pred.row(k).begin(), pred.row(k).end(), p.begin());
    std::copy(truth.begin(), truth.end(), t.begin());
    bool defined = false;
    const double e = row_error(p, t, defined);
    if (defined) out.sample_errors.push_back(e);
    ++row;
  }
}

void check_prediction(const Tensor& pred, std::size_t rows, std::size_t nodes) {
  if (pred.rank() != 2 || pred.rows() != rows || pred.cols() != nodes) {
    throw DimensionError("predictor returned " + pred.shape_string() + ", expected [" +
                         std::to_string(rows) + "x" + std::to_string(nodes) + "]");
  }
}

json number_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

}  // namespace

double l1_relative_error(const Tensor& pred, const Tensor& truth) {
  if (!pred.same_shape(truth)) {
    throw DimensionError("l1_relative_error: " + pred.shape_string() + " vs " +
                         truth.shape_string());
  }
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    num += std::abs(pred[k] - truth[k]);
    den += std::abs(truth[k]);
  }
  if (!(den > 0.0)) throw DomainError("relative error is undefined for an all-zero truth");
  return 100.0 * num / den;
}

RolloutConfig RolloutConfig::for_model(const ModelConfig& model, std::uint64_t seed) {
  RolloutConfig cfg;
  cfg.memory_length = model.memory_length;
  cfg.sensors = model.sensors;
  cfg.horizon = model.horizon;
  cfg.mode = window_mode(model.variant);
  cfg.seed = seed;
  return cfg;
}

void check_compatible(const ModelConfig& model, const RolloutConfig& cfg) {
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, b); };
  if (model.sensors != cfg.sensors) {
    throw CompatibilityError("weights expect m = " + std::to_string(model.sensors) +
                             " sensors, config has " + std::to_string(cfg.sensors));
  }
  if (!close(model.memory_length, cfg.memory_length)) {
    throw CompatibilityError("weights expect t_M = " + format_double(model.memory_length) +
                             ", config has " + format_double(cfg.memory_length));
  }
  if (!close(model.horizon, cfg.horizon)) {
    throw CompatibilityError("weights expect h = " + format_double(model.horizon) +
                             ", config has " + format_double(cfg.horizon));
  }
  if (window_mode(model.variant) != cfg.mode) {
    throw CompatibilityError("window mode does not match the " + to_string(model.variant) +
                             " variant");
  }
}

Rollout rollout_teacher_forced(const Predictor& model, const Graph& g, const Trajectory& traj,
                               const RolloutConfig& cfg, std::size_t trajectory_index) {
  if (traj.node_count() != g.node_count()) {
    throw DimensionError("trajectory has " + std::to_string(traj.node_count()) +
                         " nodes, graph has " + std::to_string(g.node_count()));
  }
  const Steps s = rollout_steps(traj, cfg);
  const SamplingConfig sampling = sampling_of(cfg);
  const std::size_t last = traj.rows() - 1;
  Rollout out;
  out.predicted = Tensor({last - s.memory, traj.node_count()});
  out.truth = Tensor({last - s.memory, traj.node_count()});
  std::size_t row = 0;
  for (std::size_t n = 0; n < s.horizons; ++n) {
    const std::size_t anchor = s.memory + n * s.horizon;
    const MemoryWindow window = make_window(traj, anchor, sampling, cfg.seed, trajectory_index);
    ++out.window_reads;
    const std::size_t count = std::min(s.horizon, last - anchor);
    const auto queries = horizon_queries(cfg, s.horizon, count);
    const Tensor pred = model.predict(g, window, queries);
    check_prediction(pred, count, traj.node_count());
    append_horizon(out, traj, anchor, pred, row);
    ++out.horizons;
  }
  return out;
}

Rollout rollout_autoregressive(const Predictor& model, const Graph& g, const Trajectory& traj,
                               const RolloutConfig& cfg, std::size_t horizons,
                               std::size_t trajectory_index) {
  if (traj.node_count() != g.node_count()) {
    throw DimensionError("trajectory has " + std::to_string(traj.node_count()) +
                         " nodes, graph has " + std::to_string(g.node_count()));
  }
  const Steps s = rollout_steps(traj, cfg);
  const std::size_t total = horizons == 0 ? s.horizons : std::min(horizons, s.horizons);
  const SamplingConfig sampling = sampling_of(cfg);
  const std::size_t last = traj.rows() - 1;
  const std::size_t n_nodes = traj.node_count();
  const std::size_t covered = std::min(last - s.memory, total * s.horizon);

  // Known states: the observed memory, then the model's own predictions.
  std::vector<double> known(traj.states().data().begin(),
                            traj.states().data().begin() + (s.memory + 1) * n_nodes);
  Rollout out;
  out.predicted = Tensor({covered, n_nodes});
  out.truth = Tensor({covered, n_nodes});
  std::size_t row = 0;
  for (std::size_t n = 0; n < total; ++n) {
    const std::size_t anchor = s.memory + n * s.horizon;
    const Trajectory buffer(traj.graph_ptr(), traj.dt(), traj.t0(),
                            Tensor({known.size() / n_nodes, n_nodes}, known));
    const MemoryWindow window = make_window(buffer, anchor, sampling, cfg.seed, trajectory_index);
    ++out.window_reads;
    const std::size_t count = std::min(s.horizon, last - anchor);
    const auto queries = horizon_queries(cfg, s.horizon, count);
    const Tensor pred = model.predict(g, window, queries);
    check_prediction(pred, count, n_nodes);
    if (!pred.all_finite()) {
      throw DivergenceError("non-finite prediction in autoregressive horizon " +
                            std::to_string(n));
    }
    known.insert(known.end(), pred.data().begin(), pred.data().end());
    append_horizon(out, traj, anchor, pred, row);
    ++out.horizons;
  }
  return out;
}

Tensor OraclePredictor::predict(const Graph& g, const MemoryWindow& window,
                                std::span<const double> queries) const {
  if (g.node_count() != truth_.node_count()) {
    throw DimensionError("oracle trajectory does not match the graph");
  }
  Tensor out({queries.size(), truth_.node_count()});
  for (std::size_t k = 0; k < queries.size(); ++k) {
    const double pos = (window.anchor_time + queries[k] - truth_.t0()) / truth_.dt();
    const double r = std::round(pos);
    if (r < 0.0 || r >= static_cast<double>(truth_.rows()) || std::abs(pos - r) > 1e-6) {
      throw DataError("oracle has no grid state at t = " +
                      format_double(window.anchor_time + queries[k]));
    }
    const auto src = truth_.row(static_cast<std::size_t>(r));
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

std::string to_string(RolloutMode mode) {
  return mode == RolloutMode::teacher_forced ? "teacher_forced" : "autoregressive";
}

EvalReport evaluate(const Predictor& model, const Graph& g, std::span<const Trajectory> trajs,
                    const RolloutConfig& cfg, RolloutMode mode) {
  return evaluate([&](std::size_t) -> const Predictor& { return model; }, g, trajs, cfg, mode);
}

EvalReport evaluate_oracle(const Graph& g, std::span<const Trajectory> trajs,
                           const RolloutConfig& cfg, RolloutMode mode) {
  std::vector<OraclePredictor> oracles;
  oracles.reserve(trajs.size());
  for (const Trajectory& t : trajs) oracles.emplace_back(t);
  return evaluate([&](std::size_t k) -> const Predictor& { return oracles.at(k); }, g, trajs, cfg,
                  mode);
}

EvalReport evaluate(const PredictorFor& model_for, const Graph& g,
                    std::span<const Trajectory> trajs, const RolloutConfig& cfg,
                    RolloutMode mode) {
  if (trajs.empty()) throw DataError("no trajectories to evaluate");
  const auto started = std::chrono::steady_clock::now();
  EvalReport report;
  report.mode = mode;
  report.rollout = cfg;
  report.graph_id = graph_id(g);
  if (const auto* net = dynamic_cast<const DeepGraphONet*>(&model_for(0))) {
    check_compatible(net->config(), cfg);
    report.variant = to_string(net->config().variant);
    report.train_graph_id = net->train_graph_id();
  } else {
    report.variant = cfg.mode == WindowMode::fixed ? "standard" : "resolution_independent";
  }
  const std::size_t n = g.node_count();
  std::vector<double> node_num(n, 0.0), node_den(n, 0.0);
  double num = 0.0, den = 0.0;
  std::vector<double> samples;
  for (std::size_t ti = 0; ti < trajs.size(); ++ti) {
    const Predictor& model = model_for(ti);
    Rollout r = mode == RolloutMode::teacher_forced
                    ? rollout_teacher_forced(model, g, trajs[ti], cfg, ti)
                    : rollout_autoregressive(model, g, trajs[ti], cfg, 0, ti);
    double tnum = 0.0, tden = 0.0;
    for (std::size_t row = 0; row < r.predicted.rows(); ++row) {
      for (std::size_t i = 0; i < n; ++i) {
        const double d = std::abs(r.predicted(row, i) - r.truth(row, i));
        const double t = std::abs(r.truth(row, i));
        node_num[i] += d;
        node_den[i] += t;
        tnum += d;
        tden += t;
      }
    }
    num += tnum;
    den += tden;
    report.trajectory_errors.push_back(tden > 0.0 ? 100.0 * tnum / tden : 0.0);
    samples.insert(samples.end(), r.sample_errors.begin(), r.sample_errors.end());
    report.rollouts.push_back(std::move(r));
  }
  if (!(den > 0.0)) throw DomainError("relative error is undefined for an all-zero truth");
  report.pooled_error = 100.0 * num / den;
  for (std::size_t i = 0; i < n; ++i) {
    report.node_errors.push_back(node_den[i] > 0.0 ? 100.0 * node_num[i] / node_den[i] : 0.0);
  }
  report.samples = samples.size();
  if (!samples.empty()) {
    double sum = 0.0;
    for (double e : samples) sum += e;
    report.sample_mean = sum / static_cast<double>(samples.size());
    double sq = 0.0;
    for (double e : samples) sq += (e - report.sample_mean) * (e - report.sample_mean);
    report.sample_std =
        samples.size() > 1 ? std::sqrt(sq / static_cast<double>(samples.size() - 1)) : 0.0;
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

EvalReport zero_shot_eval(const DeepGraphONet& model, const Graph& g_prime,
                          std::span<const Trajectory> trajs, const RolloutConfig& cfg,
                          RolloutMode mode) {
  if (!is_connected(g_prime)) throw GraphError("subgraph not connected");
  return evaluate(model, g_prime, trajs, cfg, mode);
}

std::string EvalReport::to_json() const {
  json j;
  j["mode"] = to_string(mode);
  j["pooled_error_percent"] = pooled_error;
  j["sample_mean_percent"] = sample_mean;
  j["sample_std_percent"] = sample_std;
  j["samples"] = samples;
  j["node_errors_percent"] = number_array(node_errors);
  j["trajectory_errors_percent"] = number_array(trajectory_errors);
  json rolls = json::array();
  for (const Rollout& r : rollouts) {
    rolls.push_back({{"horizons", r.horizons},
                     {"window_reads", r.window_reads},
                     {"rows", r.predicted.rows()},
                     {"t_first", r.times.empty() ? 0.0 : r.times.front()},
                     {"t_last", r.times.empty() ? 0.0 : r.times.back()}});
  }
  j["rollouts"] = rolls;
  json config{{"memory_length", rollout.memory_length},
              {"sensors", rollout.sensors},
              {"horizon", rollout.horizon},
              {"window_mode", rollout.mode == WindowMode::fixed ? "fixed" : "random"},
              {"variant", variant},
              {"graph_id", graph_id},
              {"seed", rollout.seed}};
  if (!train_graph_id.empty()) config["train_graph_id"] = train_graph_id;
  if (!model_config.empty()) config["weights"] = json::parse(model_config);
  j["config"] = config;
  j["timing"] = {{"seconds", seconds}};
  return j.dump(2) + "\n";
}

void write_rollout_csv(const Rollout& rollout, const std::filesystem::path& dir,
                       const std::string& stem) {
  auto write = [&](const Tensor& values, const std::string& prefix) {
    const auto path = dir / (prefix + stem + ".csv");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "time";
    for (std::size_t i = 0; i < values.cols(); ++i) out << ",node" << i;
    out << '\n';
    for (std::size_t r = 0; r < values.rows(); ++r) {
      out << format_double(rollout.times[r]);
      for (std::size_t i = 0; i < values.cols(); ++i) out << ',' << format_double(values(r, i));
      out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
  };
  write(rollout.predicted, "pred_");
  write(rollout.truth, "true_");
}

std::vector<SweepCell> sweep_grid(std::span<const double> memory_lengths,
                                  std::span<const double> horizons, const std::string& variant) {
  std::vector<SweepCell> cells;
  for (double tm : memory_lengths) {
    for (double h : horizons) cells.push_back({tm, h, variant});
  }
  return cells;
}

std::vector<SweepRow> sweep(std::span<const SweepCell> cells,
                            const std::function<EvalReport(const SweepCell&)>& run,
                            std::size_t threads) {
  if (cells.empty()) throw ConfigError("sweep grid is empty");
  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      SweepRow& row = rows[k];
      row.cell = cells[k];
      try {
        const EvalReport r = run(cells[k]);
        row.ok = true;
        row.pooled_error = r.pooled_error;
        row.sample_mean = r.sample_mean;
        row.sample_std = r.sample_std;
      } catch (const std::exception& e) {
        row.message = e.what();
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(threads, 1, cells.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  std::string out =
      "memory_length,horizon,variant,status,pooled_error,mean_error,std_error,message\n";
  for (const SweepRow& r : rows) {
    std::string msg = r.message;
    std::replace(msg.begin(), msg.end(), '"', '\'');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    out += format_double(r.cell.memory_length) + "," + format_double(r.cell.horizon) + "," +
           r.cell.variant + "," + (r.ok ? "ok" : "failed") + ",";
    if (r.ok) {
      out += format_double(r.pooled_error) + "," + format_double(r.sample_mean) + "," +
             format_double(r.sample_std);
    } else {
      out += ",,";
    }
    out += ",\"" + msg + "\"\n";
  }
  return out;
}

}  // namespace dgon
