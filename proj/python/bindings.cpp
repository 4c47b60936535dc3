#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cli.hpp"
#include "dgon/dynamics.hpp"
#include "dgon/errors.hpp"
#include "dgon/evaluation.hpp"
#include "dgon/graph.hpp"
#include "dgon/model.hpp"
#include "dgon/sampling.hpp"
#include "dgon/training.hpp"
#include "dgon/weights_io.hpp"

namespace py = pybind11;
using namespace dgon;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Tensor from_numpy(const Array& a) {
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  Tensor t(shape);
  std::copy(a.data(), a.data() + a.size(), t.data().begin());
  return t;
}

}  // namespace

PYBIND11_MODULE(_dgon, m) {
  m.doc() = "DeepGraphONet: graph neural operators for dynamical systems on graphs";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<DimensionError>(m, "DimensionError", base);
  py::register_exception<ContractError>(m, "ContractError", base);
  py::register_exception<DivergenceError>(m, "DivergenceError", base);
  py::register_exception<DomainError>(m, "DomainError", base);
  py::register_exception<GraphError>(m, "GraphError", base);
  py::register_exception<DataError>(m, "DataError", base);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<FormatError>(m, "FormatError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<CompatibilityError>(m, "CompatibilityError", base);

  py::class_<Graph, std::shared_ptr<Graph>>(m, "Graph")
      .def(py::init<std::size_t, std::vector<Edge>, std::vector<std::string>>(), py::arg("nodes"),
           py::arg("edges"), py::arg("labels") = std::vector<std::string>{})
      .def_static("path", &Graph::path)
      .def_static("cycle", &Graph::cycle)
      .def_static("complete", &Graph::complete)
      .def_property_readonly("node_count", &Graph::node_count)
      .def_property_readonly("edge_count", &Graph::edge_count)
      .def_property_readonly("edges", &Graph::edges)
      .def_property_readonly("labels", &Graph::labels)
      .def("neighbors",
           [](const Graph& g, std::size_t i) {
             auto n = g.neighbors(i);
             return std::vector<std::size_t>(n.begin(), n.end());
           })
      .def("has_edge", &Graph::has_edge)
      .def("to_json", &graph_to_json_text)
      .def_static("from_json", &graph_from_json_text)
      .def("__eq__", [](const Graph& a, const Graph& b) { return a == b; })
      .def("__repr__", [](const Graph& g) {
        return "<Graph " + std::to_string(g.node_count()) + " nodes, " +
               std::to_string(g.edge_count()) + " edges>";
      });

  m.def("random_connected_graph", &random_connected_graph, py::arg("nodes"),
        py::arg("extra_edge_probability"), py::arg("seed"));
  m.def("is_connected", &is_connected);
  m.def("graph_id", &graph_id);
  m.def("induced_subgraph",
        [](const Graph& g, std::vector<std::size_t> nodes) {
          return induced_subgraph(g, SubgraphSpec{std::move(nodes)});
        });
  m.def("load_graph", &load_graph);
  m.def("save_graph", &save_graph);
  m.def("laplacian", [](const Graph& g) { return to_numpy(laplacian(g)); });
  m.def("neighbor_mean",
        [](const Graph& g, const Array& x) { return to_numpy(neighbor_mean(g, from_numpy(x))); });

  py::class_<Trajectory>(m, "Trajectory")
      .def(py::init([](const Graph& g, double dt, const Array& states, double t0) {
             return Trajectory(std::make_shared<const Graph>(g), dt, t0, from_numpy(states));
           }),
           py::arg("graph"), py::arg("dt"), py::arg("states"), py::arg("t0") = 0.0)
      .def_property_readonly("graph", &Trajectory::graph)
      .def_property_readonly("dt", &Trajectory::dt)
      .def_property_readonly("t0", &Trajectory::t0)
      .def_property_readonly("rows", &Trajectory::rows)
      .def_property_readonly("node_count", &Trajectory::node_count)
      .def_property_readonly("states", [](const Trajectory& t) { return to_numpy(t.states()); })
      .def_property_readonly("times", [](const Trajectory& t) {
        std::vector<double> times(t.rows());
        for (std::size_t r = 0; r < t.rows(); ++r) times[r] = t.time(r);
        return times;
      });

  py::class_<SystemSpec>(m, "SystemSpec")
      .def(py::init<>())
      .def_property(
          "kind", [](const SystemSpec& s) { return to_string(s.kind); },
          [](SystemSpec& s, const std::string& k) { s.kind = parse_system_kind(k); })
      .def_readwrite("diffusivity", &SystemSpec::diffusivity)
      .def_readwrite("coupling", &SystemSpec::coupling)
      .def_readwrite("omega", &SystemSpec::omega)
      .def_readwrite("x0_low", &SystemSpec::x0_low)
      .def_readwrite("x0_high", &SystemSpec::x0_high)
      .def_readwrite("seed", &SystemSpec::seed);

  m.def(
      "simulate",
      [](const SystemSpec& spec, const Graph& g, std::size_t steps, double dt) {
        return simulate(spec, std::make_shared<const Graph>(g), steps, dt);
      },
      py::arg("spec"), py::arg("graph"), py::arg("steps"), py::arg("dt"));
  m.def(
      "simulate_from",
      [](const SystemSpec& spec, const Graph& g, const Array& x0, std::size_t steps, double dt) {
        return simulate_from(spec, std::make_shared<const Graph>(g), from_numpy(x0), steps, dt);
      },
      py::arg("spec"), py::arg("graph"), py::arg("x0"), py::arg("steps"), py::arg("dt"));
  m.def("restrict_to_subgraph", [](const Trajectory& t, std::vector<std::size_t> nodes) {
    return restrict_to_subgraph(t, SubgraphSpec{std::move(nodes)});
  });
  m.def("save_trajectory_csv", &save_trajectory_csv);
  m.def(
      "load_trajectory_csv",
      [](const std::filesystem::path& p, const Graph& g, double dt, bool header) {
        return load_trajectory_csv(p, std::make_shared<const Graph>(g), dt, CsvOptions{header});
      },
      py::arg("path"), py::arg("graph"), py::arg("dt"), py::arg("header") = false);

  py::enum_<WindowMode>(m, "WindowMode")
      .value("fixed", WindowMode::fixed)
      .value("random", WindowMode::random);

  py::class_<MemoryWindow>(m, "MemoryWindow")
      .def(py::init([](std::vector<double> offsets, const Array& values, double memory_length,
                       double anchor_time) {
             return canonical_window(std::move(offsets), from_numpy(values), memory_length,
                                     anchor_time);
           }),
           py::arg("offsets"), py::arg("values"), py::arg("memory_length"),
           py::arg("anchor_time") = 0.0)
      .def_readonly("offsets", &MemoryWindow::offsets)
      .def_readonly("memory_length", &MemoryWindow::memory_length)
      .def_readonly("anchor_time", &MemoryWindow::anchor_time)
      .def_property_readonly("values", [](const MemoryWindow& w) { return to_numpy(w.values); });
  m.def("fixed_window", &fixed_window, py::arg("trajectory"), py::arg("anchor_index"),
        py::arg("memory_length"), py::arg("sensors"));
  m.def("random_window", &random_window, py::arg("trajectory"), py::arg("anchor_index"),
        py::arg("memory_length"), py::arg("sensors"), py::arg("seed"));

  py::class_<SamplingConfig>(m, "SamplingConfig")
      .def(py::init<>())
      .def_readwrite("memory_length", &SamplingConfig::memory_length)
      .def_readwrite("sensors", &SamplingConfig::sensors)
      .def_readwrite("horizon", &SamplingConfig::horizon)
      .def_readwrite("queries_per_anchor", &SamplingConfig::queries_per_anchor)
      .def_readwrite("anchor_stride", &SamplingConfig::anchor_stride)
      .def_readwrite("mode", &SamplingConfig::mode)
      .def_readwrite("seed", &SamplingConfig::seed);

  py::class_<DatasetSplit>(m, "DatasetSplit")
      .def_readonly("train", &DatasetSplit::train)
      .def_readonly("validation", &DatasetSplit::validation)
      .def_readonly("test", &DatasetSplit::test)
      .def_readonly("train_indices", &DatasetSplit::train_indices)
      .def_readonly("validation_indices", &DatasetSplit::validation_indices)
      .def_readonly("test_indices", &DatasetSplit::test_indices)
      .def_property_readonly("train_triplets",
                             [](const DatasetSplit& s) { return s.train_set.size(); })
      .def_property_readonly("validation_triplets",
                             [](const DatasetSplit& s) { return s.validation_set.size(); })
      .def_property_readonly("test_triplets",
                             [](const DatasetSplit& s) { return s.test_set.size(); });
  m.def(
      "split_trajectories",
      [](const std::vector<Trajectory>& trajs, std::array<double, 3> fractions,
         std::uint64_t seed) { return split_trajectories(trajs, fractions, seed); },
      py::arg("trajectories"), py::arg("fractions") = std::array<double, 3>{0.6, 0.2, 0.2},
      py::arg("seed") = 0);
  m.def("split_by_time", &split_by_time, py::arg("trajectory"),
        py::arg("fractions") = std::array<double, 3>{0.6, 0.2, 0.2});
  m.def("build_split_triplets", &build_split_triplets);

  py::enum_<ModelVariant>(m, "ModelVariant")
      .value("standard", ModelVariant::standard)
      .value("resolution_independent", ModelVariant::resolution_independent);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_static("reference", &ModelConfig::reference)
      .def_readwrite("gnn_layers", &ModelConfig::gnn_layers)
      .def_readwrite("gnn_width", &ModelConfig::gnn_width)
      .def_readwrite("trunk_layers", &ModelConfig::trunk_layers)
      .def_readwrite("trunk_width", &ModelConfig::trunk_width)
      .def_readwrite("latent_dim", &ModelConfig::latent_dim)
      .def_property(
          "activation", [](const ModelConfig& c) { return std::string(to_string(c.activation)); },
          [](ModelConfig& c, const std::string& a) { c.activation = parse_activation(a); })
      .def_readwrite("variant", &ModelConfig::variant)
      .def_readwrite("sensors", &ModelConfig::sensors)
      .def_readwrite("memory_length", &ModelConfig::memory_length)
      .def_readwrite("horizon", &ModelConfig::horizon)
      .def("validate", &ModelConfig::validate)
      .def("to_json", &model_config_to_json)
      .def("__eq__", [](const ModelConfig& a, const ModelConfig& b) { return a == b; });

  py::class_<Predictor>(m, "Predictor");
  py::class_<OraclePredictor, Predictor>(m, "OraclePredictor").def(py::init<Trajectory>());

  py::class_<DeepGraphONet, Predictor>(m, "DeepGraphONet")
      .def(py::init<ModelConfig, std::uint64_t>(), py::arg("config"), py::arg("seed") = 0)
      .def_property_readonly("config", &DeepGraphONet::config)
      .def_property_readonly("parameter_count",
                             [](const DeepGraphONet& m) { return m.params().scalar_count(); })
      .def_property("train_graph_id", &DeepGraphONet::train_graph_id,
                    &DeepGraphONet::set_train_graph_id)
      .def("predict",
           [](const DeepGraphONet& m, const Graph& g, const MemoryWindow& w,
              std::vector<double> queries) { return to_numpy(m.predict(g, w, queries)); })
      .def("forward", [](const DeepGraphONet& m, const Graph& g, const MemoryWindow& w,
                         double q) { return to_numpy(m.forward(g, w, q)); })
      .def("branch", [](const DeepGraphONet& m, const Graph& g,
                        const MemoryWindow& w) { return to_numpy(m.branch_forward(g, w)); })
      .def("trunk", [](const DeepGraphONet& m, double q) { return to_numpy(m.trunk_forward(q)); })
      .def("save", [](const DeepGraphONet& m, const std::filesystem::path& p) { save_model(m, p); })
      .def_static("load", &load_model);
  m.def("merge", [](const Array& coeffs, const Array& basis) {
    return to_numpy(merge(from_numpy(coeffs), from_numpy(basis)));
  });

  py::class_<AdamConfig>(m, "AdamConfig")
      .def(py::init<>())
      .def_readwrite("lr", &AdamConfig::lr)
      .def_readwrite("beta1", &AdamConfig::beta1)
      .def_readwrite("beta2", &AdamConfig::beta2)
      .def_readwrite("eps", &AdamConfig::eps);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("adam", &TrainConfig::adam)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("shuffle", &TrainConfig::shuffle)
      .def_readwrite("validate_every", &TrainConfig::validate_every);

  py::class_<TrainHistory>(m, "TrainHistory")
      .def_readonly("initial_train_loss", &TrainHistory::initial_train_loss)
      .def_readonly("train_loss", &TrainHistory::train_loss)
      .def_readonly("validation_epochs", &TrainHistory::validation_epochs)
      .def_readonly("validation_loss", &TrainHistory::validation_loss)
      .def_readonly("best_epoch", &TrainHistory::best_epoch)
      .def("to_csv", &TrainHistory::to_csv);

  m.def(
      "train",
      [](DeepGraphONet& model, DatasetSplit& split, const TrainConfig& cfg) {
        py::gil_scoped_release release;
        return train(model, split, cfg);
      },
      py::arg("model"), py::arg("split"), py::arg("config"));

  py::enum_<RolloutMode>(m, "RolloutMode")
      .value("teacher_forced", RolloutMode::teacher_forced)
      .value("autoregressive", RolloutMode::autoregressive);

  py::class_<RolloutConfig>(m, "RolloutConfig")
      .def(py::init<>())
      .def_static("for_model", &RolloutConfig::for_model, py::arg("config"), py::arg("seed") = 0)
      .def_readwrite("memory_length", &RolloutConfig::memory_length)
      .def_readwrite("sensors", &RolloutConfig::sensors)
      .def_readwrite("horizon", &RolloutConfig::horizon)
      .def_readwrite("mode", &RolloutConfig::mode)
      .def_readwrite("seed", &RolloutConfig::seed);

  py::class_<Rollout>(m, "Rollout")
      .def_readonly("times", &Rollout::times)
      .def_readonly("horizons", &Rollout::horizons)
      .def_readonly("window_reads", &Rollout::window_reads)
      .def_readonly("sample_errors", &Rollout::sample_errors)
      .def_property_readonly("predicted", [](const Rollout& r) { return to_numpy(r.predicted); })
      .def_property_readonly("truth", [](const Rollout& r) { return to_numpy(r.truth); });

  m.def("rollout_teacher_forced", &rollout_teacher_forced, py::arg("model"), py::arg("graph"),
        py::arg("trajectory"), py::arg("config"), py::arg("trajectory_index") = 0);
  m.def("rollout_autoregressive", &rollout_autoregressive, py::arg("model"), py::arg("graph"),
        py::arg("trajectory"), py::arg("config"), py::arg("horizons") = 0,
        py::arg("trajectory_index") = 0);
  m.def("l1_relative_error", [](const Array& pred, const Array& truth) {
    return l1_relative_error(from_numpy(pred), from_numpy(truth));
  });

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("pooled_error", &EvalReport::pooled_error)
      .def_readonly("sample_mean", &EvalReport::sample_mean)
      .def_readonly("sample_std", &EvalReport::sample_std)
      .def_readonly("samples", &EvalReport::samples)
      .def_readonly("node_errors", &EvalReport::node_errors)
      .def_readonly("trajectory_errors", &EvalReport::trajectory_errors)
      .def_readonly("rollouts", &EvalReport::rollouts)
      .def_readonly("graph_id", &EvalReport::graph_id)
      .def_readonly("train_graph_id", &EvalReport::train_graph_id)
      .def("to_json", &EvalReport::to_json);

  m.def(
      "evaluate",
      [](const Predictor& model, const Graph& g, const std::vector<Trajectory>& trajs,
         const RolloutConfig& cfg, RolloutMode mode) {
        return evaluate(model, g, trajs, cfg, mode);
      },
      py::arg("model"), py::arg("graph"), py::arg("trajectories"), py::arg("config"),
      py::arg("mode") = RolloutMode::teacher_forced);
  m.def(
      "evaluate_oracle",
      [](const Graph& g, const std::vector<Trajectory>& trajs, const RolloutConfig& cfg,
         RolloutMode mode) { return evaluate_oracle(g, trajs, cfg, mode); },
      py::arg("graph"), py::arg("trajectories"), py::arg("config"),
      py::arg("mode") = RolloutMode::teacher_forced);
  m.def(
      "zero_shot_eval",
      [](const DeepGraphONet& model, const Graph& g, const std::vector<Trajectory>& trajs,
         const RolloutConfig& cfg, RolloutMode mode) {
        return zero_shot_eval(model, g, trajs, cfg, mode);
      },
      py::arg("model"), py::arg("graph"), py::arg("trajectories"), py::arg("config"),
      py::arg("mode") = RolloutMode::teacher_forced);

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "dgon");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the dgon command line in-process; returns (exit_code, stdout, stderr).");
}
