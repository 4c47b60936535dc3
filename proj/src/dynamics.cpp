#include "dgon/dynamics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dgon/errors.hpp"
#include "dgon/random.hpp"

namespace dgon {

Trajectory::Trajectory(std::shared_ptr<const Graph> graph, double dt, double t0, Tensor states)
    : graph_(std::move(graph)), dt_(dt), t0_(t0), states_(std::move(states)) {
  if (!graph_) throw DataError("trajectory requires a graph");
  if (!(dt_ > 0.0)) throw DataError("trajectory dt must be positive");
  if (states_.rank() != 2 || states_.rows() < 2) {
    throw DataError("trajectory needs at least two time steps, got shape " +
                    states_.shape_string());
  }
  if (states_.cols() != graph_->node_count()) {
    throw DataError("trajectory has " + std::to_string(states_.cols()) + " columns but graph has " +
                    std::to_string(graph_->node_count()) + " nodes");
  }
  if (!states_.all_finite()) throw DataError("trajectory contains non-finite values");
}

SystemKind parse_system_kind(const std::string& name) {
  if (name == "heat") return SystemKind::heat;
  if (name == "kuramoto") return SystemKind::kuramoto;
  throw ConfigError("unknown system kind '" + name + "'");
}

std::string to_string(SystemKind kind) { return kind == SystemKind::heat ? "heat" : "kuramoto"; }

void SystemSpec::validate(std::size_t node_count) const {
  if (kind == SystemKind::heat && !(diffusivity > 0.0)) {
    throw ConfigError("heat diffusivity must be strictly positive");
  }
  if (kind == SystemKind::kuramoto) {
    if (!(coupling > 0.0)) throw ConfigError("kuramoto coupling must be strictly positive");
    if (omega.size() != node_count) {
      throw ConfigError("kuramoto needs one natural frequency per node (" +
                        std::to_string(node_count) + "), got " + std::to_string(omega.size()));
    }
  }
  auto check_bounds = [&](const std::vector<double>& b, const char* what) {
    if (b.size() != 1 && b.size() != node_count) {
      throw ConfigError(std::string(what) + " must have 1 or " + std::to_string(node_count) +
                        " entries");
    }
  };
  check_bounds(x0_low, "x0_low");
  check_bounds(x0_high, "x0_high");
  for (std::size_t i = 0; i < node_count; ++i) {
    const double lo = x0_low.size() == 1 ? x0_low[0] : x0_low[i];
    const double hi = x0_high.size() == 1 ? x0_high[0] : x0_high[i];
    if (!(lo <= hi)) throw ConfigError("x0_low exceeds x0_high");
  }
}

Tensor heat_rhs(const Graph& g, const Tensor& x, double diffusivity) {
  const std::size_t n = g.node_count();
  if (x.size() != n) throw DimensionError("heat_rhs: state length does not match node count");
  Tensor dx({n});
  for (std::size_t i = 0; i < n; ++i) {
    double lx = static_cast<double>(g.degree(i)) * x[i];
    for (std::size_t j : g.neighbors(i)) lx -= x[j];
    dx[i] = -diffusivity * lx;
  }
  return dx;
}

Tensor kuramoto_rhs(const Graph& g, const Tensor& theta, const Tensor& omega, double coupling) {
  const std::size_t n = g.node_count();
  if (theta.size() != n || omega.size() != n) {
    throw DimensionError("kuramoto_rhs: phase/frequency length does not match node count");
  }
  Tensor dtheta({n});
  for (std::size_t i = 0; i < n; ++i) {
    const auto nbrs = g.neighbors(i);
    double s = 0.0;
    for (std::size_t j : nbrs) s += std::sin(theta[j] - theta[i]);
    dtheta[i] = omega[i] + (nbrs.empty() ? 0.0 : coupling / static_cast<double>(nbrs.size()) * s);
  }
  return dtheta;
}

Tensor rk4_step(const RightHandSide& rhs, const Tensor& x, double dt) {
  if (!(dt > 0.0)) throw DomainError("rk4_step: dt must be positive");
  const std::size_t n = x.size();
  auto offset = [&](const Tensor& k, double h) {
    Tensor y = x;
    for (std::size_t i = 0; i < n; ++i) y[i] += h * k[i];
    return y;
  };
  const Tensor k1 = rhs(x);
  const Tensor k2 = rhs(offset(k1, 0.5 * dt));
  const Tensor k3 = rhs(offset(k2, 0.5 * dt));
  const Tensor k4 = rhs(offset(k3, dt));
  Tensor next = x;
  for (std::size_t i = 0; i < n; ++i) {
    next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  if (!next.all_finite()) throw DivergenceError("integration blow-up: non-finite RK4 state");
  return next;
}

RightHandSide make_rhs(const SystemSpec& spec, const Graph& g) {
  if (spec.kind == SystemKind::heat) {
    return [&g, k = spec.diffusivity](const Tensor& x) { return heat_rhs(g, x, k); };
  }
  Tensor omega = Tensor::vector(spec.omega);
  return [&g, omega, K = spec.coupling](const Tensor& x) { return kuramoto_rhs(g, x, omega, K); };
}

Tensor sample_initial_condition(const SystemSpec& spec, std::size_t node_count) {
  Rng rng(spec.seed);
  Tensor x0({node_count});
  for (std::size_t i = 0; i < node_count; ++i) {
    const double lo = spec.x0_low.size() == 1 ? spec.x0_low[0] : spec.x0_low[i];
    const double hi = spec.x0_high.size() == 1 ? spec.x0_high[0] : spec.x0_high[i];
    x0[i] = rng.uniform(lo, hi);
  }
  return x0;
}

Trajectory simulate(const SystemSpec& spec, std::shared_ptr<const Graph> g, std::size_t steps,
                    double dt) {
  if (!g) throw ContractError("simulate: null graph");
  spec.validate(g->node_count());
  Tensor x0 = sample_initial_condition(spec, g->node_count());
  return simulate_from(spec, std::move(g), std::move(x0), steps, dt);
}

Trajectory simulate_from(const SystemSpec& spec, std::shared_ptr<const Graph> g, Tensor x0,
                         std::size_t steps, double dt) {
  if (!g) throw ContractError("simulate: null graph");
  spec.validate(g->node_count());
  if (steps < 1) throw DomainError("simulate: at least one step is required");
  if (x0.size() != g->node_count()) throw DimensionError("simulate: x0 length mismatch");
  const std::size_t n = g->node_count();
  const RightHandSide rhs = make_rhs(spec, *g);
  Tensor states({steps + 1, n});
  Tensor x = std::move(x0);
  std::copy(x.data().begin(), x.data().end(), states.row(0).begin());
  for (std::size_t s = 1; s <= steps; ++s) {
    x = rk4_step(rhs, x, dt);
    std::copy(x.data().begin(), x.data().end(), states.row(s).begin());
  }
  return Trajectory(std::move(g), dt, 0.0, std::move(states));
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Trajectory load_trajectory_csv(const std::filesystem::path& path,
                               std::shared_ptr<const Graph> g, double dt, CsvOptions options) {
  if (!g) throw ContractError("load_trajectory_csv: null graph");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file " + path.string());
  const std::size_t n = g->node_count();
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (options.header && line_no == 1) continue;
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      if (col > n) break;
      std::string t = trim(cell);
      if (!t.empty() && t.front() == '+') t.erase(0, 1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
        throw DataError(path.string() + ": non-numeric cell '" + t + "' at row " +
                        std::to_string(line_no) + ", column " + std::to_string(col));
      }
      if (!std::isfinite(v)) {
        throw DataError(path.string() + ": non-finite value at row " + std::to_string(line_no) +
                        ", column " + std::to_string(col));
      }
      values.push_back(v);
    }
    if (!line.empty() && line.back() == ',') ++col;
    if (col != n) {
      throw DataError(path.string() + ": ragged row " + std::to_string(line_no) + " has " +
                      std::to_string(col) + " values, expected " + std::to_string(n));
    }
    ++rows;
  }
  return Trajectory(std::move(g), dt, 0.0, Tensor({rows, n}, std::move(values)));
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void save_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write trajectory file " + path.string());
  std::string buf;
  for (std::size_t r = 0; r < traj.rows(); ++r) {
    const auto row = traj.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) buf += ',';
      buf += format_double(row[c]);
    }
    buf += '\n';
  }
  out << buf;
  if (!out) throw IoError("failed writing " + path.string());
}

Trajectory restrict_to_subgraph(const Trajectory& traj, const SubgraphSpec& spec) {
  auto sub = std::make_shared<const Graph>(induced_subgraph(traj.graph(), spec));
  std::vector<std::size_t> nodes = spec.nodes;
  std::sort(nodes.begin(), nodes.end());
  Tensor states({traj.rows(), nodes.size()});
  for (std::size_t r = 0; r < traj.rows(); ++r) {
    for (std::size_t c = 0; c < nodes.size(); ++c) states(r, c) = traj.states()(r, nodes[c]);
  }
  return Trajectory(std::move(sub), traj.dt(), traj.t0(), std::move(states));
}

}  // namespace dgon
