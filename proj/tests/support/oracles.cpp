#include "oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace oracle {

HeatSolution::HeatSolution(const dgon::Graph& g, double diffusivity)
    : n_(g.node_count()), k_(diffusivity) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n_, n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j : g.neighbors(i)) {
      L(i, j) -= 1.0;
      L(i, i) += 1.0;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
  vectors_.assign(es.eigenvectors().data(), es.eigenvectors().data() + n_ * n_);
  values_.assign(es.eigenvalues().data(), es.eigenvalues().data() + n_);
}

std::vector<double> HeatSolution::at(const std::vector<double>& x0, double t) const {
  std::vector<double> c(n_, 0.0), x(n_, 0.0);
  for (std::size_t a = 0; a < n_; ++a) {
    for (std::size_t i = 0; i < n_; ++i) c[a] += vectors_[a * n_ + i] * x0[i];
    c[a] *= std::exp(-k_ * values_[a] * t);
  }
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t a = 0; a < n_; ++a) x[i] += vectors_[a * n_ + i] * c[a];
  }
  return x;
}

namespace {

double act(double x, dgon::Activation a) {
  switch (a) {
    case dgon::Activation::relu: return x > 0.0 ? x : 0.0;
    case dgon::Activation::tanh: return std::tanh(x);
    case dgon::Activation::identity: return x;
  }
  return x;
}

using Mat = std::vector<std::vector<double>>;

const dgon::Tensor& param(const dgon::DeepGraphONet& model, const std::string& name) {
  return model.params().value(*model.params().find(name));
}

}  // namespace

std::vector<std::vector<double>> reference_predict(const dgon::DeepGraphONet& model,
                                                   const dgon::Graph& g,
                                                   const dgon::MemoryWindow& window,
                                                   const std::vector<double>& queries) {
  const auto& cfg = model.config();
  const std::size_t n = g.node_count();
  Mat h(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < window.sensor_count(); ++k) {
      h[i].push_back(window.values(i, k));
      if (cfg.variant == dgon::ModelVariant::resolution_independent) {
        h[i].push_back(window.offsets[k] / window.memory_length);
      }
    }
  }
  for (std::size_t l = 0; l < cfg.gnn_layers; ++l) {
    const std::string p = "branch." + std::to_string(l) + ".";
    const auto& w1 = param(model, p + "w_self");
    const auto& w2 = param(model, p + "w_neigh");
    const auto& b = param(model, p + "bias");
    const bool last = l + 1 == cfg.gnn_layers;
    Mat next(n, std::vector<double>(w1.rows(), 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> mean(h[i].size(), 0.0);
      const auto nb = g.neighbors(i);
      for (std::size_t j : nb) {
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += h[j][c] / nb.size();
      }
      for (std::size_t o = 0; o < w1.rows(); ++o) {
        double s = b[o];
        for (std::size_t c = 0; c < h[i].size(); ++c) s += w1(o, c) * h[i][c] + w2(o, c) * mean[c];
        next[i][o] = last ? s : act(s, cfg.activation);
      }
    }
    h = std::move(next);
  }
  Mat out;
  for (double q : queries) {
    std::vector<double> z{q / cfg.horizon};
    for (std::size_t l = 0; l < cfg.trunk_layers; ++l) {
      const std::string p = "trunk." + std::to_string(l) + ".";
      const auto& w = param(model, p + "weight");
      const auto& b = param(model, p + "bias");
      std::vector<double> next(w.rows());
      for (std::size_t o = 0; o < w.rows(); ++o) {
        double s = b[o];
        for (std::size_t c = 0; c < z.size(); ++c) s += w(o, c) * z[c];
        next[o] = act(s, cfg.activation);
      }
      z = std::move(next);
    }
    std::vector<double> row(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < z.size(); ++j) row[i] += h[i][j] * z[j];
    }
    out.push_back(row);
  }
  return out;
}

GradCheck check_model_gradients(dgon::DeepGraphONet& model, const dgon::Graph& g,
                                const dgon::Tensor& features, const std::vector<double>& queries,
                                const std::vector<std::size_t>& query_window,
                                const dgon::Tensor& targets, double eps, double kink,
                                double floor) {
  using namespace dgon;
  auto residuals = [&]() {
    Tensor pred = model.predict_batch(g, features, queries, query_window);
    for (std::size_t k = 0; k < pred.size(); ++k) pred[k] -= targets[k];
    return pred;
  };
  auto loss_of = [&](const Tensor& r) {
    double s = 0.0;
    for (double v : r.data()) s += std::abs(v);
    return s / static_cast<double>(r.rows());
  };
  ParamStore& params = model.params();
  params.zero_grad();
  {
    Tape tape;
    Var pred = model.forward(tape, g, features, queries, query_window);
    tape.backward(l1_loss(pred, targets));
  }
  const Tensor base = residuals();
  GradCheck out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& value = params.value(ParamId{p});
    const Tensor grad = params.grad(ParamId{p});
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double saved = value[k];
      value[k] = saved + eps;
      const Tensor up = residuals();
      value[k] = saved - eps;
      const Tensor down = residuals();
      value[k] = saved;
      bool near_kink = false;
      for (std::size_t r = 0; r < base.size(); ++r) {
        const bool crossed = std::signbit(up[r]) != std::signbit(base[r]) ||
                             std::signbit(down[r]) != std::signbit(base[r]);
        if (std::abs(base[r]) < kink || crossed) near_kink = true;
      }
      if (near_kink) {
        ++out.excluded;
        continue;
      }
      const double fd = (loss_of(up) - loss_of(down)) / (2.0 * eps);
      const double rel =
          std::abs(fd - grad[k]) / std::max({std::abs(fd), std::abs(grad[k]), floor});
      ++out.checked;
      if (rel > out.max_relative) {
        out.max_relative = rel;
        out.worst = params.name(ParamId{p}) + "[" + std::to_string(k) + "]";
      }
    }
  }
  params.zero_grad();
  return out;
}

double central_difference(const std::function<double()>& f, double& x, double eps) {
  const double saved = x;
  x = saved + eps;
  const double up = f();
  x = saved - eps;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * eps);
}

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          ("dgon-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace oracle
