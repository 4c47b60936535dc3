#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dgon/dynamics.hpp"
#include "dgon/graph.hpp"
#include "dgon/model.hpp"
#include "dgon/tensor.hpp"

namespace oracle {

// x(t) = exp(-k L t) x0 through the eigendecomposition of the Laplacian.
class HeatSolution {
 public:
  HeatSolution(const dgon::Graph& g, double diffusivity);
  std::vector<double> at(const std::vector<double>& x0, double t) const;

 private:
  std::size_t n_;
  double k_;
  std::vector<double> vectors_;  // column-major eigenvectors
  std::vector<double> values_;
};

// Plain loops over named parameters, no tape and no Eigen.
std::vector<std::vector<double>> reference_predict(const dgon::DeepGraphONet& model,
                                                   const dgon::Graph& g,
                                                   const dgon::MemoryWindow& window,
                                                   const std::vector<double>& queries);

struct GradCheck {
  double max_relative = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;  // perturbation moved a residual across the |.| kink
  std::string worst;
};

// Reverse-mode gradients of the L1 batch loss against central differences for
// every scalar parameter. Relative error is |fd - ad| / max(|fd|, |ad|, floor).
GradCheck check_model_gradients(dgon::DeepGraphONet& model, const dgon::Graph& g,
                                const dgon::Tensor& features, const std::vector<double>& queries,
                                const std::vector<std::size_t>& query_window,
                                const dgon::Tensor& targets, double eps, double kink,
                                double floor);

double central_difference(const std::function<double()>& f, double& x, double eps);

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);

}  // namespace oracle
