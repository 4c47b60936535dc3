#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "dgon/dynamics.hpp"
#include "dgon/errors.hpp"
#include "oracles.hpp"

using namespace dgon;

namespace {

std::shared_ptr<const Graph> share(Graph g) { return std::make_shared<const Graph>(std::move(g)); }

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST(HeatRhs, Examples) {
  Graph tri = Graph::complete(3);
  EXPECT_EQ(heat_rhs(tri, Tensor::vector({2, 2, 2}), 1.0), Tensor::vector({0, 0, 0}));
  EXPECT_EQ(heat_rhs(tri, Tensor::vector({1, 0, 0}), 1.0), Tensor::vector({-2, 1, 1}));
  Graph g = random_connected_graph(8, 0.3, 4);
  Tensor x({8});
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-3, 3);
  for (auto& v : x.data()) v = u(gen);
  double s = 0.0;
  const Tensor dx = heat_rhs(g, x, 0.7);
  for (double v : dx.data()) s += v;
  EXPECT_NEAR(s, 0.0, 1e-12);
}

TEST(KuramotoRhs, Examples) {
  Graph g = Graph::cycle(4);
  Tensor omega = Tensor::vector({0.1, -0.2, 0.3, 0.4});
  Tensor same = kuramoto_rhs(g, Tensor::vector({0.7, 0.7, 0.7, 0.7}), omega, 2.0);
  EXPECT_EQ(same, omega);
  Tensor two = kuramoto_rhs(Graph::path(2), Tensor::vector({0, std::numbers::pi / 2}),
                            Tensor::vector({0, 0}), 1.0);
  EXPECT_NEAR(two[0], 1.0, 1e-15);
  EXPECT_NEAR(two[1], -1.0, 1e-15);
  Tensor lone = kuramoto_rhs(Graph(2, {}), Tensor::vector({1, 2}), Tensor::vector({3, 4}), 1.0);
  EXPECT_EQ(lone, Tensor::vector({3, 4}));
}

TEST(KuramotoRhs, ScalarLoopOracle) {
  Graph g = random_connected_graph(6, 0.4, 8);
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-3, 3);
  Tensor th({6}), om({6});
  for (auto& v : th.data()) v = u(gen);
  for (auto& v : om.data()) v = u(gen);
  Tensor got = kuramoto_rhs(g, th, om, 1.3);
  for (std::size_t i = 0; i < 6; ++i) {
    double s = 0.0;
    for (std::size_t j : g.neighbors(i)) s += std::sin(th[j] - th[i]);
    EXPECT_NEAR(got[i], om[i] + 1.3 / g.degree(i) * s, 1e-14);
  }
}

TEST(Rk4, ZeroRhs) {
  Tensor x = Tensor::vector({1, -2});
  EXPECT_EQ(rk4_step([](const Tensor& v) { return Tensor::zeros_like(v); }, x, 0.1), x);
}

TEST(Rk4, ExponentialDecay) {
  auto rhs = [](const Tensor& v) { return Tensor::vector({-v[0]}); };
  const double x = rk4_step(rhs, Tensor::vector({1}), 0.1)[0];
  // One step reproduces the degree-4 Taylor polynomial of e^{-dt}.
  EXPECT_NEAR(x, 1 - 0.1 + 0.01 / 2 - 0.001 / 6 + 0.0001 / 24, 1e-15);
  EXPECT_NEAR(x, std::exp(-0.1), 1e-7);
}

TEST(Rk4, TwoHalfStepsBeatOneFullStep) {
  auto rhs = [](const Tensor& v) { return Tensor::vector({-3.0 * v[0]}); };
  const double exact = std::exp(-0.3);
  const double full = rk4_step(rhs, Tensor::vector({1}), 0.1)[0];
  const double half = rk4_step(rhs, rk4_step(rhs, Tensor::vector({1}), 0.05), 0.05)[0];
  EXPECT_LT(std::abs(half - exact), std::abs(full - exact));
}

TEST(Rk4, ErrorsOnBadStepAndBlowup) {
  auto id = [](const Tensor& v) { return v; };
  EXPECT_THROW(rk4_step(id, Tensor::vector({1}), 0.0), DomainError);
  auto blow = [](const Tensor& v) { return Tensor::vector({v[0] * 1e300}); };
  EXPECT_THROW(rk4_step(blow, Tensor::vector({1e10}), 1.0), DivergenceError);
}

TEST(Simulate, HeatConservesSum) {
  SystemSpec spec;
  spec.seed = 12;
  Trajectory t = simulate(spec, share(random_connected_graph(6, 0.3, 1)), 300, 1e-3);
  EXPECT_EQ(t.rows(), 301u);
  double s0 = 0.0;
  for (double v : t.row(0)) s0 += v;
  for (std::size_t r = 1; r < t.rows(); ++r) {
    double s = 0.0;
    for (double v : t.row(r)) s += v;
    EXPECT_NEAR(s, s0, 1e-9 * std::max(1.0, std::abs(s0)));
  }
}

TEST(Simulate, TriangleRelaxesToMean) {
  SystemSpec spec;
  Trajectory t = simulate_from(spec, share(Graph::complete(3)), Tensor::vector({1, 0, 0}), 2000,
                               1e-2);
  for (double v : t.row(t.rows() - 1)) EXPECT_NEAR(v, 1.0 / 3.0, 1e-6);
}

TEST(Simulate, MatchesMatrixExponential) {
  Graph g = random_connected_graph(6, 0.3, 21);
  SystemSpec spec;
  spec.diffusivity = 1.5;
  spec.seed = 4;
  Trajectory t = simulate(spec, share(g), 200, 1e-3);
  oracle::HeatSolution exact(g, 1.5);
  std::vector<double> x0(t.row(0).begin(), t.row(0).end());
  for (std::size_t r : {1u, 50u, 200u}) {
    auto want = exact.at(x0, r * 1e-3);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(t.states()(r, i), want[i], 1e-10);
  }
}

TEST(Simulate, SeededDeterminism) {
  SystemSpec spec;
  spec.seed = 77;
  auto g = share(Graph::cycle(5));
  EXPECT_EQ(simulate(spec, g, 50, 1e-3).states(), simulate(spec, g, 50, 1e-3).states());
  spec.seed = 78;
  EXPECT_NE(simulate(spec, g, 50, 1e-3).states(), simulate(SystemSpec{}, g, 50, 1e-3).states());
}

TEST(Rk4, KuramotoWithoutCouplingDrifts) {
  Graph g = Graph::cycle(4);
  Tensor omega = Tensor::vector({0.5, -1.0, 2.0, 0.25});
  Tensor theta0 = Tensor::vector({0.1, 0.2, -0.3, 1.0});
  auto rhs = [&](const Tensor& th) { return kuramoto_rhs(g, th, omega, 0.0); };
  Tensor theta = theta0;
  for (int s = 0; s < 100; ++s) theta = rk4_step(rhs, theta, 1e-2);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(theta[i], theta0[i] + omega[i], 1e-8);
}

TEST(SystemSpec, Validation) {
  SystemSpec spec;
  spec.diffusivity = 0.0;
  EXPECT_THROW(spec.validate(3), ConfigError);
  SystemSpec k;
  k.kind = SystemKind::kuramoto;
  k.omega = {1.0};
  EXPECT_THROW(k.validate(3), ConfigError);
}

TEST(TrajectoryCsv, Parses) {
  oracle::TempDir dir("csv");
  write(dir.path() / "a.csv", "1,2\n3,4\n");
  Trajectory t = load_trajectory_csv(dir.path() / "a.csv", share(Graph::path(2)), 0.1);
  EXPECT_EQ(t.states(), Tensor::matrix({{1, 2}, {3, 4}}));
  write(dir.path() / "h.csv", "x,y\n1,2\n3,4\n");
  EXPECT_EQ(load_trajectory_csv(dir.path() / "h.csv", share(Graph::path(2)), 0.1, {true}).states(),
            t.states());
}

TEST(TrajectoryCsv, Errors) {
  oracle::TempDir dir("csv");
  auto g = share(Graph::path(2));
  write(dir.path() / "r.csv", "1,2\n3,4,5\n");
  try {
    load_trajectory_csv(dir.path() / "r.csv", g, 0.1);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("ragged"), std::string::npos);
  }
  write(dir.path() / "n.csv", "1,2\n3,NaN\n");
  try {
    load_trajectory_csv(dir.path() / "n.csv", g, 0.1);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column 2"), std::string::npos) << msg;
  }
  write(dir.path() / "w.csv", "1,abc\n3,4\n");
  EXPECT_THROW(load_trajectory_csv(dir.path() / "w.csv", g, 0.1), DataError);
  EXPECT_THROW(load_trajectory_csv(dir.path() / "missing.csv", g, 0.1), IoError);
}

TEST(TrajectoryCsv, RoundTripIsExact) {
  oracle::TempDir dir("csv");
  SystemSpec spec;
  spec.seed = 5;
  auto g = share(Graph::cycle(4));
  Trajectory t = simulate(spec, g, 20, 1e-3);
  save_trajectory_csv(t, dir.path() / "t.csv");
  EXPECT_EQ(load_trajectory_csv(dir.path() / "t.csv", g, 1e-3).states(), t.states());
}

TEST(RestrictToSubgraph, TakesColumns) {
  SystemSpec spec;
  spec.seed = 9;
  Trajectory t = simulate(spec, share(Graph::path(5)), 10, 1e-3);
  Trajectory s = restrict_to_subgraph(t, {{1, 2, 3}});
  EXPECT_EQ(s.graph(), Graph::path(3));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(s.states()(r, k), t.states()(r, k + 1));
  }
}
