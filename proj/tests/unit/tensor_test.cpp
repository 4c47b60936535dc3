#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dgon/autodiff.hpp"
#include "dgon/errors.hpp"
#include "dgon/params.hpp"
#include "dgon/tensor.hpp"
#include "oracles.hpp"

using namespace dgon;

TEST(Tensor, ConstructionChecksLength) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(Tensor, RowAccess) {
  Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(m(1, 0), 3.0);
  EXPECT_EQ(m.row(1)[1], 4.0);
  EXPECT_FALSE(Tensor::vector({1.0, NAN}).all_finite());
}

TEST(Affine, IdentityWeights) {
  Tensor y = affine(Tensor::matrix({{1, 0}, {0, 1}}), Tensor::vector({0, 0}), Tensor::vector({3, 5}));
  EXPECT_EQ(y, Tensor::vector({3, 5}));
}

TEST(Affine, Scalar) {
  Tensor y = affine(Tensor::matrix({{2}}), Tensor::vector({1}), Tensor::vector({3}));
  EXPECT_DOUBLE_EQ(y[0], 7.0);
}

TEST(Affine, HandEvaluated) {
  Tensor y = affine(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::vector({0.5, -0.5}),
                    Tensor::vector({1, 1}));
  EXPECT_DOUBLE_EQ(y[0], 3.5);
  EXPECT_DOUBLE_EQ(y[1], 6.5);
}

TEST(Affine, ShapeMismatchNamesBothShapes) {
  try {
    affine(Tensor::matrix({{1, 2}}), Tensor::vector({0}), Tensor::vector({1, 2, 3}));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1, 2]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3]"), std::string::npos) << msg;
  }
}

TEST(Activate, Relu) {
  EXPECT_EQ(activate(Tensor::vector({-1, 0, 2}), Activation::relu), Tensor::vector({0, 0, 2}));
}

TEST(Activate, IdentityAndTanh) {
  Tensor x = Tensor::vector({-0.3, 1.7});
  EXPECT_EQ(activate(x, Activation::identity), x);
  EXPECT_EQ(activate(Tensor::vector({0}), Activation::tanh)[0], 0.0);
  EXPECT_THROW(parse_activation("gelu"), ConfigError);
}

TEST(Backward, Square) {
  ParamStore store;
  ParamId w = store.add("w", Tensor::vector({3}));
  Tape tape;
  Var v = tape.parameter(store, w);
  tape.backward(sum(mul(v, v)));
  EXPECT_DOUBLE_EQ(store.grad(w)[0], 6.0);
}

TEST(Backward, UnusedParameterGetsZero) {
  ParamStore store;
  ParamId w = store.add("w", Tensor::vector({3}));
  ParamId u = store.add("u", Tensor::vector({1}));
  Tape tape;
  tape.parameter(store, w);
  Var c = tape.parameter(store, u);
  tape.backward(sum(scale(c, 0.0)));
  EXPECT_EQ(store.grad(w)[0], 0.0);
}

TEST(Backward, NonScalarOutputRejected) {
  Tape tape;
  Var x = tape.constant(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.backward(x), ContractError);
}

TEST(Backward, LinearityOfGradients) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1, 1);
  ParamStore store;
  Tensor W({3, 4});
  for (auto& v : W.data()) v = u(gen);
  ParamId w = store.add("w", W);
  Tensor x({2, 4});
  for (auto& v : x.data()) v = u(gen);

  auto grad_of = [&](double a, double b) {
    store.zero_grad();
    Tape tape;
    Var pw = tape.parameter(store, w);
    Var xv = tape.constant(x);
    Var f = sum(activate(linear(pw, xv), Activation::tanh));
    Var g = sum(mul(linear(pw, xv), linear(pw, xv)));
    tape.backward(add(scale(f, a), scale(g, b)));
    return store.grad(w);
  };
  const Tensor gf = grad_of(1, 0), gg = grad_of(0, 1), mix = grad_of(2.5, -0.75);
  for (std::size_t k = 0; k < mix.size(); ++k) {
    EXPECT_NEAR(mix[k], 2.5 * gf[k] - 0.75 * gg[k], 1e-12);
  }
}

TEST(Backward, ComposedOpsMatchFiniteDifferences) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t p = 2 + trial % 3, q = 1 + trial % 4, rows = 1 + trial % 2;
    ParamStore store;
    Tensor W({q, p}), b({q}), x({rows, p});
    for (auto* t : {&W, &b, &x}) {
      for (auto& v : t->data()) v = u(gen);
    }
    ParamId wi = store.add("W", W), bi = store.add("b", b);
    auto loss = [&]() {
      Tape tape;
      Var h = activate(affine(tape.parameter(store, wi), tape.parameter(store, bi), tape.constant(x)),
                       Activation::tanh);
      return tape.value(sum(mul(h, h)))[0];
    };
    store.zero_grad();
    {
      Tape tape;
      Var h = activate(affine(tape.parameter(store, wi), tape.parameter(store, bi), tape.constant(x)),
                       Activation::tanh);
      tape.backward(sum(mul(h, h)));
    }
    for (ParamId id : {wi, bi}) {
      Tensor& val = store.value(id);
      for (std::size_t k = 0; k < val.size(); ++k) {
        const double fd = oracle::central_difference(loss, val[k], 1e-5);
        const double an = store.grad(id)[k];
        EXPECT_LE(std::abs(fd - an), 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(L1Loss, Examples) {
  Tape tape;
  Var same = tape.constant(Tensor::vector({1, 2}));
  EXPECT_EQ(tape.value(l1_loss(same, Tensor::vector({1, 2})))[0], 0.0);
  Var p = tape.constant(Tensor::vector({1, 1}));
  EXPECT_DOUBLE_EQ(tape.value(l1_loss(p, Tensor::vector({2, 3})))[0], 3.0);
  Var batch = tape.constant(Tensor::matrix({{2, 3}, {1, 1}}));
  EXPECT_DOUBLE_EQ(tape.value(l1_loss(batch, Tensor::matrix({{2, 3}, {2, 3}})))[0], 1.5);
  EXPECT_THROW(l1_loss(p, Tensor::vector({1, 2, 3})), DimensionError);
}

TEST(L1Loss, GradientIsSignWithZeroAtTies) {
  ParamStore store;
  ParamId id = store.add("p", Tensor::matrix({{0.5, 2.0, 1.0}, {-1.0, 3.0, 0.0}}));
  Tape tape;
  tape.backward(l1_loss(tape.parameter(store, id), Tensor::matrix({{1, 1, 1}, {0, 3, 0}})));
  const Tensor& g = store.grad(id);
  EXPECT_DOUBLE_EQ(g[0], -0.5);
  EXPECT_DOUBLE_EQ(g[1], 0.5);
  EXPECT_DOUBLE_EQ(g[2], 0.0);
  EXPECT_DOUBLE_EQ(g[3], -0.5);
  EXPECT_DOUBLE_EQ(g[4], 0.0);
  EXPECT_DOUBLE_EQ(g[5], 0.0);
}

TEST(Adam, ZeroGradientKeepsValues) {
  ParamStore store;
  ParamId id = store.add("w", Tensor::vector({1.25, -2}));
  adam_step(store, AdamConfig{});
  EXPECT_EQ(store.value(id), Tensor::vector({1.25, -2}));
  EXPECT_EQ(store.step_count(), 1u);
}

TEST(Adam, FirstStepHandComputed) {
  ParamStore store;
  ParamId id = store.add("w", Tensor::vector({0}));
  store.grad(id)[0] = 1.0;
  adam_step(store, AdamConfig{});
  // m_hat = 1, v_hat = 1 -> lr * 1 / (1 + 1e-8)
  EXPECT_NEAR(store.value(id)[0], -1e-3 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(store.value(id)[0], -9.99999e-4, 1e-9);
  EXPECT_EQ(store.grad(id)[0], 0.0);
}

TEST(Adam, OnlyParameterWithGradientMoves) {
  ParamStore store;
  ParamId a = store.add("a", Tensor::vector({1}));
  ParamId b = store.add("b", Tensor::vector({1}));
  store.grad(b)[0] = -3.0;
  adam_step(store, AdamConfig{});
  EXPECT_EQ(store.value(a)[0], 1.0);
  EXPECT_GT(store.value(b)[0], 1.0);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  ParamStore store;
  store.add("a", Tensor::vector({1}));
  ParamId b = store.add("branch.0.bias", Tensor::vector({1}));
  store.grad(b)[0] = NAN;
  try {
    adam_step(store, AdamConfig{});
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("branch.0.bias"), std::string::npos);
  }
  EXPECT_EQ(store.step_count(), 0u);
}

TEST(ParamStore, DuplicateNameRejected) {
  ParamStore store;
  store.add("w", Tensor::vector({1}));
  EXPECT_THROW(store.add("w", Tensor::vector({2})), ContractError);
}
