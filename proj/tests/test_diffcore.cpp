#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nfcl/errors.hpp"
#include "nfcl/graph.hpp"
#include "support.hpp"

namespace {

using namespace nfcl;
using nfcl::test::numeric_gradient;
using nfcl::test::random_tensor;
using nfcl::test::relative_error;

using Builder = std::function<Var(Graph<double>&)>;

// Compares backward() against central differences for a loss built by `f`.
void check_gradient(ParamSet<double> params, const Builder& f, double tol = 1e-6) {
  auto loss = [&] {
    Graph<double> g(params);
    return g.scalar(f(g));
  };
  Graph<double> g(params);
  const GradSet<double> analytic = g.backward(f(g));
  const GradSet<double> numeric = numeric_gradient(params, loss);
  ASSERT_TRUE(analytic.congruent(params));
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      EXPECT_LT(relative_error(analytic[p][i], numeric[p][i]), tol)
          << params.name(p) << "[" << i << "] analytic " << analytic[p][i] << " numeric " << numeric[p][i];
    }
  }
}

ParamSet<double> affine_params(std::size_t in, std::size_t out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamSet<double> p;
  p.add("w", random_tensor<double>({out, in}, rng));
  p.add("b", random_tensor<double>({out}, rng));
  p.add("x", random_tensor<double>({5, in}, rng));
  return p;
}

TEST(Affine, ForwardExample) {
  ParamSet<double> p;
  p.add("w", Tensor<double>::matrix(2, 2, {1, 2, 3, 4}));
  p.add("b", Tensor<double>::vector({0.5, -0.5}));
  Graph<double> g(p);
  const Var x = g.constant(Tensor<double>::matrix(1, 2, {1, 1}));
  const Var y = g.affine(g.param("w"), g.param("b"), x);
  EXPECT_EQ(g.value(y), Tensor<double>::matrix(1, 2, {3.5, 6.5}));
}

TEST(Affine, ShapeMismatchThrows) {
  ParamSet<double> p;
  p.add("w", Tensor<double>(2, 3));
  p.add("b", Tensor<double>(std::vector<std::size_t>{2}));
  Graph<double> g(p);
  const Var x = g.constant(Tensor<double>(4, 2));
  EXPECT_THROW(g.affine(g.param("w"), g.param("b"), x), DimensionError);
}

TEST(Gradients, AffineHuber) {
  std::mt19937_64 rng(1);
  const auto target = random_tensor<double>({5, 3}, rng);
  check_gradient(affine_params(4, 3, 2), [&](Graph<double>& g) {
    return g.huber(g.affine(g.param("w"), g.param("b"), g.param("x")), target, 0.3);
  });
}

TEST(Gradients, SineChain) {
  std::mt19937_64 rng(3);
  const auto target = random_tensor<double>({5, 3}, rng);
  check_gradient(affine_params(4, 3, 4), [&](Graph<double>& g) {
    const Var z = g.affine(g.param("w"), g.param("b"), g.param("x"));
    return g.huber(g.sine(z, 15.0), target, 1.0);
  });
}

TEST(Gradients, FinerChain) {
  std::mt19937_64 rng(5);
  const auto target = random_tensor<double>({5, 3}, rng);
  check_gradient(affine_params(4, 3, 6), [&](Graph<double>& g) {
    const Var z = g.affine(g.param("w"), g.param("b"), g.param("x"));
    return g.huber(g.finer(z, 5.0), target, 1.0);
  });
}

TEST(Gradients, ReluAwayFromKink) {
  std::mt19937_64 rng(7);
  const auto target = random_tensor<double>({5, 3}, rng);
  check_gradient(affine_params(4, 3, 8), [&](Graph<double>& g) {
    const Var z = g.affine(g.param("w"), g.param("b"), g.param("x"));
    return g.huber(g.relu(z), target, 1.0);
  });
}

TEST(Gradients, SoftmaxCrossEntropyWithSoftTargets) {
  std::mt19937_64 rng(11);
  Tensor<double> targets = random_tensor<double>({5, 4}, rng, 0.0, 1.0);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 4; ++c) s += targets(r, c);
    for (std::size_t c = 0; c < 4; ++c) targets(r, c) /= s;
  }
  check_gradient(affine_params(3, 4, 12), [&](Graph<double>& g) {
    return g.softmax_cross_entropy(g.affine(g.param("w"), g.param("b"), g.param("x")), targets);
  });
  // The unfused path must agree.
  check_gradient(affine_params(3, 4, 12), [&](Graph<double>& g) {
    return g.cross_entropy(g.softmax(g.affine(g.param("w"), g.param("b"), g.param("x"))), targets);
  });
}

TEST(Gradients, ColumnsAddScaleSum) {
  std::mt19937_64 rng(13);
  const auto target = random_tensor<double>({5, 2}, rng);
  check_gradient(affine_params(4, 5, 14), [&](Graph<double>& g) {
    const Var y = g.affine(g.param("w"), g.param("b"), g.param("x"));
    const Var a = g.huber(g.columns(y, 1, 3), target, 1.0);
    const Var b = g.scale(g.sum(g.sine(g.columns(y, 3, 5), 2.0)), 0.25);
    return g.add(a, b);
  });
}

TEST(Gradients, TableLookupRepeatedRows) {
  std::mt19937_64 rng(15);
  ParamSet<double> p;
  p.add("table", random_tensor<double>({6, 2}, rng));
  p.add("w", random_tensor<double>({3, 2}, rng));
  p.add("b", random_tensor<double>({3}, rng));
  const auto target = random_tensor<double>({4, 3}, rng);
  check_gradient(p, [&](Graph<double>& g) {
    const Var h = g.lookup(g.param("table"), {4, 1, 4, 0});
    return g.huber(g.sine(g.affine(g.param("w"), g.param("b"), h), 3.0), target, 1.0);
  });
}

TEST(Lookup, BackwardTouchesGatheredRowsOnly) {
  ParamSet<double> p;
  p.add("table", Tensor<double>(8, 1, 1.0));
  Graph<double> g(p);
  const Var loss = g.sum(g.lookup(g.param("table"), {2, 5, 2}));
  const GradSet<double> grad = g.backward(loss);
  for (std::size_t r = 0; r < 8; ++r) {
    const double expected = r == 2 ? 2.0 : (r == 5 ? 1.0 : 0.0);
    EXPECT_EQ(grad[0][r], expected) << "row " << r;
  }
}

TEST(Lookup, OutOfRangeRowThrows) {
  ParamSet<double> p;
  p.add("table", Tensor<double>(4, 1));
  Graph<double> g(p);
  EXPECT_THROW(g.lookup(g.param("table"), {4}), IndexError);
}

TEST(Backward, UnusedParametersGetZeros) {
  ParamSet<double> p;
  p.add("used", Tensor<double>::vector({2.0}));
  p.add("unused", Tensor<double>::vector({3.0, 4.0}));
  Graph<double> g(p);
  const GradSet<double> grad = g.backward(g.scale(g.sum(g.param("used")), 3.0));
  EXPECT_EQ(grad[0], Tensor<double>::vector({3.0}));
  EXPECT_EQ(grad[1], Tensor<double>::vector({0.0, 0.0}));
}

TEST(Backward, NonScalarLossIsRejected) {
  ParamSet<double> p;
  p.add("v", Tensor<double>::vector({1.0, 2.0}));
  Graph<double> g(p);
  EXPECT_THROW(g.backward(g.param("v")), ContractError);
}

TEST(Backward, Deterministic) {
  std::mt19937_64 rng(21);
  ParamSet<float> p;
  p.add("w", random_tensor<float>({64, 32}, rng));
  p.add("b", random_tensor<float>({64}, rng));
  const auto x = random_tensor<float>({4096, 32}, rng);
  const auto target = random_tensor<float>({4096, 64}, rng);
  auto run = [&] {
    Graph<float> g(p);
    const Var y = g.sine(g.affine(g.param("w"), g.param("b"), g.constant(x)), 15.0f);
    return g.backward(g.huber(y, target, 1.0f));
  };
  EXPECT_EQ(run(), run());
}

TEST(Huber, ValueExample) {
  ParamSet<double> p;
  Graph<double> g(p);
  const Var pred = g.constant(Tensor<double>::vector({0.0, 2.0}));
  // 0.5 * 0^2 and 1 * (2 - 0.5), averaged
  EXPECT_DOUBLE_EQ(g.scalar(g.huber(pred, Tensor<double>::vector({0.0, 0.0}), 1.0)), 0.75);
}

}  // namespace
