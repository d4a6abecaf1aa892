#include "ringdsq/neural.hpp"

#include <cmath>
#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace ringdsq;
using namespace ringdsq::nn;

TEST(Forward, ZeroParametersGiveZeroOutput) {
  Mlp net = make_mlp({3, 8, 4});
  const std::vector<double> x{1.0, -2.0, 3.0};
  for (double v : mlp_forward(net, x)) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Forward, SingleLayerAffine) {
  Mlp net = make_mlp({1, 1});
  net.layers[0].weight = {2.0};
  net.layers[0].bias = {1.0};
  const std::vector<double> x{3.0};
  EXPECT_DOUBLE_EQ(mlp_forward(net, x)[0], 7.0);
}

TEST(Forward, RectifierZeroesNegativePreactivations) {
  Mlp net = make_mlp({1, 1, 1});
  net.layers[0].weight = {-1.0};  // hidden pre-activation = -x
  net.layers[1].weight = {1.0};
  const std::vector<double> x{2.0};
  EXPECT_DOUBLE_EQ(mlp_forward(net, x)[0], 0.0);
  const std::vector<double> neg{-2.0};
  EXPECT_DOUBLE_EQ(mlp_forward(net, neg)[0], 2.0);
}

TEST(Forward, InputWidthMismatchThrows) {
  Mlp net = make_mlp({3, 2});
  const std::vector<double> x{1.0, 2.0};
  EXPECT_THROW(mlp_forward(net, x), std::invalid_argument);
}

TEST(Forward, DeterministicAcrossCalls) {
  Rng rng(1);
  Mlp net = make_mlp({4, 16, 8, 2});
  init_glorot_uniform(net, rng);
  const std::vector<double> x{0.1, -0.7, 2.0, 0.3};
  const auto a = mlp_forward(net, x);
  const auto b = mlp_forward(net, x);
  EXPECT_EQ(a, b);
}

TEST(Backward, ZeroOutputGradientGivesZeroParameterGradients) {
  Rng rng(2);
  Mlp net = make_mlp({3, 6, 2});
  init_glorot_uniform(net, rng);
  MlpCache cache;
  mlp_forward(net, std::vector<double>{1, 2, 3}, cache);
  MlpGrads grads(net);
  mlp_backward(net, cache, std::vector<double>{0.0, 0.0}, grads);
  for (const auto& l : grads.layers) {
    for (double g : l.weight) EXPECT_DOUBLE_EQ(g, 0.0);
    for (double g : l.bias) EXPECT_DOUBLE_EQ(g, 0.0);
  }
}

TEST(Backward, LinearLayerWeightGradientIsTheInput) {
  Mlp net = make_mlp({3, 1});
  net.layers[0].weight = {0.5, -0.25, 2.0};
  MlpCache cache;
  const std::vector<double> x{1.5, -2.0, 4.0};
  mlp_forward(net, x, cache);
  MlpGrads grads(net);
  mlp_backward(net, cache, std::vector<double>{1.0}, grads);
  EXPECT_EQ(grads.layers[0].weight, x);
  EXPECT_DOUBLE_EQ(grads.layers[0].bias[0], 1.0);
}

TEST(Backward, MatchesCentralFiniteDifferences) {
  Rng rng(3);
  double worst = 0;
  int done = 0;
  while (done < 20) {
    const int depth = 2 + static_cast<int>(rng.uniform_int(3));
    std::vector<int> sizes;
    sizes.push_back(1 + static_cast<int>(rng.uniform_int(5)));
    for (int k = 0; k < depth; ++k)
      sizes.push_back(1 + static_cast<int>(rng.uniform_int(6)));
    Mlp net = make_mlp(sizes);
    init_glorot_uniform(net, rng);
    std::vector<double> x(sizes.front());
    for (double& v : x) v = rng.uniform(-2, 2);
    // redraw instances whose hidden units sit on the rectifier kink, where
    // the numeric derivative is undefined
    if (!test::away_from_relu_kinks(net, x)) continue;
    std::vector<double> coeffs(sizes.back());
    for (double& c : coeffs) c = rng.uniform(-1, 1);
    worst = std::max(worst, test::gradient_check(net, x, coeffs));
    ++done;
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Backward, InputGradientMatchesFiniteDifferences) {
  Rng rng(4);
  Mlp net = make_mlp({4, 8, 3});
  init_glorot_uniform(net, rng);
  std::vector<double> x{0.4, -0.3, 1.2, 0.9};
  const std::vector<double> coeffs{0.7, -1.1, 0.2};
  MlpCache cache;
  mlp_forward(net, x, cache);
  MlpGrads grads(net);
  std::vector<double> input_grad;
  mlp_backward(net, cache, coeffs, grads, &input_grad);

  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    auto eval = [&] {
      double s = 0;
      const auto out = mlp_forward(net, x);
      for (std::size_t o = 0; o < out.size(); ++o) s += coeffs[o] * out[o];
      return s;
    };
    x[i] = saved + h;
    const double up = eval();
    x[i] = saved - h;
    const double down = eval();
    x[i] = saved;
    EXPECT_NEAR(input_grad[i], (up - down) / (2 * h), 1e-5);
  }
}

TEST(Adam, ZeroGradientIsANoOp) {
  Mlp net = make_mlp({1, 1});
  net.layers[0].weight = {1.5};
  net.layers[0].bias = {-0.25};
  AdamState state(net, AdamParams{.lr = 0.1});
  MlpGrads grads(net);
  grads.zero();
  adam_step(net, grads, state);
  EXPECT_EQ(net.layers[0].weight[0], 1.5);
  EXPECT_EQ(net.layers[0].bias[0], -0.25);
  EXPECT_EQ(state.t, 1);
}

TEST(Adam, ScalarHandExample) {
  // theta=1, g=4, lr=0.1, t=1: m_hat=4, sqrt(v_hat)=4,
  // theta' = 1 - 0.1*4/(4+1e-8)
  Mlp net = make_mlp({1, 1});
  net.layers[0].weight = {1.0};
  AdamState state(net, AdamParams{.lr = 0.1});
  MlpGrads grads(net);
  grads.layers[0].weight[0] = 4.0;
  adam_step(net, grads, state);
  EXPECT_NEAR(net.layers[0].weight[0], 1.0 - 0.1 * 4.0 / (4.0 + 1e-8), 1e-10);
}

TEST(Adam, StepSizeIsBoundedByTheLearningRate) {
  Mlp net = make_mlp({1, 1});
  net.layers[0].weight = {2.0};
  const double lr = 0.05;
  AdamState state(net, AdamParams{.lr = lr});
  MlpGrads grads(net);
  double prev = net.layers[0].weight[0];
  for (int t = 0; t < 2; ++t) {
    grads.layers[0].weight[0] = -3.2;
    adam_step(net, grads, state);
    const double step = std::abs(net.layers[0].weight[0] - prev);
    EXPECT_LE(step, lr * (1.0 + 1e-6));
    prev = net.layers[0].weight[0];
  }
}

TEST(SoftUpdate, EndpointsAndMidpoint) {
  Rng rng(5);
  NetworkPair pair;
  pair.phi = make_mlp({2, 3});
  pair.rho = make_mlp({3, 1});
  init_glorot_uniform(pair.phi, rng);
  init_glorot_uniform(pair.rho, rng);
  pair.phi_target = make_mlp({2, 3});
  pair.rho_target = make_mlp({3, 1});

  NetworkPair copy = pair;
  copy.tau = 1.0;
  soft_update(copy);
  EXPECT_EQ(copy.phi_target.layers[0].weight, copy.phi.layers[0].weight);

  copy = pair;
  copy.tau = 0.0;
  soft_update(copy);
  EXPECT_EQ(copy.phi_target.layers[0].weight,
            std::vector<double>(copy.phi_target.layers[0].weight.size(), 0.0));

  NetworkPair mid;
  mid.phi = make_mlp({1, 1});
  mid.phi.layers[0].weight = {2.0};
  mid.rho = make_mlp({1, 1});
  mid.phi_target = make_mlp({1, 1});
  mid.rho_target = make_mlp({1, 1});
  mid.tau = 0.5;
  soft_update(mid);
  EXPECT_DOUBLE_EQ(mid.phi_target.layers[0].weight[0], 1.0);
}

TEST(SoftUpdate, GapShrinksGeometrically) {
  Rng rng(6);
  NetworkPair pair;
  pair.phi = make_mlp({3, 5, 2});
  pair.rho = make_mlp({2, 2});
  init_glorot_uniform(pair.phi, rng);
  init_glorot_uniform(pair.rho, rng);
  pair.phi_target = make_mlp({3, 5, 2});
  pair.rho_target = make_mlp({2, 2});
  init_glorot_uniform(pair.phi_target, rng);
  init_glorot_uniform(pair.rho_target, rng);
  pair.tau = 0.01;

  auto gap_norm = [&] {
    double s = 0;
    for (std::size_t k = 0; k < pair.phi.layers.size(); ++k)
      for (std::size_t i = 0; i < pair.phi.layers[k].weight.size(); ++i) {
        const double d =
            pair.phi_target.layers[k].weight[i] - pair.phi.layers[k].weight[i];
        s += d * d;
      }
    return std::sqrt(s);
  };
  const double initial = gap_norm();
  const int k = 25;
  for (int i = 0; i < k; ++i) soft_update(pair);
  EXPECT_NEAR(gap_norm(), initial * std::pow(1.0 - pair.tau, k), 1e-10 * initial);
}

TEST(SoftUpdate, TargetStaysWithinConvexBounds) {
  Rng rng(7);
  NetworkPair pair;
  pair.phi = make_mlp({2, 4});
  pair.rho = make_mlp({4, 1});
  init_glorot_uniform(pair.phi, rng);
  init_glorot_uniform(pair.rho, rng);
  pair.phi_target = make_mlp({2, 4});
  pair.rho_target = make_mlp({4, 1});
  init_glorot_uniform(pair.phi_target, rng);
  init_glorot_uniform(pair.rho_target, rng);
  pair.tau = 0.3;
  const NetworkPair before = pair;
  soft_update(pair);
  for (std::size_t k = 0; k < pair.phi.layers.size(); ++k)
    for (std::size_t i = 0; i < pair.phi.layers[k].weight.size(); ++i) {
      const double lo = std::min(before.phi_target.layers[k].weight[i],
                                 before.phi.layers[k].weight[i]);
      const double hi = std::max(before.phi_target.layers[k].weight[i],
                                 before.phi.layers[k].weight[i]);
      const double v = pair.phi_target.layers[k].weight[i];
      EXPECT_GE(v, lo - 1e-15);
      EXPECT_LE(v, hi + 1e-15);
    }
}

TEST(Init, WeightsWithinGlorotBoundsAndZeroBiases) {
  Rng rng(8);
  Mlp net = make_mlp({7, 13, 5});
  init_glorot_uniform(net, rng);
  for (const auto& l : net.layers) {
    const double bound = std::sqrt(6.0 / (l.in + l.out));
    for (double w : l.weight) {
      EXPECT_GE(w, -bound);
      EXPECT_LE(w, bound);
    }
    for (double b : l.bias) EXPECT_EQ(b, 0.0);
  }
}

TEST(Init, DeterministicGivenSeed) {
  Mlp a = make_mlp({3, 8, 2});
  Mlp b = make_mlp({3, 8, 2});
  Rng ra(9), rb(9);
  init_glorot_uniform(a, ra);
  init_glorot_uniform(b, rb);
  for (std::size_t k = 0; k < a.layers.size(); ++k)
    EXPECT_EQ(a.layers[k].weight, b.layers[k].weight);
}

TEST(Adam, ShapeMismatchThrows) {
  Mlp net = make_mlp({2, 2});
  Mlp other = make_mlp({2, 3, 2});
  AdamState state(other);
  MlpGrads grads(net);
  EXPECT_THROW(adam_step(net, grads, state), std::invalid_argument);
}
