#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "support.hpp"
#include "treeforget/errors.hpp"
#include "treeforget/softforest.hpp"

using namespace treeforget;
using namespace tf_test;

namespace {

const double kLn9 = std::log(9.0);

double leaf_mass(const SoftForest& f, std::size_t tree, std::span<const double> x) {
  const auto act = f.activations(tree, x);
  double sum = 0.0;
  for (std::size_t n = 0; n < act.size(); ++n) {
    if (f.base().trees()[tree].node(n).is_leaf()) sum += act[n];
  }
  return sum;
}

// Full depth-2 tree on one feature, four one-hot leaves over four classes.
Ensemble full_depth_two(double root, double left, double right) {
  return single(Tree({split(0, root, 1, 4), split(0, left, 2, 3), leaf({1, 0, 0, 0}), leaf({0, 1, 0, 0}),
                      split(0, right, 5, 6), leaf({0, 0, 1, 0}), leaf({0, 0, 0, 1})}),
                4, 1);
}

}  // namespace

TEST(Sigmoid, ClosedForms) {
  EXPECT_DOUBLE_EQ(soft_sigmoid(0.0, 3.0), 0.5);
  EXPECT_DOUBLE_EQ(soft_sigmoid(0.0, 1e6), 0.5);
  EXPECT_NEAR(soft_sigmoid(1.0, kLn9), 0.9, 1e-15);
  // exp(-5000) is below the smallest subnormal, so the rounded value is 0.
  const double tiny = soft_sigmoid(-50.0, 100.0);
  EXPECT_FALSE(std::isnan(tiny));
  EXPECT_GE(tiny, 0.0);
  EXPECT_LE(tiny, 1e-300);
  EXPECT_GT(soft_sigmoid(-7.0, 100.0), 0.0);
  EXPECT_EQ(soft_sigmoid(1e300, 1e10), 1.0);
}

TEST(Softmax, ClosedFormsAndShiftInvariance) {
  const auto even = softmax(std::vector<double>{3.0, 3.0}, 7.0);
  EXPECT_DOUBLE_EQ(even[0], 0.5);
  const auto p = softmax(std::vector<double>{1.0, 0.0}, kLn9);
  EXPECT_NEAR(p[0], 0.9, 1e-15);
  EXPECT_NEAR(p[1], 0.1, 1e-15);

  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> z{rng.normal(), rng.normal(), rng.normal()};
    const auto a = softmax(z, 5.0);
    const double c = 100.0 * rng.normal();
    for (auto& v : z) v += c;
    const auto b = softmax(z, 5.0);
    for (std::size_t y = 0; y < 3; ++y) EXPECT_NEAR(a[y], b[y], 1e-12);
  }
}

TEST(Softmax, SharpensMonotonically) {
  const std::vector<double> z{0.6, 0.4};
  double prev = 0.5;
  for (double tau : {0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 200.0}) {
    const double p0 = softmax(z, tau)[0];
    EXPECT_GE(p0, prev);
    prev = p0;
  }
  EXPECT_GT(prev, 1.0 - 1e-12);
}

TEST(Activations, Examples) {
  const SoftForest leaf_only(single(Tree({leaf({1, 0})}), 2, 1), 10, 5);
  EXPECT_EQ(leaf_only.activations(0, std::vector<double>{3.0}), (std::vector<double>{1.0}));

  const SoftForest stumpy(single(stump(0, 0.5, {1, 0}, {0, 1}), 2, 1), 10, 5);
  const auto act = stumpy.activations(0, std::vector<double>{0.5});
  EXPECT_DOUBLE_EQ(act[1], 0.5);
  EXPECT_DOUBLE_EQ(act[2], 0.5);
  EXPECT_EQ(stumpy.tree_predict(0, std::vector<double>{0.5}), (std::vector<double>{0.5, 0.5}));

  // Chain: root sends right, its right child sends right again.
  const Ensemble chain = single(
      Tree({split(0, 0.0, 1, 2), leaf({1, 0}), split(0, 0.0, 3, 4), leaf({1, 0}), leaf({0, 1})}), 2, 1);
  const SoftForest soft(chain, kLn9, 1.0);
  EXPECT_NEAR(soft.activations(0, std::vector<double>{1.0})[4], 0.81, 1e-14);
}

TEST(Activations, FourLeafMixture) {
  const SoftForest f(full_depth_two(0.0, 0.0, 0.0), kLn9, 1.0);
  const auto t = f.tree_predict(0, std::vector<double>{1.0});
  EXPECT_NEAR(t[0], 0.01, 1e-14);
  EXPECT_NEAR(t[1], 0.09, 1e-14);
  EXPECT_NEAR(t[2], 0.09, 1e-14);
  EXPECT_NEAR(t[3], 0.81, 1e-14);
}

TEST(Activations, LeafMassIsOneForAnyInput) {
  Rng rng(31);
  RandomTreeSpec spec;
  spec.max_depth = 6;
  spec.num_features = 4;
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = random_ensemble(rng, 3, spec);
    const double sigma = std::exp(8.0 * rng.uniform() - 2.0);
    const SoftForest f(g, sigma, 5.0);
    std::vector<double> x(4);
    for (auto& v : x) v = 3.0 * rng.normal();
    for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(leaf_mass(f, t, x), 1.0, 1e-9);
  }
}

TEST(Activations, MonotoneSharpening) {
  Rng rng(12);
  RandomTreeSpec spec;
  spec.max_depth = 5;
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = random_ensemble(rng, 1, spec);
    std::vector<double> x{rng.uniform(), rng.uniform(), rng.uniform()};
    const auto hard = hard_activation(g.trees()[0], x);
    double prev = 0.0;
    for (double sigma : {0.1, 1.0, 3.0, 10.0, 30.0, 100.0, 1000.0}) {
      const double reach = SoftForest(g, sigma, 5.0).activations(0, x)[hard];
      EXPECT_GE(reach, prev - 1e-15);
      prev = reach;
    }
  }
}

TEST(Fidelity, SaturatedInputsMatchHardTrees) {
  Rng rng(5);
  RandomTreeSpec spec;
  spec.max_depth = 4;
  spec.lo = 0;
  spec.hi = 10;
  spec.integer_thresholds = true;
  spec.num_classes = 3;
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = random_ensemble(rng, 2, spec);
    const SoftForest f(g, 100.0, 5.0);
    std::vector<double> x(3);
    for (auto& v : x) v = 0.5 + static_cast<double>(rng.uniform_index(10));
    for (std::size_t t = 0; t < 2; ++t) {
      const auto soft = f.tree_predict(t, x);
      const auto hard = tree_predict(g.trees()[t], x);
      for (std::size_t y = 0; y < 3; ++y) EXPECT_NEAR(soft[y], hard[y], 1e-12);
    }
    const auto grad = f.backward(f.forward(x), std::vector<double>{1.0, -2.0, 0.5});
    for (double gv : grad) EXPECT_LT(std::abs(gv), 1e-12);
  }
}

TEST(Backward, DepthOneAtThreshold) {
  const double sigma = 4.0;
  const double tau = 3.0;
  const SoftForest f(single(stump(0, 0.5, {1, 0}, {0, 1}), 2, 1), sigma, tau);
  const auto grad = f.backward(f.forward(std::vector<double>{0.5}), std::vector<double>{1.0, -1.0});
  ASSERT_EQ(grad.size(), 1u);
  // p = (0.5, 0.5), dz = tau * p * (u - <p,u>) = (tau/2, -tau/2); dz0/dtheta = sigma/4.
  EXPECT_NEAR(grad[0], tau * sigma / 4.0, 1e-15);
  EXPECT_GT(grad[0], 0.0);
  // Raising theta raises the left leaf's reach.
  SoftForest moved = f;
  moved.thresholds()[0] += 0.01;
  EXPECT_GT(moved.activations(0, std::vector<double>{0.5})[1], 0.5);
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(77);
  RandomTreeSpec spec;
  spec.max_depth = 4;
  for (int trial = 0; trial < 50; ++trial) {
    spec.num_classes = 2 + rng.uniform_index(2);
    const auto g = random_ensemble(rng, 1 + rng.uniform_index(3), spec);
    const double sigma = 1.0 + 5.0 * rng.uniform();
    const double tau = 1.0 + 4.0 * rng.uniform();
    const SoftForest f(g, sigma, tau);
    std::vector<double> x{rng.uniform(), rng.uniform(), rng.uniform()};
    std::vector<double> u(spec.num_classes);
    for (auto& v : u) v = rng.normal();

    const auto analytic = f.backward(f.forward(x), u);
    const auto loss = [&](const std::vector<double>& theta) {
      SoftForest probe = f;
      std::copy(theta.begin(), theta.end(), probe.thresholds().begin());
      const auto p = probe.predict(x);
      return std::inner_product(p.begin(), p.end(), u.begin(), 0.0);
    };
    const std::vector<double> theta(f.thresholds().begin(), f.thresholds().end());
    const auto numeric = oracle::finite_difference(loss, theta);
    EXPECT_LT(oracle::relative_error(analytic, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(Backward, Errors) {
  const SoftForest f(single(stump(0, 0.5, {1, 0}, {0, 1}), 2, 1), 4.0, 3.0);
  EXPECT_THROW(f.backward(ForwardTrace{}, std::vector<double>{1.0, 0.0}), UsageError);
  const auto trace = f.forward(std::vector<double>{0.2});
  EXPECT_THROW(f.backward(trace, std::vector<double>{1.0}), ContractError);
  EXPECT_THROW(f.forward(std::vector<double>{0.2, 0.3}), ContractError);
  EXPECT_THROW(SoftForest(f.base(), 0.0, 1.0), ContractError);
}

TEST(AttachDetach, RoundTripAndLocality) {
  Rng rng(9);
  RandomTreeSpec spec;
  spec.max_depth = 4;
  const auto g = random_ensemble(rng, 3, spec);
  const auto soft = attach(g, 10.0, 5.0);
  EXPECT_EQ(detach(soft), g);

  auto edited = soft;
  const std::size_t k = edited.parameter_index(1, 0);
  edited.thresholds()[k] += 0.3;
  const auto out = detach(edited);
  EXPECT_EQ(out.weights(), g.weights());
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t n = 0; n < g.trees()[t].size(); ++n) {
      auto expected = g.trees()[t].node(n);
      if (t == 1 && n == 0) expected.threshold += 0.3;
      EXPECT_EQ(out.trees()[t].node(n), expected);
    }
  }
  EXPECT_THROW(soft.parameter_index(0, g.trees()[0].size() - 1), ContractError);

  const auto sharp = attach(g, 50.0, 5.0);
  EXPECT_TRUE(std::ranges::equal(sharp.thresholds(), soft.thresholds()));
  const std::vector<double> x{0.41, 0.52, 0.63};
  EXPECT_NE(sharp.predict(x), soft.predict(x));
}
