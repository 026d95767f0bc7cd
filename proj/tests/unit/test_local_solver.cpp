#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "fedstale/errors.hpp"
#include "fedstale/local_solver.hpp"
#include "fedstale/quadratic.hpp"
#include "fedstale/softmax.hpp"
#include "fedstale/synthetic_data.hpp"

namespace fedstale {
namespace {

ParamVector vec2(double a, double b) {
  ParamVector v(2);
  v << a, b;
  return v;
}

LocalConfig cfg(std::size_t k, double lr, std::size_t batch = 1) {
  LocalConfig c;
  c.local_steps = k;
  c.client_lr = lr;
  c.batch_size = batch;
  return c;
}

TEST(LocalTrain, SingleStepIsScaledGradient) {
  const auto obj = QuadraticObjective::two_client_example();
  const ParamVector w = vec2(-3, 4);
  CounterRng rng(0, {0});
  const auto u = local_train(obj, 1, w, cfg(1, 0.05), rng);
  EXPECT_LT((u.delta - 0.05 * obj.client_gradient(1, w)).norm(), 1e-15);
  EXPECT_EQ(u.client, 1u);
}

TEST(LocalTrain, HandUnrolledExample) {
  const auto obj = QuadraticObjective::isotropic({vec2(0, 0)});
  CounterRng rng(0, {0});
  const auto c = cfg(2, 0.1);
  const auto u = local_train(obj, 0, vec2(1, 0), c, rng);
  EXPECT_NEAR(u.delta(0), 0.19, 1e-15);
  EXPECT_EQ(u.delta(1), 0.0);
  const ParamVector g = pseudo_gradient(u, c);
  EXPECT_NEAR(g(0), 0.95, 1e-14);
  EXPECT_EQ(g(1), 0.0);
}

TEST(LocalTrain, FixedPointGivesZeroUpdate) {
  const auto obj = QuadraticObjective::isotropic({vec2(2, -1)});
  CounterRng rng(0, {0});
  const auto u = local_train(obj, 0, vec2(2, -1), cfg(7, 0.3), rng);
  EXPECT_EQ(u.delta, vec2(0, 0));
  EXPECT_EQ(pseudo_gradient(u, cfg(7, 0.3)), vec2(0, 0));
}

TEST(LocalTrain, PseudoGradientOfOneStepIsTheStochasticGradient) {
  const auto obj = QuadraticObjective::two_client_example(3.0);
  const auto c = cfg(1, 0.01);
  std::vector<ParamVector> steps;
  LocalTrainOptions opt;
  opt.step_gradients = &steps;
  CounterRng rng(4, {1});
  const auto u = local_train(obj, 0, vec2(1, 1), c, rng, opt);
  ASSERT_EQ(steps.size(), 1u);
  EXPECT_LT((pseudo_gradient(u, c) - steps[0]).norm(), 1e-13);
}

TEST(LocalTrain, TelescopingIdentity) {
  LabelSwapOptions o;
  o.n_clients = 3;
  o.samples_per_client = 40;
  o.feature_count = 4;
  o.class_count = 3;
  o.swap_fraction = 0.5;
  const SoftmaxObjective obj(build_label_swap_dataset(o));
  const auto c = cfg(6, 0.2, 8);
  std::vector<ParamVector> steps;
  LocalTrainOptions opt;
  opt.step_gradients = &steps;
  CounterRng rng(2, {0});
  const ParamVector w = ParamVector::Constant(static_cast<Eigen::Index>(obj.dimension()), 0.05);
  const auto u = local_train(obj, 2, w, c, rng, opt);
  ASSERT_EQ(steps.size(), 6u);
  ParamVector sum = ParamVector::Zero(w.size());
  double max_norm = 0.0;
  for (const auto& g : steps) {
    sum += g;
    max_norm = std::max(max_norm, g.norm());
  }
  EXPECT_LT((u.delta - 0.2 * sum).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(u.delta.norm(), 0.2 * 6 * max_norm + 1e-12);
  EXPECT_DOUBLE_EQ(u.max_grad_norm, max_norm);
}

TEST(LocalTrain, DeterministicForAStream) {
  const auto obj = QuadraticObjective::two_client_example(5.0);
  CounterRng a(9, {3}), b(9, {3});
  EXPECT_EQ(local_train(obj, 0, vec2(1, 1), cfg(5, 0.02), a).delta,
            local_train(obj, 0, vec2(1, 1), cfg(5, 0.02), b).delta);
}

TEST(LocalTrain, DescentForSmallSteps) {
  const auto obj = QuadraticObjective::two_client_example();
  const double L = *obj.exact_smoothness();
  for (double lr : {0.1 / L, 0.5 / L, 1.0 / L}) {
    for (std::size_t i = 0; i < 2; ++i) {
      CounterRng rng(0, {0});
      const ParamVector w = vec2(-10, -10);
      const auto u = local_train(obj, i, w, cfg(5, lr), rng);
      EXPECT_LE(obj.client_loss(i, w - u.delta), obj.client_loss(i, w));
    }
  }
}

TEST(LocalTrain, DivergenceNamesTheStep) {
  const auto obj = QuadraticObjective::isotropic({vec2(0, 0)});
  CounterRng rng(0, {0});
  try {
    local_train(obj, 0, vec2(1e300, 1e300), cfg(50, 1e10), rng, {.round = 4});
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.client(), 0u);
    EXPECT_EQ(e.round(), 4u);
    EXPECT_GE(e.step(), 1u);
    EXPECT_LE(e.step(), 50u);
  }
}

TEST(LocalTrain, RejectsBadInputs) {
  const auto obj = QuadraticObjective::isotropic({vec2(0, 0)});
  CounterRng rng(0, {0});
  EXPECT_THROW(local_train(obj, 0, vec2(NAN, 0), cfg(1, 0.1), rng), std::invalid_argument);
  EXPECT_THROW(local_train(obj, 0, vec2(0, 0), cfg(0, 0.1), rng), std::invalid_argument);
  EXPECT_THROW(local_train(obj, 0, vec2(0, 0), cfg(1, -0.1), rng), std::invalid_argument);
  EXPECT_THROW(local_train(obj, 3, vec2(0, 0), cfg(1, 0.1), rng), std::out_of_range);
}

}  // namespace
}  // namespace fedstale
