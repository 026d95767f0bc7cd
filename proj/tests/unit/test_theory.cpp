#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "fedstale/hard_instance.hpp"
#include "fedstale/participation.hpp"
#include "fedstale/rng.hpp"
#include "fedstale/theory.hpp"

namespace fedstale {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

BoundInputs inputs() {
  BoundInputs in;
  in.L = 1.0;
  in.sigma_sq = 2.0;
  in.sg_sq = 3.0;
  in.stats = stats(make_two_group_profile(10, 0.2, 5));
  in.n_clients = 10;
  in.K = 5;
  in.eta_c = 0.01;
  in.eta_s = 0.05;
  in.T = 1000;
  in.beta = 0.5;
  in.F_init_gap = 4.0;
  in.H_init = 1.5;
  return in;
}

TEST(LrConstraints, ClientThreshold) {
  BoundInputs in = inputs();
  EXPECT_DOUBLE_EQ(check_lr_constraints(in).client_lr_max, 0.025);
  in.eta_c = 0.026;
  const auto c = check_lr_constraints(in);
  EXPECT_FALSE(c.ok);
  ASSERT_EQ(c.violated.size(), 1u);
  EXPECT_EQ(c.violated[0], LrConstraint::kClientLr);
}

TEST(LrConstraints, BetaEndpointsMakeOneTermVacuous) {
  BoundInputs in = inputs();
  in.beta = 0.0;
  auto c = check_lr_constraints(in);
  EXPECT_EQ(c.server_lr_max_stale, kInf);
  EXPECT_DOUBLE_EQ(c.server_lr_max(), 10 * in.stats.p_var / 12.0);
  in.beta = 1.0;
  c = check_lr_constraints(in);
  EXPECT_EQ(c.server_lr_max_fresh, kInf);
  EXPECT_DOUBLE_EQ(c.server_lr_max(),
                   in.stats.p_var * in.stats.p_min / (3.0 * in.stats.p_avg));
}

TEST(LrConstraints, FullParticipationNeverLimitsServerRate) {
  BoundInputs in = inputs();
  in.stats = stats(ParticipationProfile({1, 1, 1}));
  in.eta_s = 1e9;
  for (double beta : {0.0, 0.5, 1.0}) {
    in.beta = beta;
    EXPECT_TRUE(check_lr_constraints(in).ok);
  }
}

TEST(Bound, ThrowsUnlessOverridden) {
  BoundInputs in = inputs();
  in.eta_s = 100.0;
  EXPECT_THROW(theorem1_bound(in), std::domain_error);
  const auto b = theorem1_bound(in, true);
  EXPECT_TRUE(b.constraints_overridden);
}

TEST(Bound, TermsAreNonnegativeAndSum) {
  for (double beta : {0.0, 0.3, 1.0}) {
    BoundInputs in = inputs();
    in.beta = beta;
    const auto b = theorem1_bound(in);
    EXPECT_GE(b.iterate_init_term, 0.0);
    EXPECT_GE(b.memory_init_term, 0.0);
    EXPECT_GE(b.stochastic_term, 0.0);
    EXPECT_GE(b.heterogeneity_term, 0.0);
    EXPECT_DOUBLE_EQ(b.total, b.iterate_init_term + b.memory_init_term + b.stochastic_term +
                                  b.heterogeneity_term);
  }
}

TEST(Bound, BetaZeroDropsMemoryTerm) {
  BoundInputs in = inputs();
  in.beta = 0.0;
  const auto b = theorem1_bound(in);
  EXPECT_EQ(b.memory_init_term, 0.0);
  // Only the 1/N parts remain in the stochastic and heterogeneity terms.
  const double rate = in.eta_s * in.eta_c;
  const double inv_pvar = 1.0 / in.stats.p_var;
  EXPECT_NEAR(b.stochastic_term, rate * in.L * in.sigma_sq * inv_pvar / 10.0, 1e-15);
  EXPECT_NEAR(b.heterogeneity_term, rate * in.L * 5 * in.sg_sq * inv_pvar / 10.0, 1e-15);
}

TEST(Bound, BetaOneDropsFreshHeterogeneity) {
  BoundInputs in = inputs();
  in.beta = 1.0;
  in.eta_s = 0.01;
  const auto b = theorem1_bound(in);
  const double r = in.stats.p_avg / in.stats.p_min;
  const double c = in.eta_c * in.eta_c * in.L * in.L * 5 * 4 * r;
  const double rate = in.eta_s * in.eta_c;
  EXPECT_NEAR(b.heterogeneity_term, c * rate * in.L * 5 * in.sg_sq / in.stats.p_var, 1e-18);
}

TEST(Bound, DoublingHorizonHalvesInitTerms) {
  BoundInputs in = inputs();
  const auto a = theorem1_bound(in);
  in.T *= 2;
  const auto b = theorem1_bound(in);
  EXPECT_DOUBLE_EQ(b.iterate_init_term, a.iterate_init_term / 2);
  EXPECT_DOUBLE_EQ(b.memory_init_term, a.memory_init_term / 2);
  EXPECT_EQ(b.stochastic_term, a.stochastic_term);
  EXPECT_EQ(b.heterogeneity_term, a.heterogeneity_term);
}

TEST(BetaStar, Examples) {
  BoundInputs in = inputs();
  in.sg_sq = 0.0;
  EXPECT_EQ(beta_star(in), 0.0);
  in = inputs();
  in.sigma_sq = 0.0;
  in.K = 1;
  EXPECT_DOUBLE_EQ(beta_star(in), 1.0);
  in.sg_sq = 0.0;
  EXPECT_THROW(beta_star(in), std::domain_error);
}

TEST(BetaStar, DecreasesWithParticipationHeterogeneity) {
  BoundInputs in = inputs();
  double prev = 2.0;
  for (double ratio : {1.0, 2.0, 5.0, 20.0, 100.0}) {
    in.stats = stats(make_two_group_profile(10, group2_prob_for_ratio(10, 5, ratio), 5));
    const double b = beta_star(in);
    EXPECT_LT(b, prev);
    prev = b;
  }
}

TEST(BetaStar, MinimizesTheBound) {
  CounterRng rng(21, {0});
  for (int trial = 0; trial < 200; ++trial) {
    BoundInputs in = inputs();
    in.sigma_sq = 5.0 * rng.uniform();
    in.sg_sq = 0.01 + 5.0 * rng.uniform();
    in.K = 1 + rng.below(10);
    in.n_clients = 2 + rng.below(30);
    in.eta_c = 0.5 / (8.0 * in.L * in.K);
    in.stats = stats(make_two_group_profile(in.n_clients, 0.02 + 0.9 * rng.uniform(),
                                            1 + rng.below(in.n_clients - 1)));
    in.H_init = 0.0;
    double best = kInf, arg = 0.0;
    for (int k = 0; k <= 1000; ++k) {
      in.beta = k / 1000.0;
      const double v = theorem1_bound(in, true).total;
      if (v < best) {
        best = v;
        arg = in.beta;
      }
    }
    EXPECT_NEAR(arg, beta_star(in), 0.05);
  }
}

TEST(LowerBoundCurve, Examples) {
  EXPECT_DOUBLE_EQ(lower_bound_curve(0.3, 0, 2.0, 5.0), 3.0 * 5.0 * 2.0 / (2.0 * 81.0));
  double prev = kInf;
  for (int t = 0; t < 200; ++t) {
    const double v = lower_bound_curve(0.2, t, 1.0, 1.0);
    EXPECT_LE(v, prev);
    prev = v;
    EXPECT_GT(lower_bound_curve(0.1, t + 1, 1.0, 1.0), lower_bound_curve(0.2, t + 1, 1.0, 1.0));
  }
  EXPECT_THROW(lower_bound_curve(0.0, 1, 1, 1), std::invalid_argument);
}

TEST(HardInstance, OriginValues) {
  const HardInstance inst(21, 10, 2.0, 4);
  const ParamVector zero = ParamVector::Zero(21);
  EXPECT_EQ(inst.global_loss(zero), 0.0);
  ParamVector expect = ParamVector::Zero(21);
  expect(0) = -2.0 / 4.0;
  EXPECT_LT((inst.global_gradient(zero) - expect).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(*inst.exact_smoothness(), 4 * 2.0 / 2.0);
}

TEST(HardInstance, InactiveClientsAreZero) {
  const HardInstance inst(21, 10, 1.0, 5, 1, 3);
  CounterRng rng(3, {0});
  ParamVector w(21);
  for (auto& x : w) x = rng.normal();
  for (std::size_t i : {0u, 2u, 4u}) {
    EXPECT_EQ(inst.client_loss(i, w), 0.0);
    EXPECT_EQ(inst.client_gradient(i, w).squaredNorm(), 0.0);
  }
  EXPECT_NE(inst.client_loss(1, w), 0.0);
}

TEST(HardInstance, SplitIdentityAtRandomProbes) {
  const HardInstance inst(31, 15, 3.0, 6);
  for (std::uint64_t k = 0; k < 1000; ++k) {
    CounterRng rng(k, {7});
    ParamVector w(31);
    for (auto& x : w) x = 4.0 * rng.normal();
    const double f = inst.direct_loss(w);
    EXPECT_NEAR(inst.global_loss(w), f, 1e-10 * (1 + std::abs(f)));
    EXPECT_LT((inst.global_gradient(w) - inst.direct_gradient(w)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(HardInstance, MatrixStructure) {
  const HardInstance inst(12, 5, 1.0, 2);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 12; ++j) {
      const double a = inst.matrix_entry(i, j);
      double expect = 0.0;
      if (i < 11 && j < 11) {
        if (i == j) expect = 2.0;
        else if (i + 1 == j || j + 1 == i) expect = -1.0;
      }
      EXPECT_EQ(a, expect) << i << "," << j;
    }
  }
}

TEST(HardInstance, OptimalValueMatchesSolve) {
  const std::size_t t = 8;
  const HardInstance inst(2 * t + 1, t, 2.0, 2);
  Eigen::MatrixXd A(2 * t + 1, 2 * t + 1);
  for (std::size_t i = 0; i < 2 * t + 1; ++i)
    for (std::size_t j = 0; j < 2 * t + 1; ++j) A(i, j) = inst.matrix_entry(i, j);
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(2 * t + 1);
  e1(0) = 1.0;
  const Eigen::VectorXd w = A.ldlt().solve(e1);
  EXPECT_NEAR(inst.direct_loss(w), *inst.optimal_value(), 1e-12);
  EXPECT_NEAR(hard_instance_gap(inst), -*inst.optimal_value(), 1e-15);
}

TEST(HardInstance, GradientSupportStaysBehindFrontier) {
  const HardInstance inst(21, 10, 1.0, 2);
  for (std::size_t k = 1; k < 10; ++k) {
    ParamVector w = ParamVector::Zero(21);
    for (std::size_t i = 0; i < k; ++i) w(static_cast<Eigen::Index>(i)) = 1.0 + i;
    const ParamVector g = inst.global_gradient(w);
    for (std::size_t i = k + 1; i < 21; ++i) EXPECT_EQ(g(static_cast<Eigen::Index>(i)), 0.0);
  }
}

TEST(HardInstance, RejectsBadShapes) {
  EXPECT_THROW(HardInstance(20, 10, 1.0, 2), std::invalid_argument);
  EXPECT_THROW(HardInstance(21, 10, 1.0, 1), std::invalid_argument);
  EXPECT_THROW(HardInstance(21, 10, 1.0, 3, 1, 1), std::invalid_argument);
  EXPECT_THROW(HardInstance(21, 10, -1.0, 2), std::invalid_argument);
}

TEST(Frontier, ExampleAndNeverPresent) {
  const auto f = track_frontier(deterministic_schedule(4, 11), 1000);
  const std::vector<std::size_t> expect{1, 2, 3, 3, 3, 4, 5, 5, 5, 6, 7};
  for (std::size_t t = 0; t < expect.size(); ++t) EXPECT_EQ(f[t].k, expect[t]) << t;
  std::vector<FrontierStep> alone(100, FrontierStep{true, false});
  for (const auto& c : track_frontier(alone, 1000)) EXPECT_LE(c.k, 1u);
}

TEST(Frontier, IncrementRuleAndBoundForLongPeriods) {
  for (std::size_t tau = 2; tau <= 10; ++tau) {
    const auto f = track_frontier(deterministic_schedule(tau, 300), 10000);
    // After round t the frontier is 1 plus the rounds s < t with s mod tau in {0, 1}.
    std::size_t k = 1;
    for (std::size_t t = 0; t < f.size(); ++t) {
      if (t > 0) k += ((t - 1) % tau == 0 || (t - 1) % tau == 1) ? 1 : 0;
      EXPECT_EQ(f[t].k, k);
      EXPECT_EQ(static_cast<long long>(k), frontier_bound(static_cast<long long>(t),
                                                         static_cast<long long>(tau)));
    }
  }
}

TEST(Frontier, InstanceOverloadUsesItsClients) {
  const HardInstance inst(11, 5, 1.0, 3, 2, 0);
  std::vector<RoundParticipation> sched;
  for (std::size_t t = 1; t <= 20; ++t) sched.push_back({t, {true, false, true}});
  const auto f = track_frontier(inst, sched);
  EXPECT_EQ(f.back().k, 11u);
  EXPECT_EQ(f[0].k, 1u);
  sched[0].present = {false, true, false};
  EXPECT_EQ(track_frontier(inst, sched)[0].k, 0u);
}

TEST(GradientFloor, ClosedFormValues) {
  const HardInstance inst(41, 20, 1.0, 2);
  EXPECT_DOUBLE_EQ(frontier_gradient_floor(inst, 1).value, 0.0625);
  double prev = kInf;
  for (std::size_t k = 1; k <= 20; ++k) {
    const auto fl = frontier_gradient_floor(inst, k);
    EXPECT_LT(fl.value, prev);
    prev = fl.value;
    ParamVector w = ParamVector::Zero(41);
    w.head(static_cast<Eigen::Index>(k - 1)) = fl.minimizer;
    EXPECT_NEAR(inst.global_gradient(w).squaredNorm(), fl.value, 1e-14);
  }
  EXPECT_THROW(frontier_gradient_floor(inst, 0), std::invalid_argument);
  EXPECT_THROW(frontier_gradient_floor(inst, 21), std::invalid_argument);
}

}  // namespace
}  // namespace fedstale
