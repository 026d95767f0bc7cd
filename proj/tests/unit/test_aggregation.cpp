#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "fedstale/aggregation.hpp"
#include "fedstale/errors.hpp"
#include "fedstale/quadratic.hpp"
#include "fedstale/rng.hpp"
#include "test_support.hpp"

namespace fedstale {
namespace {

ParamVector vec2(double a, double b) {
  ParamVector v(2);
  v << a, b;
  return v;
}

ClientUpdate upd(std::size_t client, ParamVector delta) {
  ClientUpdate u;
  u.client = client;
  u.delta = std::move(delta);
  return u;
}

std::vector<double> inverse(const std::vector<double>& p) {
  std::vector<double> w;
  for (double x : p) w.push_back(1.0 / x);
  return w;
}

TEST(Rules, ParseAndPrint) {
  for (auto r : {AggregationRule::kFedAvgBiased, AggregationRule::kUFedAvg,
                 AggregationRule::kUFedVarp, AggregationRule::kFedStale}) {
    EXPECT_EQ(parse_rule(to_string(r)), r);
  }
  EXPECT_EQ(parse_rule("fedvarp"), AggregationRule::kUFedVarp);
  EXPECT_THROW(parse_rule("scaffold"), std::invalid_argument);
  EXPECT_EQ(parse_weight_source("estimator"), WeightSource::kEstimator);
  EXPECT_FALSE(is_unbiased(AggregationRule::kFedAvgBiased));
  EXPECT_TRUE(is_unbiased(AggregationRule::kFedStale));
}

TEST(FedAvgBiased, Examples) {
  const std::vector<ClientUpdate> one{upd(3, vec2(1, -2))};
  EXPECT_EQ(fedavg_biased(one, 2).delta, vec2(1, -2));
  const std::vector<ClientUpdate> two{upd(0, vec2(2, 0)), upd(1, vec2(0, 2))};
  EXPECT_EQ(fedavg_biased(two, 2).delta, vec2(1, 1));
  const std::vector<ClientUpdate> same{upd(0, vec2(.3, .7)), upd(1, vec2(.3, .7)),
                                       upd(2, vec2(.3, .7))};
  EXPECT_LT((fedavg_biased(same, 2).delta - vec2(.3, .7)).norm(), 1e-15);
  EXPECT_THROW(fedavg_biased({}, 2), NoParticipantsError);
}

TEST(UFedAvg, Examples) {
  const std::vector<ClientUpdate> s1{upd(0, vec2(1, 0))};
  const std::vector<double> w = inverse({0.5, 1.0});
  EXPECT_EQ(u_fedavg(s1, w, 2, 2).delta, vec2(1, 0));
  EXPECT_EQ(u_fedavg({}, w, 2, 2).delta, vec2(0, 0));
  // Uniform p = |S|/N with everyone present reduces to the plain mean.
  const std::vector<ClientUpdate> all{upd(0, vec2(2, 0)), upd(1, vec2(0, 4))};
  const std::vector<double> ones{1.0, 1.0};
  EXPECT_EQ(u_fedavg(all, ones, 2, 2).delta, fedavg_biased(all, 2).delta);
}

TEST(UFedAvg, RejectsBadWeights) {
  const std::vector<ClientUpdate> s{upd(1, vec2(1, 0))};
  const std::vector<double> short_w{1.0};
  EXPECT_THROW(u_fedavg(s, short_w, 2, 2), std::invalid_argument);
  const std::vector<double> bad{1.0, 0.5};
  EXPECT_THROW(u_fedavg(s, bad, 2, 2), std::invalid_argument);
}

TEST(FedStale, HandExample) {
  MemoryBank bank(2, 2);
  bank.refresh(std::vector<ClientUpdate>{upd(0, vec2(1, 1)), upd(1, vec2(1, 1))}, 1);
  const std::vector<ClientUpdate> s{upd(0, vec2(2, 0))};
  const std::vector<double> w = inverse({1.0, 0.5});
  const auto g = fedstale(s, bank, w, 2, 0.5);
  EXPECT_NEAR(g.delta(0), 1.25, 1e-15);
  EXPECT_NEAR(g.delta(1), 0.25, 1e-15);
  // Convex-combination form.
  const ParamVector mix = 0.5 * u_fedavg(s, w, 2, 2).delta + 0.5 * u_fedvarp(s, bank, w, 2).delta;
  EXPECT_LT((g.delta - mix).norm(), 1e-15);
  EXPECT_NEAR(g.stale_norm, vec2(0.5, 0.5).norm(), 1e-15);
  EXPECT_NEAR(g.fresh_norm, vec2(0.75, -0.25).norm(), 1e-15);
}

TEST(FedStale, EndpointsMatchNamedRules) {
  CounterRng rng(1, {0});
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5;
    MemoryBank bank(n, 3);
    std::vector<ClientUpdate> mem, s;
    for (std::size_t i = 0; i < n; ++i) {
      mem.push_back(upd(i, ParamVector::Random(3)));
      if (rng.uniform() < 0.6) s.push_back(upd(i, ParamVector::Random(3)));
    }
    bank.refresh(mem, 1);
    std::vector<double> w(n);
    for (auto& x : w) x = 1.0 + 9.0 * rng.uniform();
    EXPECT_EQ(fedstale(s, bank, w, n, 0.0).delta, u_fedavg(s, w, n, 3).delta);
    EXPECT_LT((fedstale(s, bank, w, n, 1.0).delta - u_fedvarp(s, bank, w, n).delta)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-14);
  }
  MemoryBank bank(1, 2);
  const std::vector<double> w{1.0};
  EXPECT_THROW(fedstale({}, bank, w, 1, 1.5), std::invalid_argument);
}

TEST(FedStale, DoesNotMutateBank) {
  MemoryBank bank(2, 2);
  bank.refresh(std::vector<ClientUpdate>{upd(1, vec2(3, 4))}, 2);
  const std::vector<double> w{1.0, 2.0};
  fedstale(std::vector<ClientUpdate>{upd(0, vec2(1, 1))}, bank, w, 2, 0.7);
  EXPECT_EQ(bank.slot(1), vec2(3, 4));
  EXPECT_EQ(bank.slot(0), vec2(0, 0));
  EXPECT_EQ(bank.last_refresh_round(1), 2u);
}

TEST(UFedVarp, Examples) {
  MemoryBank bank(2, 2);
  const std::vector<ClientUpdate> fresh{upd(0, vec2(1, 2)), upd(1, vec2(3, -1))};
  bank.refresh(fresh, 1);
  const std::vector<double> w{1.0, 1.0};
  // Memory equal to the fresh updates: corrections cancel.
  EXPECT_LT((u_fedvarp(fresh, bank, w, 2).delta - vec2(2, 0.5)).norm(), 1e-15);
  // Nobody present: pure replay.
  EXPECT_LT((u_fedvarp({}, bank, w, 2).delta - vec2(2, 0.5)).norm(), 1e-15);
}

TEST(Unbiasedness, EnumerationOverFourClients) {
  const std::size_t n = 4, d = 3;
  const std::vector<double> p{0.9, 0.35, 0.6, 0.15};
  const std::vector<double> w = inverse(p);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ClientUpdate> all, mem;
    for (std::size_t i = 0; i < n; ++i) {
      all.push_back(upd(i, ParamVector::Random(d)));
      mem.push_back(upd(i, ParamVector::Random(d)));
    }
    MemoryBank bank(n, d);
    bank.refresh(mem, 1);
    ParamVector target = ParamVector::Zero(d);
    for (const auto& u : all) target += u.delta / double(n);
    for (double beta : {0.0, 0.25, 0.9, 1.0}) {
      ParamVector e_avg = ParamVector::Zero(d), e_varp = e_avg, e_stale = e_avg;
      for (unsigned mask = 0; mask < 16; ++mask) {
        double prob = 1.0;
        std::vector<ClientUpdate> s;
        for (std::size_t i = 0; i < n; ++i) {
          const bool in = mask & (1u << i);
          prob *= in ? p[i] : 1 - p[i];
          if (in) s.push_back(all[i]);
        }
        e_avg += prob * u_fedavg(s, w, n, d).delta;
        e_varp += prob * u_fedvarp(s, bank, w, n).delta;
        e_stale += prob * fedstale(s, bank, w, n, beta).delta;
      }
      EXPECT_LT((e_avg - target).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((e_varp - target).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((e_stale - target).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Unbiasedness, BiasedFedAvgDeviates) {
  // Client 0 is always present and far from the others; conditioning on a
  // nonempty set over-weights it.
  const std::vector<double> p{1.0, 0.1};
  const std::vector<ClientUpdate> all{upd(0, vec2(1, 0)), upd(1, vec2(-1, 0))};
  ParamVector e = ParamVector::Zero(2);
  for (unsigned mask = 1; mask < 4; ++mask) {
    double prob = 1.0;
    std::vector<ClientUpdate> s;
    for (std::size_t i = 0; i < 2; ++i) {
      const bool in = mask & (1u << i);
      prob *= in ? p[i] : 1 - p[i];
      if (in) s.push_back(all[i]);
    }
    if (prob > 0) e += prob * fedavg_biased(s, 2).delta;
  }
  // 0.9 * (1, 0) + 0.1 * (0, 0) against the unbiased target (0, 0).
  EXPECT_NEAR(e(0), 0.9, 1e-15);
}

TEST(Aggregate, PermutationInvariant) {
  const std::size_t n = 6;
  MemoryBank bank(n, 4);
  std::vector<ClientUpdate> mem, s;
  for (std::size_t i = 0; i < n; ++i) {
    mem.push_back(upd(i, ParamVector::Random(4)));
    if (i % 2 == 0 || i == 5) s.push_back(upd(i, ParamVector::Random(4)));
  }
  bank.refresh(mem, 1);
  std::vector<double> w{1, 2, 3, 4, 5, 6};
  for (auto rule : {AggregationRule::kFedAvgBiased, AggregationRule::kUFedAvg,
                    AggregationRule::kUFedVarp, AggregationRule::kFedStale}) {
    AggregatorConfig cfg{rule, 0.4, WeightSource::kExactProbs};
    const ParamVector ref = aggregate(cfg, s, bank, w, n).delta;
    std::vector<ClientUpdate> shuffled = s;
    std::mt19937 gen(3);
    for (int k = 0; k < 10; ++k) {
      std::shuffle(shuffled.begin(), shuffled.end(), gen);
      EXPECT_EQ(aggregate(cfg, shuffled, bank, w, n).delta, ref);
    }
  }
}

TEST(Aggregate, DuplicateParticipantRejected) {
  MemoryBank bank(2, 2);
  const std::vector<double> w{1, 1};
  const std::vector<ClientUpdate> dup{upd(0, vec2(1, 0)), upd(0, vec2(0, 1))};
  AggregatorConfig cfg;
  EXPECT_THROW(aggregate(cfg, dup, bank, w, 2), std::invalid_argument);
}

TEST(MemoryBank, RefreshSemantics) {
  MemoryBank bank(3, 2);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(bank.slot(i), vec2(0, 0));
  bank.refresh(std::vector<ClientUpdate>{upd(1, vec2(5, 5))}, 1);
  for (std::size_t t = 2; t <= 101; ++t) {
    bank.refresh(std::vector<ClientUpdate>{upd(0, vec2(double(t), 0))}, t);
  }
  EXPECT_EQ(bank.slot(1), vec2(5, 5));
  EXPECT_EQ(bank.last_refresh_round(1), 1u);
  EXPECT_EQ(bank.slot(0), vec2(101, 0));
  EXPECT_EQ(bank.last_refresh_round(2), 0u);
  const MemoryBank before = bank;
  bank.refresh({}, 102);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(bank.slot(i), before.slot(i));
  EXPECT_THROW(bank.refresh(std::vector<ClientUpdate>{upd(0, vec2(1, 1)), upd(0, vec2(1, 1))}, 103),
               std::invalid_argument);
  EXPECT_THROW(bank.refresh(std::vector<ClientUpdate>{upd(0, ParamVector::Zero(3))}, 103),
               std::invalid_argument);
}

TEST(MemoryBank, ReplayMatchesIncrementalState) {
  CounterRng rng(12, {0});
  MemoryBank live(4, 3);
  std::vector<std::vector<ClientUpdate>> history;
  for (std::size_t t = 1; t <= 40; ++t) {
    std::vector<ClientUpdate> s;
    for (std::size_t i = 0; i < 4; ++i) {
      if (rng.uniform() < 0.3) s.push_back(upd(i, ParamVector::Random(3)));
    }
    live.refresh(s, t);
    history.push_back(s);
  }
  // Batch reconstruction: last update per client wins.
  MemoryBank rebuilt(4, 3);
  for (std::size_t t = 1; t <= history.size(); ++t) {
    rebuilt = refresh_memory(rebuilt, history[t - 1], t);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    ParamVector expect = ParamVector::Zero(3);
    std::size_t round = 0;
    for (std::size_t t = 1; t <= history.size(); ++t) {
      for (const auto& u : history[t - 1]) {
        if (u.client == i) {
          expect = u.delta;
          round = t;
        }
      }
    }
    EXPECT_EQ(live.slot(i), expect);
    EXPECT_EQ(live.last_refresh_round(i), round);
    EXPECT_EQ(rebuilt.slot(i), expect);
  }
}

TEST(MemoryBank, CsvRoundTrip) {
  testing::TempDir dir;
  MemoryBank bank(3, 2);
  bank.refresh(std::vector<ClientUpdate>{upd(0, vec2(0.1, -1.0 / 3.0)), upd(2, vec2(1e-300, 7))},
               5);
  bank.write_csv(dir / "bank.csv");
  const MemoryBank back = MemoryBank::read_csv(dir / "bank.csv");
  ASSERT_EQ(back.client_count(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.slot(i), bank.slot(i));
    EXPECT_EQ(back.last_refresh_round(i), bank.last_refresh_round(i));
  }
}

TEST(MemoryError, Examples) {
  const auto obj = QuadraticObjective::isotropic({vec2(1, 0), vec2(0, 2)});
  const ParamVector w = vec2(0, 0);
  MemoryBank bank(2, 2);
  // g_0 = (-1, 0), g_1 = (0, -2).
  EXPECT_DOUBLE_EQ(memory_error(bank, obj, w), (1.0 + 4.0) / 2.0);
  bank.refresh(std::vector<ClientUpdate>{upd(0, vec2(-1, 0)), upd(1, vec2(0, -2))}, 1);
  EXPECT_EQ(memory_error(bank, obj, w), 0.0);
  bank.refresh(std::vector<ClientUpdate>{upd(1, vec2(1, 1))}, 2);
  // ||(0,-2) - (1,1)||^2 = 1 + 9.
  EXPECT_DOUBLE_EQ(memory_error(bank, obj, w), 10.0 / 2.0);
}

}  // namespace
}  // namespace fedstale
