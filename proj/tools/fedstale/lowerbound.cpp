#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "fedstale/commands.hpp"
#include "fedstale/rng.hpp"
#include "fedstale/statistics.hpp"
#include "fedstale/theory.hpp"
#include "fedstale/thread_pool.hpp"

namespace fedstale::cli {

std::vector<FrontierRow> frontier_table(const std::vector<std::size_t>& taus,
                                        std::size_t max_t) {
  std::vector<FrontierRow> rows;
  for (std::size_t tau : taus) {
    const auto schedule = deterministic_schedule(tau, max_t + 1);
    const auto frontier = track_frontier(schedule, std::numeric_limits<std::size_t>::max());
    for (const auto& f : frontier) {
      FrontierRow row;
      row.tau = tau;
      row.t = f.round;
      row.k = f.k;
      row.bound = frontier_bound(static_cast<long long>(f.round), static_cast<long long>(tau));
      row.violation = static_cast<long long>(f.k) != row.bound;
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<ExpectationRow> expectation_table(const std::vector<double>& p_mins,
                                              const std::vector<std::size_t>& eval_rounds,
                                              std::size_t schedules, std::size_t max_k,
                                              std::uint64_t seed) {
  std::vector<ExpectationRow> rows;
  if (eval_rounds.empty()) return rows;
  const std::size_t horizon = *std::max_element(eval_rounds.begin(), eval_rounds.end()) + 1;
  for (double p : p_mins) {
    std::vector<std::vector<double>> k_at(eval_rounds.size());
    std::vector<FrontierStep> steps(horizon);
    for (std::size_t s = 0; s < schedules; ++s) {
      CounterRng rng(seed, StreamTag::kParticipation, {s, std::bit_cast<std::uint64_t>(p)});
      for (auto& step : steps) {
        step.first_active = true;
        step.second_active = rng.uniform() < p;
      }
      const auto frontier = track_frontier(steps, max_k);
      for (std::size_t e = 0; e < eval_rounds.size(); ++e) {
        k_at[e].push_back(static_cast<double>(frontier[eval_rounds[e]].k));
      }
    }
    for (std::size_t e = 0; e < eval_rounds.size(); ++e) {
      ExpectationRow row;
      row.p_min = p;
      row.t = eval_rounds[e];
      row.mean_k = mean(k_at[e]);
      row.stderr_k = standard_error(k_at[e]);
      row.bound = 3.0 + 2.0 * p * static_cast<double>(row.t);
      row.ok = row.mean_k - 3.0 * row.stderr_k <= row.bound;
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<DominanceRow> dominance_table(const HardInstance& instance,
                                          const TrainConfig& base,
                                          const std::vector<double>& betas,
                                          std::size_t seeds, std::size_t threads) {
  const std::size_t T = base.rounds;
  const double p_min = stats(base.profile).p_min;
  const double gap = hard_instance_gap(instance);
  // grad[b][s][t] = ||grad F(w^(t+1))||^2 for beta b and seed s.
  std::vector<std::vector<std::vector<double>>> grad(
      betas.size(), std::vector<std::vector<double>>(seeds));
  ThreadPool pool(threads);
  pool.parallel_for(betas.size() * seeds, [&](std::size_t job) {
    const std::size_t b = job / seeds;
    const std::size_t s = job % seeds;
    TrainConfig cfg = base;
    cfg.threads = 1;
    cfg.aggregator.rule = AggregationRule::kFedStale;
    cfg.aggregator.beta = betas[b];
    cfg.master_seed = s;
    cfg.participation_seed = s;
    const RunResult r = run(cfg, instance);
    auto& g = grad[b][s];
    g.push_back(r.initial_grad_norm_sq);
    for (const auto& rec : r.records) g.push_back(rec.grad_norm_sq);
  });

  std::vector<DominanceRow> rows;
  for (std::size_t b = 0; b < betas.size(); ++b) {
    double running_min = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t <= T; ++t) {
      double sum = 0.0;
      for (std::size_t s = 0; s < seeds; ++s) sum += grad[b][s][t];
      running_min = std::min(running_min, sum / static_cast<double>(seeds));
      DominanceRow row;
      row.beta = betas[b];
      row.t = t;
      row.min_mean_grad_norm_sq = running_min;
      row.envelope = lower_bound_curve(p_min, static_cast<double>(t), gap, instance.L());
      row.ok = row.min_mean_grad_norm_sq >= row.envelope;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace fedstale::cli
