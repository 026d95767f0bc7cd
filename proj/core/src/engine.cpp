#include "fedstale/engine.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fedstale/csv.hpp"
#include "fedstale/errors.hpp"
#include "fedstale/rng.hpp"
#include "fedstale/statistics.hpp"
#include "fedstale/thread_pool.hpp"

namespace fedstale {

void TrainConfig::validate(const Objective& obj) const {
  if (rounds == 0) throw std::invalid_argument("rounds must be >= 1");
  if (!(server_lr > 0.0) || !std::isfinite(server_lr)) {
    throw std::invalid_argument("server_lr must be finite and positive");
  }
  local.validate();
  aggregator.validate();
  if (profile.client_count() != obj.client_count()) {
    throw std::invalid_argument("participation profile has " +
                                std::to_string(profile.client_count()) +
                                " clients but the objective has " +
                                std::to_string(obj.client_count()));
  }
  if (init_point.size() != 0) {
    require_dimension(init_point, obj.dimension(), "init_point");
    require_finite(init_point, "init_point");
  }
  if (weight_cap != 0.0 && !(weight_cap >= 1.0)) {
    throw std::invalid_argument("weight_cap must be 0 (default) or >= 1");
  }
}

RunResult run(const TrainConfig& cfg, const Objective& obj,
              const ParticipationSource* source) {
  cfg.validate(obj);
  const std::size_t n = obj.client_count();
  const std::size_t d = obj.dimension();
  if (source && source->client_count() != n) {
    throw std::invalid_argument("participation source does not match the objective");
  }

  ParamVector w = cfg.init_point.size() != 0
                      ? cfg.init_point
                      : ParamVector::Zero(static_cast<Eigen::Index>(d));
  MemoryBank bank(n, d);
  const std::uint64_t pseed = cfg.effective_participation_seed();
  const bool estimate = cfg.aggregator.weights == WeightSource::kEstimator;
  ProbabilityEstimator estimator(
      n, cfg.weight_cap > 0.0 ? cfg.weight_cap : default_weight_cap(cfg.rounds));
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) weights[i] = 1.0 / cfg.profile.prob(i);

  ThreadPool pool(std::min(cfg.threads, std::max<std::size_t>(n, 1)));

  RunResult result;
  result.records.reserve(cfg.rounds);
  result.initial_loss = obj.global_loss(w);
  result.initial_grad_norm_sq = obj.global_gradient(w).squaredNorm();
  if (cfg.record_trajectory) {
    result.trajectory.reserve(cfg.rounds + 1);
    result.trajectory.push_back(w);
  }

  std::vector<ClientUpdate> updates;
  for (std::size_t round = 1; round <= cfg.rounds; ++round) {
    const auto start = std::chrono::steady_clock::now();
    const RoundParticipation rp =
        source ? source->at(round) : sample_round(cfg.profile, round, pseed);
    if (rp.present.size() != n) throw std::invalid_argument("participation size mismatch");
    if (estimate) {
      estimator.update(RoundParticipation{estimator.rounds_seen() + 1, rp.present});
      for (std::size_t i = 0; i < n; ++i) weights[i] = estimator.weight(i);
    }

    const std::vector<std::size_t> present = rp.participants();
    updates.assign(present.size(), ClientUpdate{});
    pool.parallel_for(present.size(), [&](std::size_t k) {
      const std::size_t client = present[k];
      CounterRng rng(cfg.master_seed, StreamTag::kLocalTraining, {client, round});
      LocalTrainOptions opts;
      opts.round = round;
      updates[k] = local_train(obj, client, w, cfg.local, rng, opts);
    });

    RoundRecord rec;
    rec.round = round;
    rec.participants = present;
    GlobalUpdate g;
    try {
      g = aggregate(cfg.aggregator, updates, bank, weights, n);
    } catch (const NoParticipantsError&) {
      g.round = round;
      g.delta = ParamVector::Zero(static_cast<Eigen::Index>(d));
      rec.skipped = true;
    }
    w -= cfg.server_lr * g.delta;
    if (!w.allFinite()) {
      throw DivergenceError(kGlobal, round, 0,
                            "global model left the finite range in round " +
                                std::to_string(round));
    }
    bank.refresh(updates, round);

    rec.update_norm = g.delta.norm();
    if (cfg.record_metrics || round == cfg.rounds) {
      rec.global_loss = obj.global_loss(w);
      rec.grad_norm_sq = obj.global_gradient(w).squaredNorm();
      rec.memory_error_H = memory_error(bank, obj, w);
      if (!std::isfinite(rec.global_loss)) {
        throw DivergenceError(kGlobal, round, 0,
                              "global loss is not finite after round " +
                                  std::to_string(round));
      }
    } else {
      rec.global_loss = rec.grad_norm_sq = rec.memory_error_H =
          std::numeric_limits<double>::quiet_NaN();
    }
    if (cfg.record_timing) {
      rec.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    }
    if (cfg.record_trajectory) result.trajectory.push_back(w);
    result.records.push_back(std::move(rec));
  }

  result.final_w = w;
  result.min_grad_norm_sq = std::numeric_limits<double>::infinity();
  for (const auto& r : result.records) {
    if (!std::isnan(r.grad_norm_sq)) {
      result.min_grad_norm_sq = std::min(result.min_grad_norm_sq, r.grad_norm_sq);
    }
  }
  result.test_accuracy = obj.heldout_accuracy(w);
  if (estimate) {
    result.estimated_probs.resize(n);
    for (std::size_t i = 0; i < n; ++i) result.estimated_probs[i] = estimator.estimate(i);
  }
  return result;
}

std::uint64_t participation_seed_for(std::uint64_t seed, const AggregatorConfig& aggregator,
                                     bool comparability) {
  if (comparability) return seed;
  return derive_key(seed, {static_cast<std::uint64_t>(aggregator.rule),
                           std::bit_cast<std::uint64_t>(aggregator.effective_beta())});
}

CurveSummary summarize(std::span<const std::vector<double>> curves) {
  CurveSummary out;
  if (curves.empty()) return out;
  const std::size_t len = curves.front().size();
  for (const auto& c : curves) {
    if (c.size() != len) throw std::invalid_argument("curves have different lengths");
  }
  out.mean.resize(len);
  out.stderr_.resize(len);
  std::vector<double> column(curves.size());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t s = 0; s < curves.size(); ++s) column[s] = curves[s][t];
    out.mean[t] = mean(column);
    out.stderr_[t] = standard_error(column);
  }
  return out;
}

namespace {

RepeatedResult summarize_runs(std::vector<std::uint64_t> seeds, std::vector<RunResult> runs) {
  RepeatedResult out;
  out.seeds = std::move(seeds);
  out.runs = std::move(runs);
  std::vector<std::vector<double>> loss, grad;
  for (const auto& r : out.runs) {
    auto& l = loss.emplace_back();
    auto& g = grad.emplace_back();
    for (const auto& rec : r.records) {
      l.push_back(rec.global_loss);
      g.push_back(rec.grad_norm_sq);
    }
  }
  out.loss = summarize(loss);
  out.grad_norm_sq = summarize(grad);
  return out;
}

TrainConfig config_for_seed(const TrainConfig& cfg, std::uint64_t seed, bool comparability) {
  TrainConfig c = cfg;
  c.master_seed = seed;
  c.participation_seed = participation_seed_for(seed, cfg.aggregator, comparability);
  return c;
}

}  // namespace

RepeatedResult run_repeated(const TrainConfig& cfg, const Objective& obj,
                            std::span<const std::uint64_t> seeds, bool comparability) {
  if (seeds.empty()) throw std::invalid_argument("run_repeated needs at least one seed");
  std::vector<RunResult> runs;
  runs.reserve(seeds.size());
  for (std::uint64_t seed : seeds) {
    runs.push_back(run(config_for_seed(cfg, seed, comparability), obj));
  }
  return summarize_runs({seeds.begin(), seeds.end()}, std::move(runs));
}

namespace {

bool better(double a, double b, GridMetric metric) {
  if (std::isnan(a)) return false;
  if (std::isnan(b)) return true;
  return metric == GridMetric::kHeldoutAccuracy ? a > b : a < b;
}

}  // namespace

std::size_t select_beta_opt(std::span<const double> betas,
                            std::span<const double> metric_means, GridMetric metric) {
  if (betas.empty() || betas.size() != metric_means.size()) {
    throw std::invalid_argument("select_beta_opt needs matching nonempty inputs");
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < betas.size(); ++k) {
    if (better(metric_means[k], metric_means[best], metric)) best = k;
  }
  if (std::isnan(metric_means[best])) {
    return static_cast<std::size_t>(std::min_element(betas.begin(), betas.end()) - betas.begin());
  }
  // Rules that coincide mathematically (e.g. full participation) differ only
  // by rounding, so near-equal means count as ties.
  const double top = metric_means[best];
  const double tol = kBetaTieRelTol * std::max(1.0, std::abs(top));
  for (std::size_t k = 0; k < betas.size(); ++k) {
    if (std::abs(metric_means[k] - top) <= tol && betas[k] < betas[best]) best = k;
  }
  return best;
}

GridResult run_grid(const TrainConfig& base, const ObjectiveFactory& factory,
                    const GridOptions& o) {
  if (o.ratios.empty() || o.swap_fractions.empty() || o.betas.empty() ||
      o.client_lrs.empty() || o.seeds.empty()) {
    throw std::invalid_argument("grid axes must be nonempty");
  }
  std::vector<double> betas = o.betas;
  std::sort(betas.begin(), betas.end());
  betas.erase(std::unique(betas.begin(), betas.end()), betas.end());

  struct Cell {
    double ratio;
    double swap;
    ParticipationProfile profile;
    std::size_t rounds;
    std::shared_ptr<const Objective> obj;
  };
  std::vector<Cell> cells;
  for (double ratio : o.ratios) {
    const double p = group2_prob_for_ratio(o.n_clients, o.group2_size, ratio);
    auto profile = make_two_group_profile(o.n_clients, p, o.group2_size, o.profile_seed);
    const double p_min = stats(profile).p_min;
    const std::size_t rounds =
        o.rare_participations > 0.0
            ? static_cast<std::size_t>(std::ceil(o.rare_participations / p_min - 1e-9))
            : base.rounds;
    for (double swap : o.swap_fractions) {
      cells.push_back({ratio, swap, profile, std::max<std::size_t>(rounds, 1),
                       factory(swap, profile)});
    }
  }

  const std::size_t nb = betas.size(), nl = o.client_lrs.size(), ns = o.seeds.size();
  const std::size_t total = cells.size() * nb * nl * ns;
  std::vector<double> metric(total, std::numeric_limits<double>::quiet_NaN());
  ThreadPool pool(o.threads);
  pool.parallel_for(total, [&](std::size_t job) {
    const std::size_t s = job % ns;
    const std::size_t l = (job / ns) % nl;
    const std::size_t b = (job / (ns * nl)) % nb;
    const Cell& cell = cells[job / (ns * nl * nb)];
    TrainConfig cfg = base;
    cfg.rounds = cell.rounds;
    cfg.profile = cell.profile;
    cfg.threads = 1;
    cfg.record_trajectory = false;
    cfg.record_metrics = false;
    cfg.aggregator.rule = AggregationRule::kFedStale;
    cfg.aggregator.beta = betas[b];
    cfg.local.client_lr = o.client_lrs[l];
    cfg = config_for_seed(cfg, o.seeds[s], o.comparability);
    try {
      const RunResult r = run(cfg, *cell.obj);
      if (o.metric == GridMetric::kHeldoutAccuracy) {
        metric[job] = r.test_accuracy.value_or(std::numeric_limits<double>::quiet_NaN());
      } else {
        metric[job] = r.records.back().global_loss;
      }
    } catch (const DivergenceError&) {
      // Left as NaN: a diverged learning rate never wins.
    }
  });

  GridResult out;
  out.metric = o.metric;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<GridRow> rows;
    std::vector<double> means;
    for (std::size_t b = 0; b < nb; ++b) {
      GridRow row;
      row.ratio = cells[c].ratio;
      row.swap_fraction = cells[c].swap;
      row.beta = betas[b];
      row.p_min = stats(cells[c].profile).p_min;
      row.rounds = cells[c].rounds;
      row.metric_mean = std::numeric_limits<double>::quiet_NaN();
      for (std::size_t l = 0; l < nl; ++l) {
        const std::size_t base_idx = ((c * nb + b) * nl + l) * ns;
        std::vector<double> vals(metric.begin() + static_cast<std::ptrdiff_t>(base_idx),
                                 metric.begin() + static_cast<std::ptrdiff_t>(base_idx + ns));
        const bool valid =
            std::none_of(vals.begin(), vals.end(), [](double v) { return std::isnan(v); });
        if (!valid) continue;
        const double m = mean(vals);
        if (better(m, row.metric_mean, o.metric)) {
          row.metric_mean = m;
          row.metric_stderr = standard_error(vals);
          row.best_client_lr = o.client_lrs[l];
        }
      }
      means.push_back(row.metric_mean);
      rows.push_back(row);
    }
    const std::size_t best = select_beta_opt(betas, means, o.metric);
    rows[best].beta_opt = true;
    out.beta_opt.push_back(betas[best]);
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  }
  return out;
}

void write_metrics_csv(const RunResult& result, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "round,loss,grad_norm_sq,H,participants,update_norm,wall_ns\n";
  for (const auto& r : result.records) {
    out << r.round << ',' << format_double(r.global_loss) << ','
        << format_double(r.grad_norm_sq) << ',' << format_double(r.memory_error_H) << ','
        << r.participants.size() << ',' << format_double(r.update_norm) << ','
        << r.wall_ns << '\n';
  }
  write_text_atomic(path, out.str());
}

void write_curves_csv(const RepeatedResult& result, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "round,loss_mean,loss_stderr,grad_norm_sq_mean,grad_norm_sq_stderr\n";
  for (std::size_t t = 0; t < result.loss.mean.size(); ++t) {
    out << t + 1 << ',' << format_double(result.loss.mean[t]) << ','
        << format_double(result.loss.stderr_[t]) << ','
        << format_double(result.grad_norm_sq.mean[t]) << ','
        << format_double(result.grad_norm_sq.stderr_[t]) << '\n';
  }
  write_text_atomic(path, out.str());
}

void write_grid_csv(const GridResult& result, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "ratio,swap_fraction,beta,metric_mean,metric_stderr,beta_opt_flag\n";
  for (const auto& r : result.rows) {
    out << format_double(r.ratio) << ',' << format_double(r.swap_fraction) << ','
        << format_double(r.beta) << ',' << format_double(r.metric_mean) << ','
        << format_double(r.metric_stderr) << ',' << (r.beta_opt ? 1 : 0) << '\n';
  }
  write_text_atomic(path, out.str());
}

std::vector<RoundParticipation> participation_trace(const RunResult& result,
                                                    std::size_t n_clients) {
  std::vector<RoundParticipation> out;
  out.reserve(result.records.size());
  for (const auto& r : result.records) {
    RoundParticipation rp;
    rp.round = r.round;
    rp.present.assign(n_clients, false);
    for (std::size_t i : r.participants) rp.present.at(i) = true;
    out.push_back(std::move(rp));
  }
  return out;
}

}  // namespace fedstale
