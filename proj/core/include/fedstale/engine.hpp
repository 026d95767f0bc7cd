#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fedstale/aggregation.hpp"
#include "fedstale/local_solver.hpp"
#include "fedstale/objective.hpp"
#include "fedstale/participation.hpp"

namespace fedstale {

struct TrainConfig {
  std::size_t rounds = 100;  // T
  double server_lr = 1.0;    // eta_s
  LocalConfig local;
  AggregatorConfig aggregator;
  ParticipationProfile profile;
  std::uint64_t master_seed = 0;
  /// Key for participation draws. Defaults to master_seed.
  std::optional<std::uint64_t> participation_seed;
  /// w^(1); empty means the origin.
  ParamVector init_point;
  /// Worker threads for per-client local solves (results never depend on it).
  std::size_t threads = 1;
  /// W_max for estimated weights; 0 selects default_weight_cap(rounds).
  double weight_cap = 0.0;
  /// Fill RoundRecord::wall_ns. Off by default so metrics are reproducible.
  bool record_timing = false;
  /// Keep w^(1) .. w^(T+1) in RunResult::trajectory.
  bool record_trajectory = false;
  /// Evaluate loss, gradient norm and H every round. When off only the last
  /// round is evaluated and earlier records carry NaN metrics.
  bool record_metrics = true;

  void validate(const Objective& obj) const;
  std::uint64_t effective_participation_seed() const {
    return participation_seed.value_or(master_seed);
  }
};

/// Metrics at the end of a round: evaluated at w^(t+1) against the refreshed
/// memory bank h^(t+1).
struct RoundRecord {
  std::size_t round = 0;
  double global_loss = 0.0;
  double grad_norm_sq = 0.0;
  double memory_error_H = 0.0;
  std::vector<std::size_t> participants;
  double update_norm = 0.0;
  std::int64_t wall_ns = 0;
  /// Biased FedAvg saw no participants and applied a zero update.
  bool skipped = false;
};

struct RunResult {
  std::vector<RoundRecord> records;
  ParamVector final_w;
  double initial_loss = 0.0;
  double initial_grad_norm_sq = 0.0;
  double min_grad_norm_sq = 0.0;
  std::optional<double> test_accuracy;
  /// p_hat_i after the last round (estimator mode only).
  std::vector<double> estimated_probs;
  std::vector<ParamVector> trajectory;
};

/// Runs the round loop: participation -> local training -> aggregation ->
/// server step -> memory refresh -> metrics. `source` overrides Bernoulli
/// sampling (replay mode). Bit-deterministic for a fixed config.
RunResult run(const TrainConfig& cfg, const Objective& obj,
              const ParticipationSource* source = nullptr);

/// Per-round mean and standard error across runs.
struct CurveSummary {
  std::vector<double> mean;
  std::vector<double> stderr_;
};

struct RepeatedResult {
  std::vector<std::uint64_t> seeds;
  std::vector<RunResult> runs;
  CurveSummary loss;
  CurveSummary grad_norm_sq;
};

/// Participation seed for one repetition. In comparability mode every rule
/// sees the same realization for a given seed; otherwise the rule and beta
/// are mixed into the key.
std::uint64_t participation_seed_for(std::uint64_t seed,
                                     const AggregatorConfig& aggregator,
                                     bool comparability);

RepeatedResult run_repeated(const TrainConfig& cfg, const Objective& obj,
                            std::span<const std::uint64_t> seeds,
                            bool comparability = true);

CurveSummary summarize(std::span<const std::vector<double>> curves);

/// Builds the objective for one grid cell from its swap fraction and the
/// cell's participation profile (whose groups mark the swapped clients).
using ObjectiveFactory = std::function<std::shared_ptr<const Objective>(
    double swap_fraction, const ParticipationProfile& profile)>;

enum class GridMetric { kHeldoutAccuracy, kFinalLoss };

struct GridOptions {
  std::vector<double> ratios{1, 3, 10, 50};
  std::vector<double> swap_fractions{0.0, 0.33, 0.66, 1.0};
  std::vector<double> betas{0.0, 0.2, 0.5, 0.8, 1.0};
  /// Client learning rates tried for every (cell, beta); the best is kept.
  std::vector<double> client_lrs{0.01};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t n_clients = 24;
  std::size_t group2_size = 12;
  std::uint64_t profile_seed = 0;
  /// Rounds as ceil(rare_participations / p_min); 0 keeps base.rounds.
  double rare_participations = 10.0;
  GridMetric metric = GridMetric::kHeldoutAccuracy;
  /// Threads across independent runs (each run is single-threaded inside).
  std::size_t threads = 1;
  bool comparability = true;
};

struct GridRow {
  double ratio = 0.0;
  double swap_fraction = 0.0;
  double beta = 0.0;
  double p_min = 1.0;
  std::size_t rounds = 0;
  double metric_mean = 0.0;
  double metric_stderr = 0.0;
  double best_client_lr = 0.0;
  bool beta_opt = false;
};

struct GridResult {
  std::vector<GridRow> rows;
  /// beta_opt per (ratio, swap) cell, ratio-major.
  std::vector<double> beta_opt;
  GridMetric metric = GridMetric::kHeldoutAccuracy;

  double beta_opt_at(std::size_t ratio_index, std::size_t swap_index,
                     std::size_t swap_count) const {
    return beta_opt.at(ratio_index * swap_count + swap_index);
  }
};

/// Relative tolerance under which two grid metrics count as tied.
inline constexpr double kBetaTieRelTol = 1e-9;

/// Index of the best metric value; ties (within kBetaTieRelTol) go to the
/// smaller beta.
std::size_t select_beta_opt(std::span<const double> betas,
                            std::span<const double> metric_means,
                            GridMetric metric);

GridResult run_grid(const TrainConfig& base, const ObjectiveFactory& factory,
                    const GridOptions& options);

/// round,loss,grad_norm_sq,H,participants,update_norm,wall_ns
void write_metrics_csv(const RunResult& result,
                       const std::filesystem::path& path);
/// round,loss_mean,loss_stderr,grad_norm_sq_mean,grad_norm_sq_stderr
void write_curves_csv(const RepeatedResult& result,
                      const std::filesystem::path& path);
/// ratio,swap_fraction,beta,metric_mean,metric_stderr,beta_opt_flag
void write_grid_csv(const GridResult& result, const std::filesystem::path& path);

/// Participation trace of a finished run (round,client_id,present).
std::vector<RoundParticipation> participation_trace(const RunResult& result,
                                                    std::size_t n_clients);

}  // namespace fedstale
