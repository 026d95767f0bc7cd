#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedstale/rng.hpp"
#include "fedstale/types.hpp"

namespace fedstale {

/// Finite-sum federated objective F(w) = (1/N) sum_i F_i(w).
///
/// Implementations are immutable after construction, so every oracle may be
/// called concurrently. Random state is always supplied by the caller.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::string_view kind() const = 0;
  virtual std::size_t client_count() const = 0;
  virtual std::size_t dimension() const = 0;

  virtual double client_loss(std::size_t client, const ParamVector& w) const = 0;
  virtual ParamVector client_gradient(std::size_t client,
                                      const ParamVector& w) const = 0;

  /// Unbiased estimate of client_gradient. The default is the exact gradient.
  virtual ParamVector client_stochastic_gradient(std::size_t client,
                                                 const ParamVector& w,
                                                 std::size_t batch_size,
                                                 CounterRng& rng) const;

  /// Number of local samples, or 0 when the oracle is not sample based.
  virtual std::size_t client_sample_count(std::size_t /*client*/) const {
    return 0;
  }

  /// Smoothness constant when it is known in closed form.
  virtual std::optional<double> exact_smoothness() const { return std::nullopt; }
  /// Stochastic-gradient variance when it is a configured constant.
  virtual std::optional<double> exact_noise_variance() const {
    return std::nullopt;
  }
  /// F* = min_w F(w) when known in closed form.
  virtual std::optional<double> optimal_value() const { return std::nullopt; }
  /// Held-out classification accuracy, for objectives that have a test split.
  virtual std::optional<double> heldout_accuracy(const ParamVector& /*w*/) const {
    return std::nullopt;
  }

  /// (1/N) sum_i F_i(w), summed in ascending client order.
  double global_loss(const ParamVector& w) const;
  /// (1/N) sum_i grad F_i(w), summed in ascending client order.
  ParamVector global_gradient(const ParamVector& w) const;
};

/// F_i(w), or F(w) when `client == kGlobal`. Validates dimension and finiteness.
double eval_loss(const Objective& obj, std::size_t client, const ParamVector& w);

/// Exact gradient of F_i, or of F when `client == kGlobal`.
ParamVector full_gradient(const Objective& obj, std::size_t client,
                          const ParamVector& w);

/// Mini-batch gradient of F_i. Requires 1 <= batch_size <= sample count for
/// sample-based objectives; throws std::invalid_argument on an empty client.
ParamVector stochastic_gradient(const Objective& obj, std::size_t client,
                                const ParamVector& w, std::size_t batch_size,
                                CounterRng& rng);

struct ObjectiveStats {
  double smoothness_L = 0.0;
  /// Data-heterogeneity bound: max ||grad F_i - grad F||^2.
  double sg_sq = 0.0;
  /// Stochastic-gradient variance bound.
  double sigma_sq = 0.0;
};

struct StatsOptions {
  std::size_t batch_size = 1;
  /// Mini-batches drawn per (probe, client) to estimate sigma^2.
  std::size_t variance_draws = 32;
  std::uint64_t seed = 0;
};

/// Empirical constants over a probe set (at least two points).
///
/// L is the largest secant ratio ||grad F_i(u) - grad F_i(v)|| / ||u - v||
/// unless the objective knows it exactly; sigma_g^2 is the largest deviation
/// of a client gradient from the global one; sigma^2 is the largest mean
/// squared deviation of a mini-batch gradient from the full local gradient
/// (or the configured noise variance when the objective has one).
ObjectiveStats estimate_stats(const Objective& obj,
                              std::span<const ParamVector> probes,
                              const StatsOptions& options = {});

/// `count` points drawn uniformly from the box [-radius, radius]^d.
std::vector<ParamVector> random_probes(std::size_t dimension, std::size_t count,
                                       double radius, std::uint64_t seed);

}  // namespace fedstale
