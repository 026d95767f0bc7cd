#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "fedstale/local_solver.hpp"
#include "fedstale/objective.hpp"
#include "fedstale/types.hpp"

namespace fedstale {

enum class AggregationRule { kFedAvgBiased, kUFedAvg, kUFedVarp, kFedStale };
enum class WeightSource { kExactProbs, kEstimator };

std::string_view to_string(AggregationRule rule);
std::string_view to_string(WeightSource source);
AggregationRule parse_rule(std::string_view text);
WeightSource parse_weight_source(std::string_view text);

/// True for rules whose expectation over participation is (1/N) sum Delta_i.
bool is_unbiased(AggregationRule rule);

struct AggregatorConfig {
  AggregationRule rule = AggregationRule::kFedStale;
  double beta = 0.5;  // only read by kFedStale
  WeightSource weights = WeightSource::kExactProbs;

  void validate() const;
  /// Staleness weight actually applied: beta for FedStale, 1 for U-FedVARP,
  /// 0 otherwise.
  double effective_beta() const;
};

/// Server-held stale updates h_i, one slot per client, zero at construction.
class MemoryBank {
 public:
  MemoryBank(std::size_t n_clients, std::size_t dimension);

  std::size_t client_count() const { return slots_.size(); }
  std::size_t dimension() const { return dimension_; }
  const ParamVector& slot(std::size_t i) const { return slots_.at(i); }
  /// Round of the last refresh, 0 if the client never participated.
  std::size_t last_refresh_round(std::size_t i) const {
    return last_refresh_.at(i);
  }

  /// Overwrites participants' slots with their fresh updates. Throws
  /// std::invalid_argument on a duplicate client or a dimension mismatch.
  void refresh(std::span<const ClientUpdate> updates, std::size_t round);

  /// CSV rows client_id,last_refresh_round,h_0..h_{d-1} at 17 digits.
  void write_csv(const std::filesystem::path& path) const;
  static MemoryBank read_csv(const std::filesystem::path& path);

 private:
  std::vector<ParamVector> slots_;
  std::vector<std::size_t> last_refresh_;
  std::size_t dimension_;
};

/// Functional form of MemoryBank::refresh.
MemoryBank refresh_memory(MemoryBank bank, std::span<const ClientUpdate> updates,
                          std::size_t round);

struct GlobalUpdate {
  std::size_t round = 0;
  ParamVector delta;
  /// ||(1/N) sum_{i in S} w_i (Delta_i - beta h_i)||
  double fresh_norm = 0.0;
  /// ||(beta/N) sum_i h_i||
  double stale_norm = 0.0;
};

/// Inverse-probability weights, one per client: 1/p_i or an estimate of it.
using ClientWeights = std::span<const double>;

/// Delta = (1/|S|) sum_{i in S} Delta_i. Throws NoParticipantsError if S is
/// empty.
GlobalUpdate fedavg_biased(std::span<const ClientUpdate> updates,
                           std::size_t dimension);

/// Delta = (1/N) sum_{i in S} w_i Delta_i; zero when S is empty.
GlobalUpdate u_fedavg(std::span<const ClientUpdate> updates,
                      ClientWeights weights, std::size_t n_clients,
                      std::size_t dimension);

/// Delta = (1/N) sum_i h_i + (1/N) sum_{i in S} w_i (Delta_i - h_i).
GlobalUpdate u_fedvarp(std::span<const ClientUpdate> updates,
                       const MemoryBank& bank, ClientWeights weights,
                       std::size_t n_clients);

/// Delta = (beta/N) sum_i h_i + (1/N) sum_{i in S} w_i (Delta_i - beta h_i).
/// Reads but never modifies the bank.
GlobalUpdate fedstale(std::span<const ClientUpdate> updates,
                      const MemoryBank& bank, ClientWeights weights,
                      std::size_t n_clients, double beta);

/// Dispatches on cfg.rule. `updates` may be in any client order; every sum is
/// taken in ascending client index.
GlobalUpdate aggregate(const AggregatorConfig& cfg,
                       std::span<const ClientUpdate> updates,
                       const MemoryBank& bank, ClientWeights weights,
                       std::size_t n_clients);

/// H = (1/N) sum_i ||grad F_i(w) - h_i||^2.
double memory_error(const MemoryBank& bank, const Objective& obj,
                    const ParamVector& w);

}  // namespace fedstale
