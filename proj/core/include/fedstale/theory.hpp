#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedstale/hard_instance.hpp"
#include "fedstale/participation.hpp"
#include "fedstale/types.hpp"

namespace fedstale {

/// Inputs of the FedStale convergence bound.
struct BoundInputs {
  double L = 1.0;
  double sigma_sq = 0.0;
  double sg_sq = 0.0;
  ParticipationStats stats;
  std::size_t n_clients = 1;
  std::size_t K = 1;
  double eta_c = 0.0;
  double eta_s = 1.0;
  std::size_t T = 1;
  double beta = 0.0;
  double F_init_gap = 0.0;  // F(w^(1)) - F*
  double H_init = 0.0;      // H^(1)
  /// Constants of the beta* formula. The bound evaluator uses unit constants
  /// throughout, so its output is for trends, not absolute values.
  double a1 = 1.0;
  double a2 = 1.0;

  void validate() const;
};

enum class LrConstraint { kClientLr, kServerLrFresh, kServerLrStale };
std::string_view to_string(LrConstraint c);

struct LrCheck {
  bool ok = true;
  std::vector<LrConstraint> violated;
  double client_lr_max = 0.0;
  /// N p_var / (12 (1-beta)^2); +inf when vacuous.
  double server_lr_max_fresh = 0.0;
  /// p_var p_min / (3 beta^2 p_avg); +inf when vacuous.
  double server_lr_max_stale = 0.0;

  double server_lr_max() const;
};

/// eta_c <= 1/(8LK) and eta_s <= min{N p_var/(12(1-beta)^2),
/// p_var p_min/(3 beta^2 p_avg)}. A term with a zero denominator, or any term
/// with p_var = +inf, is vacuous.
LrCheck check_lr_constraints(const BoundInputs& in);

struct BoundBreakdown {
  double iterate_init_term = 0.0;
  double memory_init_term = 0.0;
  double stochastic_term = 0.0;
  double heterogeneity_term = 0.0;
  double total = 0.0;
  /// Set when the learning-rate constraints failed and the caller overrode.
  bool constraints_overridden = false;
  static constexpr std::string_view kConstantConvention = "unit-constants";
};

/// The four-term upper bound with every O(.) constant set to 1. Throws
/// std::domain_error when the learning-rate constraints fail, unless
/// `allow_violation` is set.
BoundBreakdown theorem1_bound(const BoundInputs& in, bool allow_violation = false);

/// Weight minimizing the bound, clamped to [0, 1]:
///   (sg^2/N) / (a1 r sigma^2/K + [1/N + a2 r eta_c^2 L^2 K(K-1)] sg^2),
/// with r = p_avg / p_min. Throws std::domain_error on a zero denominator.
double beta_star(const BoundInputs& in);

/// Expected lower-bound envelope 3 L gap / ((p_min t + 2)(4 p_min t + 9)^2).
double lower_bound_curve(double p_min, double t, double F_gap, double L);

/// Largest nonzero coordinate reachable after each round of a two-client
/// schedule on the split hard instance.
struct CoordinateFrontier {
  std::size_t round = 0;  // 0-based round index
  std::size_t k = 0;
};

/// Presence of the two active clients in one round.
struct FrontierStep {
  bool first_active = true;   // i_0, unlocks odd coordinates from even k
  bool second_active = false; // i_1, unlocks even coordinates from odd k
};

/// Coordinate-discovery automaton: in each round every active client starts
/// from the previous frontier; i_0 extends it when k is even, i_1 when k is
/// odd; the new frontier is the max over active clients, capped at `max_k`.
std::vector<CoordinateFrontier> track_frontier(std::span<const FrontierStep> schedule,
                                               std::size_t max_k);

/// i_0 always active, i_1 active at rounds t with t mod tau == 1 (the fastest
/// deterministic schedule with period tau).
std::vector<FrontierStep> deterministic_schedule(std::size_t tau,
                                                 std::size_t rounds);

/// 1 + floor((t + tau - 2)/tau) + floor((t + tau - 1)/tau), floor division.
long long frontier_bound(long long t, long long tau);

struct GradientFloor {
  /// 3 L^2 / (8 k (k+1) (2k+1)).
  double value = 0.0;
  /// Minimizer of ||grad F||^2 over span{e_1 .. e_{k-1}} (length k-1).
  ParamVector minimizer;
};

/// Smallest squared gradient norm of the hard instance over
/// span{e_1 .. e_{k-1}}. Requires 1 <= k <= horizon.
GradientFloor frontier_gradient_floor(std::size_t k, std::size_t horizon,
                                      double L);

/// Frontier of `instance` under a participation schedule; schedule entry j is
/// 0-based round j.
std::vector<CoordinateFrontier> track_frontier(
    const HardInstance& instance, std::span<const RoundParticipation> schedule);

GradientFloor frontier_gradient_floor(const HardInstance& instance,
                                      std::size_t k);

/// F(w^(1)) - F* for the instance started at the origin.
double hard_instance_gap(const HardInstance& instance);

}  // namespace fedstale
