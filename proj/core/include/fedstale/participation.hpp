#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <span>
#include <vector>

namespace fedstale {

/// Per-client Bernoulli participation probabilities p_i in (0, 1].
class ParticipationProfile {
 public:
  ParticipationProfile() = default;
  /// `groups` is optional; when empty every client is in group 1.
  explicit ParticipationProfile(std::vector<double> probs,
                                std::vector<int> groups = {});

  std::size_t client_count() const { return probs_.size(); }
  double prob(std::size_t i) const { return probs_.at(i); }
  const std::vector<double>& probs() const { return probs_; }
  int group(std::size_t i) const { return groups_.at(i); }
  const std::vector<int>& groups() const { return groups_; }

 private:
  std::vector<double> probs_;
  std::vector<int> groups_;
};

/// Group 1 always participates; group 2 (chosen by a seeded shuffle)
/// participates with probability p_min_group.
ParticipationProfile make_two_group_profile(std::size_t n_clients,
                                            double p_min_group,
                                            std::size_t group2_size,
                                            std::uint64_t seed = 0);

/// The group-2 probability that yields p_avg / p_min == ratio for a two-group
/// profile. ratio == 1 gives 1.
double group2_prob_for_ratio(std::size_t n_clients, std::size_t group2_size,
                             double ratio);

inline constexpr double kInfinitePVar = std::numeric_limits<double>::infinity();

struct ParticipationStats {
  /// (1/N sum (1 - p_i)/p_i)^{-1}; +infinity under full participation.
  double p_var = kInfinitePVar;
  double p_avg = 1.0;
  double p_min = 1.0;

  double heterogeneity_ratio() const { return p_avg / p_min; }
};

ParticipationStats stats(const ParticipationProfile& profile);

/// Which clients are present in a round (rounds are numbered from 1).
struct RoundParticipation {
  std::size_t round = 1;
  std::vector<bool> present;

  std::size_t participant_count() const;
  std::vector<std::size_t> participants() const;
};

/// Each indicator comes from its own counter stream keyed by
/// (master_seed, client, round), so the realization does not depend on the
/// order of calls or on anything else drawn during a run.
RoundParticipation sample_round(const ParticipationProfile& profile,
                                std::size_t round, std::uint64_t master_seed);

/// Source of per-round participation: sampled or replayed.
class ParticipationSource {
 public:
  virtual ~ParticipationSource() = default;
  virtual std::size_t client_count() const = 0;
  virtual RoundParticipation at(std::size_t round) const = 0;
};

class BernoulliParticipation final : public ParticipationSource {
 public:
  BernoulliParticipation(ParticipationProfile profile, std::uint64_t seed)
      : profile_(std::move(profile)), seed_(seed) {}
  std::size_t client_count() const override { return profile_.client_count(); }
  RoundParticipation at(std::size_t round) const override {
    return sample_round(profile_, round, seed_);
  }

 private:
  ParticipationProfile profile_;
  std::uint64_t seed_;
};

/// Replays a recorded trace. Rounds missing from the trace have no
/// participants.
class TraceParticipation final : public ParticipationSource {
 public:
  TraceParticipation(std::size_t n_clients,
                     std::vector<RoundParticipation> rounds);
  std::size_t client_count() const override { return n_clients_; }
  RoundParticipation at(std::size_t round) const override;
  std::size_t rounds() const { return rounds_.size(); }

 private:
  std::size_t n_clients_;
  std::vector<RoundParticipation> rounds_;  // index = round - 1
};

/// CSV with header round,client_id,present (one row per client per round).
void write_trace_csv(std::span<const RoundParticipation> rounds,
                     const std::filesystem::path& path);
TraceParticipation read_trace_csv(const std::filesystem::path& path);

/// Online estimate of participation probabilities from observed rounds.
///
/// p_hat_i = max(c_i, 1) / t and the aggregation weight is
/// min(1 / p_hat_i, weight_cap).
class ProbabilityEstimator {
 public:
  ProbabilityEstimator(std::size_t n_clients, double weight_cap);

  /// Requires rp.round == rounds_seen() + 1.
  void update(const RoundParticipation& rp);

  double estimate(std::size_t client) const;
  double weight(std::size_t client) const;

  std::size_t rounds_seen() const { return rounds_seen_; }
  std::size_t count(std::size_t client) const { return counts_.at(client); }
  const std::vector<std::size_t>& counts() const { return counts_; }
  double weight_cap() const { return weight_cap_; }

 private:
  std::vector<std::size_t> counts_;
  std::size_t rounds_seen_ = 0;
  double weight_cap_;
};

/// Functional form of ProbabilityEstimator::update.
ProbabilityEstimator update_estimator(ProbabilityEstimator est,
                                      const RoundParticipation& rp);
double estimated_weight(const ProbabilityEstimator& est, std::size_t client);

/// Default weight cap: 2T divided by the number of participations expected
/// from the rarest client over the horizon.
double default_weight_cap(std::size_t rounds,
                          double expected_rare_participations = 10.0);

}  // namespace fedstale
