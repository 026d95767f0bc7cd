#include "fedstale/participation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fedstale/csv.hpp"
#include "fedstale/errors.hpp"
#include "fedstale/rng.hpp"

namespace fedstale {

ParticipationProfile::ParticipationProfile(std::vector<double> probs,
                                           std::vector<int> groups)
    : probs_(std::move(probs)), groups_(std::move(groups)) {
  if (probs_.empty()) throw std::invalid_argument("participation profile needs clients");
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    const double p = probs_[i];
    if (!(p > 0.0 && p <= 1.0)) {
      throw std::invalid_argument("participation probability of client " +
                                  std::to_string(i) + " must lie in (0, 1]");
    }
  }
  if (groups_.empty()) groups_.assign(probs_.size(), 1);
  if (groups_.size() != probs_.size()) {
    throw std::invalid_argument("groups must have one entry per client");
  }
}

ParticipationProfile make_two_group_profile(std::size_t n_clients, double p_min_group,
                                            std::size_t group2_size, std::uint64_t seed) {
  if (group2_size > n_clients) throw std::invalid_argument("group 2 larger than N");
  std::vector<std::size_t> order(n_clients);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(seed, StreamTag::kGrouping, {n_clients, group2_size});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> probs(n_clients, 1.0);
  std::vector<int> groups(n_clients, 1);
  for (std::size_t k = 0; k < group2_size; ++k) {
    probs[order[k]] = p_min_group;
    groups[order[k]] = 2;
  }
  return ParticipationProfile(std::move(probs), std::move(groups));
}

double group2_prob_for_ratio(std::size_t n_clients, std::size_t group2_size, double ratio) {
  if (!(ratio >= 1.0) || !std::isfinite(ratio)) {
    throw std::invalid_argument("heterogeneity ratio must be finite and >= 1");
  }
  if (group2_size == 0 || group2_size > n_clients) {
    throw std::invalid_argument("group 2 size must lie in [1, N]");
  }
  if (ratio == 1.0) return 1.0;
  if (group2_size == n_clients) {
    throw std::invalid_argument("a single group cannot have ratio above 1");
  }
  const double n = static_cast<double>(n_clients);
  const double g = static_cast<double>(group2_size);
  return (n - g) / (n * ratio - g);
}

ParticipationStats stats(const ParticipationProfile& profile) {
  ParticipationStats s;
  const auto& p = profile.probs();
  if (p.empty()) return s;
  double inv_sum = 0.0;
  double sum = 0.0;
  double lo = 1.0;
  for (double pi : p) {
    inv_sum += (1.0 - pi) / pi;
    sum += pi;
    lo = std::min(lo, pi);
  }
  const double n = static_cast<double>(p.size());
  s.p_var = inv_sum == 0.0 ? kInfinitePVar : n / inv_sum;
  s.p_avg = sum / n;
  s.p_min = lo;
  return s;
}

std::size_t RoundParticipation::participant_count() const {
  return static_cast<std::size_t>(std::count(present.begin(), present.end(), true));
}

std::vector<std::size_t> RoundParticipation::participants() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < present.size(); ++i) {
    if (present[i]) out.push_back(i);
  }
  return out;
}

RoundParticipation sample_round(const ParticipationProfile& profile, std::size_t round,
                                std::uint64_t master_seed) {
  RoundParticipation rp;
  rp.round = round;
  rp.present.resize(profile.client_count());
  for (std::size_t i = 0; i < profile.client_count(); ++i) {
    const double p = profile.prob(i);
    if (p >= 1.0) {
      rp.present[i] = true;
      continue;
    }
    CounterRng rng(master_seed, StreamTag::kParticipation, {i, round});
    rp.present[i] = rng.uniform() < p;
  }
  return rp;
}

TraceParticipation::TraceParticipation(std::size_t n_clients,
                                       std::vector<RoundParticipation> rounds)
    : n_clients_(n_clients) {
  std::size_t last = 0;
  for (auto& rp : rounds) last = std::max(last, rp.round);
  rounds_.resize(last);
  for (std::size_t r = 0; r < last; ++r) {
    rounds_[r].round = r + 1;
    rounds_[r].present.assign(n_clients_, false);
  }
  for (auto& rp : rounds) {
    if (rp.round == 0) throw std::invalid_argument("trace rounds start at 1");
    if (rp.present.size() != n_clients_) {
      throw std::invalid_argument("trace round has the wrong number of clients");
    }
    rounds_[rp.round - 1] = std::move(rp);
  }
}

RoundParticipation TraceParticipation::at(std::size_t round) const {
  if (round >= 1 && round <= rounds_.size()) return rounds_[round - 1];
  RoundParticipation empty;
  empty.round = round;
  empty.present.assign(n_clients_, false);
  return empty;
}

void write_trace_csv(std::span<const RoundParticipation> rounds,
                     const std::filesystem::path& path) {
  std::ostringstream out;
  out << "round,client_id,present\n";
  for (const auto& rp : rounds) {
    for (std::size_t i = 0; i < rp.present.size(); ++i) {
      out << rp.round << ',' << i << ',' << (rp.present[i] ? 1 : 0) << '\n';
    }
  }
  write_text_atomic(path, out.str());
}

TraceParticipation read_trace_csv(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::array<std::size_t, 3>> rows;
  std::size_t n_clients = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_trimmed(line, ',');
    if (line_no == 1) {
      if (fields != std::vector<std::string>{"round", "client_id", "present"}) {
        throw IoError(path.string() + ": expected header round,client_id,present");
      }
      continue;
    }
    if (fields.size() != 3) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 3 fields");
    }
    std::array<std::size_t, 3> row{};
    for (std::size_t k = 0; k < 3; ++k) {
      try {
        std::size_t used = 0;
        row[k] = std::stoul(fields[k], &used);
        if (used != fields[k].size()) throw std::invalid_argument(fields[k]);
      } catch (const std::exception&) {
        throw IoError(path.string() + ":" + std::to_string(line_no) +
                      ": not a non-negative integer: '" + fields[k] + "'");
      }
    }
    if (row[0] == 0 || row[2] > 1) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": round must be >= 1 and present 0 or 1");
    }
    n_clients = std::max(n_clients, row[1] + 1);
    rows.push_back(row);
  }
  std::vector<RoundParticipation> rounds;
  for (const auto& row : rows) {
    if (rounds.size() < row[0]) {
      const std::size_t old = rounds.size();
      rounds.resize(row[0]);
      for (std::size_t r = old; r < rounds.size(); ++r) {
        rounds[r].round = r + 1;
        rounds[r].present.assign(n_clients, false);
      }
    }
    rounds[row[0] - 1].present[row[1]] = row[2] == 1;
  }
  return TraceParticipation(n_clients, std::move(rounds));
}

ProbabilityEstimator::ProbabilityEstimator(std::size_t n_clients, double weight_cap)
    : counts_(n_clients, 0), weight_cap_(weight_cap) {
  if (!(weight_cap >= 1.0)) throw std::invalid_argument("weight cap must be >= 1");
}

void ProbabilityEstimator::update(const RoundParticipation& rp) {
  if (rp.round != rounds_seen_ + 1) {
    throw std::invalid_argument("estimator expected round " +
                                std::to_string(rounds_seen_ + 1) + ", got " +
                                std::to_string(rp.round));
  }
  if (rp.present.size() != counts_.size()) {
    throw std::invalid_argument("round has the wrong number of clients");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (rp.present[i]) ++counts_[i];
  }
  ++rounds_seen_;
}

double ProbabilityEstimator::estimate(std::size_t client) const {
  const std::size_t c = counts_.at(client);
  if (rounds_seen_ == 0) return 1.0;
  return static_cast<double>(std::max<std::size_t>(c, 1)) /
         static_cast<double>(rounds_seen_);
}

double ProbabilityEstimator::weight(std::size_t client) const {
  return std::min(1.0 / estimate(client), weight_cap_);
}

ProbabilityEstimator update_estimator(ProbabilityEstimator est,
                                      const RoundParticipation& rp) {
  est.update(rp);
  return est;
}

double estimated_weight(const ProbabilityEstimator& est, std::size_t client) {
  return est.weight(client);
}

double default_weight_cap(std::size_t rounds, double expected_rare_participations) {
  if (!(expected_rare_participations > 0.0)) {
    throw std::invalid_argument("expected participations must be positive");
  }
  return std::max(1.0, 2.0 * static_cast<double>(rounds) / expected_rare_participations);
}

}  // namespace fedstale
