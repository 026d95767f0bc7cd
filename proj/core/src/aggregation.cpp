#include "fedstale/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fedstale/csv.hpp"
#include "fedstale/errors.hpp"

namespace fedstale {

std::string_view to_string(AggregationRule rule) {
  switch (rule) {
    case AggregationRule::kFedAvgBiased: return "fedavg_biased";
    case AggregationRule::kUFedAvg: return "u_fedavg";
    case AggregationRule::kUFedVarp: return "u_fedvarp";
    case AggregationRule::kFedStale: return "fedstale";
  }
  return "unknown";
}

std::string_view to_string(WeightSource source) {
  return source == WeightSource::kExactProbs ? "exact" : "estimator";
}

AggregationRule parse_rule(std::string_view text) {
  if (text == "fedavg_biased" || text == "fedavg") return AggregationRule::kFedAvgBiased;
  if (text == "u_fedavg" || text == "ufedavg") return AggregationRule::kUFedAvg;
  if (text == "u_fedvarp" || text == "fedvarp" || text == "ufedvarp") {
    return AggregationRule::kUFedVarp;
  }
  if (text == "fedstale") return AggregationRule::kFedStale;
  throw std::invalid_argument("unknown aggregation rule '" + std::string(text) +
                              "' (expected fedavg_biased, u_fedavg, u_fedvarp or fedstale)");
}

WeightSource parse_weight_source(std::string_view text) {
  if (text == "exact") return WeightSource::kExactProbs;
  if (text == "estimator") return WeightSource::kEstimator;
  throw std::invalid_argument("unknown weight source '" + std::string(text) +
                              "' (expected exact or estimator)");
}

bool is_unbiased(AggregationRule rule) { return rule != AggregationRule::kFedAvgBiased; }

void AggregatorConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
}

double AggregatorConfig::effective_beta() const {
  switch (rule) {
    case AggregationRule::kFedStale: return beta;
    case AggregationRule::kUFedVarp: return 1.0;
    default: return 0.0;
  }
}

MemoryBank::MemoryBank(std::size_t n_clients, std::size_t dimension)
    : slots_(n_clients, ParamVector::Zero(static_cast<Eigen::Index>(dimension))),
      last_refresh_(n_clients, 0),
      dimension_(dimension) {}

void MemoryBank::refresh(std::span<const ClientUpdate> updates, std::size_t round) {
  std::vector<bool> seen(slots_.size(), false);
  for (const auto& u : updates) {
    if (u.client >= slots_.size()) throw std::invalid_argument("client index out of range");
    if (seen[u.client]) {
      throw std::invalid_argument("duplicate update for client " + std::to_string(u.client));
    }
    seen[u.client] = true;
    require_dimension(u.delta, dimension_, "client update");
  }
  for (const auto& u : updates) {
    slots_[u.client] = u.delta;
    last_refresh_[u.client] = round;
  }
}

void MemoryBank::write_csv(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << "client_id,last_refresh_round";
  for (std::size_t j = 0; j < dimension_; ++j) out << ",h_" << j;
  out << '\n';
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    out << i << ',' << last_refresh_[i];
    for (double x : slots_[i]) out << ',' << format_double(x);
    out << '\n';
  }
  write_text_atomic(path, out.str());
}

MemoryBank MemoryBank::read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty memory snapshot");
  const auto header = split_trimmed(line, ',');
  if (header.size() < 2 || header[0] != "client_id" || header[1] != "last_refresh_round") {
    throw IoError(path.string() + ": bad memory snapshot header");
  }
  const std::size_t d = header.size() - 2;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(split_trimmed(line, ','));
    if (rows.back().size() != header.size()) {
      throw IoError(path.string() + ": row " + std::to_string(rows.size()) +
                    " has the wrong number of fields");
    }
  }
  MemoryBank bank(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    try {
      const std::size_t id = std::stoul(rows[r][0]);
      if (id != r) throw std::invalid_argument("client ids must be 0..N-1 in order");
      bank.last_refresh_[r] = std::stoul(rows[r][1]);
      for (std::size_t j = 0; j < d; ++j) {
        bank.slots_[r](static_cast<Eigen::Index>(j)) = std::stod(rows[r][j + 2]);
      }
    } catch (const std::exception& e) {
      throw IoError(path.string() + ": row " + std::to_string(r + 1) + ": " + e.what());
    }
  }
  return bank;
}

MemoryBank refresh_memory(MemoryBank bank, std::span<const ClientUpdate> updates,
                          std::size_t round) {
  bank.refresh(updates, round);
  return bank;
}

namespace {

// Participants in ascending client order; rejects duplicates and bad shapes.
std::vector<const ClientUpdate*> ordered(std::span<const ClientUpdate> updates,
                                         std::size_t n_clients, std::size_t dimension) {
  std::vector<const ClientUpdate*> out;
  out.reserve(updates.size());
  for (const auto& u : updates) {
    if (u.client >= n_clients) throw std::invalid_argument("client index out of range");
    require_dimension(u.delta, dimension, "client update");
    out.push_back(&u);
  }
  std::sort(out.begin(), out.end(),
            [](const ClientUpdate* a, const ClientUpdate* b) { return a->client < b->client; });
  for (std::size_t k = 1; k < out.size(); ++k) {
    if (out[k]->client == out[k - 1]->client) {
      throw std::invalid_argument("duplicate update for client " +
                                  std::to_string(out[k]->client));
    }
  }
  return out;
}

void check_weights(ClientWeights weights, std::size_t n_clients) {
  if (weights.size() != n_clients) {
    throw std::invalid_argument("need one aggregation weight per client");
  }
  for (double w : weights) {
    if (!(w >= 1.0) || !std::isfinite(w)) {
      throw std::invalid_argument("aggregation weights 1/p must be finite and >= 1");
    }
  }
}

void check_bank(const MemoryBank& bank, std::size_t n_clients) {
  if (bank.client_count() != n_clients) {
    throw std::invalid_argument("memory bank has the wrong number of clients");
  }
}

std::size_t round_of(std::span<const ClientUpdate> updates) {
  return updates.empty() ? 0 : updates.front().round;
}

}  // namespace

GlobalUpdate fedavg_biased(std::span<const ClientUpdate> updates, std::size_t dimension) {
  const std::size_t round = round_of(updates);
  if (updates.empty()) throw NoParticipantsError(round);
  std::size_t n_max = 0;
  for (const auto& u : updates) n_max = std::max(n_max, u.client + 1);
  const auto order = ordered(updates, n_max, dimension);
  GlobalUpdate g;
  g.round = round;
  g.delta = ParamVector::Zero(static_cast<Eigen::Index>(dimension));
  for (const auto* u : order) g.delta += u->delta;
  g.delta /= static_cast<double>(order.size());
  g.fresh_norm = g.delta.norm();
  return g;
}

GlobalUpdate u_fedavg(std::span<const ClientUpdate> updates, ClientWeights weights,
                      std::size_t n_clients, std::size_t dimension) {
  check_weights(weights, n_clients);
  const auto order = ordered(updates, n_clients, dimension);
  GlobalUpdate g;
  g.round = round_of(updates);
  g.delta = ParamVector::Zero(static_cast<Eigen::Index>(dimension));
  for (const auto* u : order) g.delta += weights[u->client] * u->delta;
  g.delta /= static_cast<double>(n_clients);
  g.fresh_norm = g.delta.norm();
  return g;
}

GlobalUpdate u_fedvarp(std::span<const ClientUpdate> updates, const MemoryBank& bank,
                       ClientWeights weights, std::size_t n_clients) {
  check_weights(weights, n_clients);
  check_bank(bank, n_clients);
  const auto d = static_cast<Eigen::Index>(bank.dimension());
  const auto order = ordered(updates, n_clients, bank.dimension());
  ParamVector stale = ParamVector::Zero(d);
  for (std::size_t i = 0; i < n_clients; ++i) stale += bank.slot(i);
  stale /= static_cast<double>(n_clients);
  ParamVector fresh = ParamVector::Zero(d);
  for (const auto* u : order) {
    fresh += weights[u->client] * (u->delta - bank.slot(u->client));
  }
  fresh /= static_cast<double>(n_clients);
  GlobalUpdate g;
  g.round = round_of(updates);
  g.delta = stale + fresh;
  g.fresh_norm = fresh.norm();
  g.stale_norm = stale.norm();
  return g;
}

GlobalUpdate fedstale(std::span<const ClientUpdate> updates, const MemoryBank& bank,
                      ClientWeights weights, std::size_t n_clients, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
  check_weights(weights, n_clients);
  check_bank(bank, n_clients);
  const auto d = static_cast<Eigen::Index>(bank.dimension());
  const auto order = ordered(updates, n_clients, bank.dimension());
  ParamVector stale = ParamVector::Zero(d);
  for (std::size_t i = 0; i < n_clients; ++i) stale += bank.slot(i);
  stale *= beta / static_cast<double>(n_clients);
  ParamVector fresh = ParamVector::Zero(d);
  for (const auto* u : order) {
    fresh += weights[u->client] * (u->delta - beta * bank.slot(u->client));
  }
  fresh /= static_cast<double>(n_clients);
  GlobalUpdate g;
  g.round = round_of(updates);
  g.delta = stale + fresh;
  g.fresh_norm = fresh.norm();
  g.stale_norm = stale.norm();
  return g;
}

GlobalUpdate aggregate(const AggregatorConfig& cfg, std::span<const ClientUpdate> updates,
                       const MemoryBank& bank, ClientWeights weights,
                       std::size_t n_clients) {
  cfg.validate();
  switch (cfg.rule) {
    case AggregationRule::kFedAvgBiased:
      return fedavg_biased(updates, bank.dimension());
    case AggregationRule::kUFedAvg:
      return u_fedavg(updates, weights, n_clients, bank.dimension());
    case AggregationRule::kUFedVarp:
      return u_fedvarp(updates, bank, weights, n_clients);
    case AggregationRule::kFedStale:
      return fedstale(updates, bank, weights, n_clients, cfg.beta);
  }
  throw std::logic_error("unhandled aggregation rule");
}

double memory_error(const MemoryBank& bank, const Objective& obj, const ParamVector& w) {
  if (bank.client_count() != obj.client_count() || bank.dimension() != obj.dimension()) {
    throw std::invalid_argument("memory bank does not match the objective");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < bank.client_count(); ++i) {
    sum += (obj.client_gradient(i, w) - bank.slot(i)).squaredNorm();
  }
  return sum / static_cast<double>(bank.client_count());
}

}  // namespace fedstale
