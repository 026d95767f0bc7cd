#include "fedstale/objective.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace fedstale {

void require_finite(const ParamVector& w, std::string_view what) {
  if (!w.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite coordinate");
  }
}

void require_dimension(const ParamVector& w, std::size_t dimension,
                       std::string_view what) {
  if (static_cast<std::size_t>(w.size()) != dimension) {
    throw std::invalid_argument(std::string(what) + ": expected dimension " +
                                std::to_string(dimension) + ", got " +
                                std::to_string(w.size()));
  }
}

ParamVector Objective::client_stochastic_gradient(std::size_t client,
                                                  const ParamVector& w,
                                                  std::size_t /*batch_size*/,
                                                  CounterRng& /*rng*/) const {
  return client_gradient(client, w);
}

double Objective::global_loss(const ParamVector& w) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < client_count(); ++i) sum += client_loss(i, w);
  return sum / static_cast<double>(client_count());
}

ParamVector Objective::global_gradient(const ParamVector& w) const {
  ParamVector sum = ParamVector::Zero(static_cast<Eigen::Index>(dimension()));
  for (std::size_t i = 0; i < client_count(); ++i) sum += client_gradient(i, w);
  return sum / static_cast<double>(client_count());
}

namespace {

void check_point(const Objective& obj, std::size_t client, const ParamVector& w) {
  require_dimension(w, obj.dimension(), "parameter vector");
  require_finite(w, "parameter vector");
  if (client != kGlobal && client >= obj.client_count()) {
    throw std::out_of_range("client index " + std::to_string(client) +
                            " out of range");
  }
}

}  // namespace

double eval_loss(const Objective& obj, std::size_t client, const ParamVector& w) {
  check_point(obj, client, w);
  return client == kGlobal ? obj.global_loss(w) : obj.client_loss(client, w);
}

ParamVector full_gradient(const Objective& obj, std::size_t client,
                          const ParamVector& w) {
  check_point(obj, client, w);
  return client == kGlobal ? obj.global_gradient(w) : obj.client_gradient(client, w);
}

ParamVector stochastic_gradient(const Objective& obj, std::size_t client,
                                const ParamVector& w, std::size_t batch_size,
                                CounterRng& rng) {
  if (client == kGlobal) {
    throw std::invalid_argument("stochastic_gradient needs a concrete client");
  }
  check_point(obj, client, w);
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (obj.kind() == "softmax" || obj.client_sample_count(client) > 0) {
    const std::size_t n = obj.client_sample_count(client);
    if (n == 0) {
      throw std::invalid_argument("client " + std::to_string(client) +
                                  " has no samples");
    }
    if (batch_size > n) {
      throw std::invalid_argument("batch size " + std::to_string(batch_size) +
                                  " exceeds the client's " + std::to_string(n) +
                                  " samples");
    }
  }
  return obj.client_stochastic_gradient(client, w, batch_size, rng);
}

ObjectiveStats estimate_stats(const Objective& obj,
                              std::span<const ParamVector> probes,
                              const StatsOptions& options) {
  if (probes.size() < 2) {
    throw std::invalid_argument("estimate_stats needs at least two probe points");
  }
  for (const auto& p : probes) {
    require_dimension(p, obj.dimension(), "probe");
    require_finite(p, "probe");
  }
  const std::size_t n = obj.client_count();
  std::vector<std::vector<ParamVector>> grads(probes.size());
  for (std::size_t k = 0; k < probes.size(); ++k) {
    grads[k].reserve(n);
    for (std::size_t i = 0; i < n; ++i) grads[k].push_back(obj.client_gradient(i, probes[k]));
  }

  ObjectiveStats stats;
  if (auto exact = obj.exact_smoothness()) {
    stats.smoothness_L = *exact;
  } else {
    for (std::size_t a = 0; a < probes.size(); ++a) {
      for (std::size_t b = a + 1; b < probes.size(); ++b) {
        const double dist = (probes[a] - probes[b]).norm();
        if (dist == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
          stats.smoothness_L =
              std::max(stats.smoothness_L, (grads[a][i] - grads[b][i]).norm() / dist);
        }
      }
    }
  }

  for (std::size_t k = 0; k < probes.size(); ++k) {
    ParamVector global = ParamVector::Zero(static_cast<Eigen::Index>(obj.dimension()));
    for (std::size_t i = 0; i < n; ++i) global += grads[k][i];
    global /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      stats.sg_sq = std::max(stats.sg_sq, (grads[k][i] - global).squaredNorm());
    }
  }

  if (auto noise = obj.exact_noise_variance()) {
    stats.sigma_sq = *noise;
  } else {
    for (std::size_t k = 0; k < probes.size(); ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t samples = obj.client_sample_count(i);
        if (samples == 0) continue;
        const std::size_t batch = std::min(options.batch_size, samples);
        CounterRng rng(options.seed, StreamTag::kProbe, {k, i});
        double acc = 0.0;
        for (std::size_t r = 0; r < options.variance_draws; ++r) {
          acc += (obj.client_stochastic_gradient(i, probes[k], batch, rng) - grads[k][i])
                     .squaredNorm();
        }
        if (options.variance_draws > 0) {
          stats.sigma_sq =
              std::max(stats.sigma_sq, acc / static_cast<double>(options.variance_draws));
        }
      }
    }
  }
  return stats;
}

std::vector<ParamVector> random_probes(std::size_t dimension, std::size_t count,
                                       double radius, std::uint64_t seed) {
  std::vector<ParamVector> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    CounterRng rng(seed, StreamTag::kProbe, {0xFFFFu, k});
    ParamVector p(static_cast<Eigen::Index>(dimension));
    for (auto& x : p) x = radius * (2.0 * rng.uniform() - 1.0);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace fedstale
