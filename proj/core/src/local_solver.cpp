#include "fedstale/local_solver.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fedstale/errors.hpp"

namespace fedstale {

void LocalConfig::validate() const {
  if (local_steps == 0) throw std::invalid_argument("local_steps must be >= 1");
  if (!(client_lr > 0.0) || !std::isfinite(client_lr)) {
    throw std::invalid_argument("client_lr must be finite and positive");
  }
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
}

ClientUpdate local_train(const Objective& obj, std::size_t client,
                         const ParamVector& w_global, const LocalConfig& cfg,
                         CounterRng& rng, const LocalTrainOptions& options) {
  cfg.validate();
  if (client >= obj.client_count()) throw std::out_of_range("client index out of range");
  require_dimension(w_global, obj.dimension(), "global model");
  require_finite(w_global, "global model");

  const std::size_t samples = obj.client_sample_count(client);
  const std::size_t batch = samples > 0 ? std::min(cfg.batch_size, samples) : cfg.batch_size;

  ClientUpdate out;
  out.client = client;
  out.round = options.round;
  if (options.step_gradients) {
    options.step_gradients->clear();
    options.step_gradients->reserve(cfg.local_steps);
  }
  ParamVector w = w_global;
  for (std::size_t k = 0; k < cfg.local_steps; ++k) {
    ParamVector g = obj.client_stochastic_gradient(client, w, batch, rng);
    const double norm = g.norm();
    if (!std::isfinite(norm)) {
      throw DivergenceError(client, options.round, k + 1,
                            "non-finite gradient for client " + std::to_string(client) +
                                " in round " + std::to_string(options.round) +
                                " at local step " + std::to_string(k + 1));
    }
    out.max_grad_norm = std::max(out.max_grad_norm, norm);
    w -= cfg.client_lr * g;
    if (!w.allFinite()) {
      throw DivergenceError(client, options.round, k + 1,
                            "local iterate of client " + std::to_string(client) +
                                " left the finite range in round " +
                                std::to_string(options.round) + " at local step " +
                                std::to_string(k + 1));
    }
    if (options.step_gradients) options.step_gradients->push_back(std::move(g));
  }
  out.delta = w_global - w;
  return out;
}

ParamVector pseudo_gradient(const ClientUpdate& update, const LocalConfig& cfg) {
  return update.delta / (cfg.client_lr * static_cast<double>(cfg.local_steps));
}

}  // namespace fedstale
