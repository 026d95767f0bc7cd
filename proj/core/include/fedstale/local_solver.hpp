#pragma once

#include <cstddef>
#include <vector>

#include "fedstale/objective.hpp"
#include "fedstale/rng.hpp"
#include "fedstale/types.hpp"

namespace fedstale {

struct LocalConfig {
  std::size_t local_steps = 5;  // K
  double client_lr = 0.01;      // eta_c
  std::size_t batch_size = 16;

  void validate() const;
};

/// Delta_i = w_global - w_i^{(t,K)} for one participating client.
struct ClientUpdate {
  std::size_t client = 0;
  std::size_t round = 0;
  ParamVector delta;
  /// Largest stochastic-gradient norm seen along the local path.
  double max_grad_norm = 0.0;
};

struct LocalTrainOptions {
  std::size_t round = 0;
  /// When non-null, receives the K stochastic gradients in order.
  std::vector<ParamVector>* step_gradients = nullptr;
};

/// K steps of local SGD from w_global. Throws DivergenceError naming the step
/// at which an iterate stopped being finite.
ClientUpdate local_train(const Objective& obj, std::size_t client,
                         const ParamVector& w_global, const LocalConfig& cfg,
                         CounterRng& rng, const LocalTrainOptions& options = {});

/// Delta_i / (eta_c K): the mean of the K local stochastic gradients.
ParamVector pseudo_gradient(const ClientUpdate& update, const LocalConfig& cfg);

}  // namespace fedstale
