#pragma once

#include <cstddef>
#include <span>

#include "fedstale/objective.hpp"
#include "fedstale/synthetic_data.hpp"

namespace fedstale {

/// Multinomial logistic regression: F_i is the mean cross-entropy over client
/// i's samples. Parameters are laid out class-major, each class holding
/// feature_count weights followed by a bias.
class SoftmaxObjective final : public Objective {
 public:
  explicit SoftmaxObjective(SyntheticDataset data, double l2 = 0.0);

  std::string_view kind() const override { return "softmax"; }
  std::size_t client_count() const override { return data_.clients.size(); }
  std::size_t dimension() const override { return dimension_; }

  double client_loss(std::size_t client, const ParamVector& w) const override;
  ParamVector client_gradient(std::size_t client,
                              const ParamVector& w) const override;
  /// Mini-batch drawn without replacement; indices are visited in ascending
  /// order so a full batch reproduces client_gradient bit for bit.
  ParamVector client_stochastic_gradient(std::size_t client,
                                         const ParamVector& w,
                                         std::size_t batch_size,
                                         CounterRng& rng) const override;
  std::size_t client_sample_count(std::size_t client) const override;

  /// Per-client accuracy on the held-out split, averaged over clients.
  std::optional<double> heldout_accuracy(const ParamVector& w) const override;

  /// Gradient of the mean loss over the given sample indices, in the given order.
  ParamVector batch_gradient(std::size_t client,
                             std::span<const std::size_t> indices,
                             const ParamVector& w) const;

  const SyntheticDataset& data() const { return data_; }
  double l2() const { return l2_; }

 private:
  SyntheticDataset data_;
  double l2_;
  std::size_t dimension_;
};

}  // namespace fedstale
