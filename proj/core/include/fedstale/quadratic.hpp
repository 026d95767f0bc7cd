#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "fedstale/objective.hpp"

namespace fedstale {

/// One client's quadratic F_i(w) = 1/2 (w - c_i)^T A_i (w - c_i).
struct QuadraticClient {
  Eigen::MatrixXd hessian;  // symmetric positive definite
  ParamVector center;
};

/// Quadratic objective with closed-form gradients, smoothness and minimizer.
///
/// The stochastic oracle adds isotropic Gaussian noise whose expected squared
/// norm equals `noise_variance` (per-coordinate variance noise_variance / d).
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(std::vector<QuadraticClient> clients,
                     double noise_variance = 0.0);

  /// Two 2-D clients with unequal curvature, so the global optimum is not the
  /// average of the local optima.
  static QuadraticObjective two_client_example(double noise_variance = 0.0);

  /// Identity Hessians, F_i(w) = 1/2 ||w - c_i||^2.
  static QuadraticObjective isotropic(std::vector<ParamVector> centers,
                                      double noise_variance = 0.0);

  std::string_view kind() const override { return "quadratic"; }
  std::size_t client_count() const override { return clients_.size(); }
  std::size_t dimension() const override { return dimension_; }

  double client_loss(std::size_t client, const ParamVector& w) const override;
  ParamVector client_gradient(std::size_t client,
                              const ParamVector& w) const override;
  ParamVector client_stochastic_gradient(std::size_t client,
                                         const ParamVector& w,
                                         std::size_t batch_size,
                                         CounterRng& rng) const override;

  std::optional<double> exact_smoothness() const override { return smoothness_; }
  std::optional<double> exact_noise_variance() const override {
    return noise_variance_;
  }
  std::optional<double> optimal_value() const override { return optimal_value_; }

  const QuadraticClient& client(std::size_t i) const { return clients_.at(i); }
  /// Global minimizer w* = (sum A_i)^{-1} sum A_i c_i.
  const ParamVector& minimizer() const { return minimizer_; }
  double noise_variance() const { return noise_variance_; }

 private:
  std::vector<QuadraticClient> clients_;
  std::size_t dimension_ = 0;
  double noise_variance_ = 0.0;
  double smoothness_ = 0.0;
  ParamVector minimizer_;
  double optimal_value_ = 0.0;
};

}  // namespace fedstale
