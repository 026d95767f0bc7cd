#include "fedstale/quadratic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace fedstale {

QuadraticObjective::QuadraticObjective(std::vector<QuadraticClient> clients,
                                       double noise_variance)
    : clients_(std::move(clients)), noise_variance_(noise_variance) {
  if (clients_.empty()) throw std::invalid_argument("quadratic objective needs a client");
  if (!(noise_variance_ >= 0.0) || !std::isfinite(noise_variance_)) {
    throw std::invalid_argument("noise variance must be finite and non-negative");
  }
  dimension_ = static_cast<std::size_t>(clients_.front().center.size());
  if (dimension_ == 0) throw std::invalid_argument("quadratic objective needs d >= 1");

  const auto d = static_cast<Eigen::Index>(dimension_);
  Eigen::MatrixXd hessian_sum = Eigen::MatrixXd::Zero(d, d);
  ParamVector linear = ParamVector::Zero(d);
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    auto& c = clients_[i];
    const std::string who = "client " + std::to_string(i);
    require_dimension(c.center, dimension_, who + " center");
    require_finite(c.center, who + " center");
    if (c.hessian.rows() != d || c.hessian.cols() != d) {
      throw std::invalid_argument(who + ": Hessian has the wrong shape");
    }
    if (!c.hessian.allFinite() || !c.hessian.isApprox(c.hessian.transpose(), 1e-12)) {
      throw std::invalid_argument(who + ": Hessian must be finite and symmetric");
    }
    c.hessian = 0.5 * (c.hessian + c.hessian.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.hessian, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() <= 0.0) {
      throw std::invalid_argument(who + ": Hessian must be positive definite");
    }
    smoothness_ = std::max(smoothness_, eig.eigenvalues().maxCoeff());
    hessian_sum += c.hessian;
    linear += c.hessian * c.center;
  }
  minimizer_ = hessian_sum.llt().solve(linear);
  optimal_value_ = global_loss(minimizer_);
}

QuadraticObjective QuadraticObjective::two_client_example(double noise_variance) {
  QuadraticClient a{Eigen::Vector2d(1.0, 0.5).asDiagonal(), Eigen::Vector2d(5.0, 0.0)};
  QuadraticClient b{Eigen::Vector2d(0.5, 1.0).asDiagonal(), Eigen::Vector2d(0.0, 5.0)};
  return QuadraticObjective({a, b}, noise_variance);
}

QuadraticObjective QuadraticObjective::isotropic(std::vector<ParamVector> centers,
                                                 double noise_variance) {
  std::vector<QuadraticClient> clients;
  clients.reserve(centers.size());
  for (auto& c : centers) {
    const auto d = c.size();
    clients.push_back({Eigen::MatrixXd::Identity(d, d), std::move(c)});
  }
  return QuadraticObjective(std::move(clients), noise_variance);
}

double QuadraticObjective::client_loss(std::size_t client, const ParamVector& w) const {
  const auto& c = clients_.at(client);
  const ParamVector r = w - c.center;
  return 0.5 * r.dot(c.hessian * r);
}

ParamVector QuadraticObjective::client_gradient(std::size_t client,
                                                const ParamVector& w) const {
  const auto& c = clients_.at(client);
  return c.hessian * (w - c.center);
}

// The batch size does not change the noise level: the oracle models a fixed
// per-query variance.
ParamVector QuadraticObjective::client_stochastic_gradient(std::size_t client,
                                                           const ParamVector& w,
                                                           std::size_t /*batch_size*/,
                                                           CounterRng& rng) const {
  ParamVector g = client_gradient(client, w);
  if (noise_variance_ > 0.0) {
    const double sd = std::sqrt(noise_variance_ / static_cast<double>(dimension_));
    for (auto& x : g) x += sd * rng.normal();
  }
  return g;
}

}  // namespace fedstale
