#include "fedstale/hard_instance.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fedstale/rng.hpp"

namespace fedstale {

HardInstance::HardInstance(std::size_t dimension, std::size_t horizon, double L,
                           std::size_t n_clients, std::size_t first_client,
                           std::size_t second_client)
    : dimension_(dimension),
      horizon_(horizon),
      L_(L),
      n_clients_(n_clients),
      first_(first_client),
      second_(second_client) {
  if (horizon == 0) throw std::invalid_argument("horizon must be >= 1");
  if (2 * horizon + 1 > dimension) {
    throw std::invalid_argument("horizon " + std::to_string(horizon) +
                                " needs dimension >= " + std::to_string(2 * horizon + 1));
  }
  if (n_clients < 2) throw std::invalid_argument("hard instance needs at least two clients");
  if (!(L > 0.0) || !std::isfinite(L)) throw std::invalid_argument("L must be positive");
  if (first_ >= n_clients || second_ >= n_clients || first_ == second_) {
    throw std::invalid_argument("active clients must be two distinct valid indices");
  }
  for (std::size_t probe = 0; probe < 4; ++probe) {
    CounterRng rng(0x68617264ULL, StreamTag::kProbe, {dimension, horizon, probe});
    ParamVector w(static_cast<Eigen::Index>(dimension));
    for (auto& x : w) x = 2.0 * rng.uniform() - 1.0;
    const double direct = direct_loss(w);
    const double split = global_loss(w);
    if (std::abs(direct - split) > 1e-10 * (1.0 + std::abs(direct))) {
      throw std::logic_error("hard instance split does not reproduce F");
    }
  }
}

double HardInstance::matrix_entry(std::size_t i, std::size_t j) const {
  const std::size_t m = 2 * horizon_ + 1;
  if (i >= dimension_ || j >= dimension_) throw std::out_of_range("matrix index");
  if (i >= m || j >= m) return 0.0;
  if (i == j) return 2.0;
  if (i + 1 == j || j + 1 == i) return -1.0;
  return 0.0;
}

// 0-based storage: coordinate w_j lives at w(j - 1).
double HardInstance::client_loss(std::size_t client, const ParamVector& w) const {
  const double scale = static_cast<double>(n_clients_) * L_ / 8.0;
  const std::size_t t = horizon_;
  if (client == first_) {
    double s = w(0) * w(0) - 2.0 * w(0);
    for (std::size_t j = 1; j <= t; ++j) {
      const double diff = w(static_cast<Eigen::Index>(2 * j - 1)) - w(static_cast<Eigen::Index>(2 * j));
      s += diff * diff;
    }
    return scale * s;
  }
  if (client == second_) {
    double s = 0.0;
    for (std::size_t j = 1; j <= t; ++j) {
      const double diff = w(static_cast<Eigen::Index>(2 * j - 2)) - w(static_cast<Eigen::Index>(2 * j - 1));
      s += diff * diff;
    }
    const double last = w(static_cast<Eigen::Index>(2 * t));
    return scale * (s + last * last);
  }
  if (client >= n_clients_) throw std::out_of_range("client index out of range");
  return 0.0;
}

ParamVector HardInstance::client_gradient(std::size_t client, const ParamVector& w) const {
  const double scale = static_cast<double>(n_clients_) * L_ / 4.0;
  const std::size_t t = horizon_;
  ParamVector g = ParamVector::Zero(static_cast<Eigen::Index>(dimension_));
  if (client == first_) {
    g(0) = scale * (w(0) - 1.0);
    for (std::size_t j = 1; j <= t; ++j) {
      const auto a = static_cast<Eigen::Index>(2 * j - 1);
      const double diff = w(a) - w(a + 1);
      g(a) += scale * diff;
      g(a + 1) -= scale * diff;
    }
  } else if (client == second_) {
    for (std::size_t j = 1; j <= t; ++j) {
      const auto a = static_cast<Eigen::Index>(2 * j - 2);
      const double diff = w(a) - w(a + 1);
      g(a) += scale * diff;
      g(a + 1) -= scale * diff;
    }
    const auto last = static_cast<Eigen::Index>(2 * t);
    g(last) += scale * w(last);
  } else if (client >= n_clients_) {
    throw std::out_of_range("client index out of range");
  }
  return g;
}

std::optional<double> HardInstance::exact_smoothness() const {
  return static_cast<double>(n_clients_) * L_ / 2.0;
}

std::optional<double> HardInstance::optimal_value() const {
  const double t = static_cast<double>(horizon_);
  return -L_ * (2.0 * t + 1.0) / (16.0 * (t + 1.0));
}

double HardInstance::direct_loss(const ParamVector& w) const {
  const auto m = static_cast<Eigen::Index>(2 * horizon_ + 1);
  double quad = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    quad += 2.0 * w(i) * w(i);
    if (i + 1 < m) quad -= 2.0 * w(i) * w(i + 1);
  }
  return L_ / 8.0 * (quad - 2.0 * w(0));
}

ParamVector HardInstance::direct_gradient(const ParamVector& w) const {
  const auto m = static_cast<Eigen::Index>(2 * horizon_ + 1);
  ParamVector g = ParamVector::Zero(static_cast<Eigen::Index>(dimension_));
  for (Eigen::Index i = 0; i < m; ++i) {
    double aw = 2.0 * w(i);
    if (i > 0) aw -= w(i - 1);
    if (i + 1 < m) aw -= w(i + 1);
    g(i) = L_ / 4.0 * aw;
  }
  g(0) -= L_ / 4.0;
  return g;
}

HardInstance build_hard_instance(std::size_t dimension, std::size_t horizon, double L,
                                 std::size_t n_clients) {
  return HardInstance(dimension, horizon, L, n_clients);
}

}  // namespace fedstale
