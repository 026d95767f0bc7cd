#pragma once

#include <cstddef>
#include <cstdint>

#include "fedstale/objective.hpp"

namespace fedstale {

/// Worst-case smooth convex quadratic
///   F(w) = (L/8) (w^T A w - 2 w_1),
/// where A is tridiagonal with 2 on the first 2t+1 diagonal entries and -1 on
/// the adjacent off-diagonals inside that block, split over two clients so
/// that i_0 owns w_1^2, the linear term and the pairs (w_{2j}, w_{2j+1}),
/// while i_1 owns the pairs (w_{2j-1}, w_{2j}) and w_{2t+1}^2. Every other
/// client has the zero function. Both local functions carry the factor N so
/// that (1/N) sum_i F_i = F.
class HardInstance final : public Objective {
 public:
  /// Requires 2 * horizon + 1 <= dimension and n_clients >= 2. Verifies the
  /// split identity on random probes and throws std::logic_error if it fails.
  HardInstance(std::size_t dimension, std::size_t horizon, double L,
               std::size_t n_clients, std::size_t first_client = 0,
               std::size_t second_client = 1);

  std::string_view kind() const override { return "hard_instance"; }
  std::size_t client_count() const override { return n_clients_; }
  std::size_t dimension() const override { return dimension_; }

  double client_loss(std::size_t client, const ParamVector& w) const override;
  ParamVector client_gradient(std::size_t client,
                              const ParamVector& w) const override;

  /// Local smoothness of the two active clients, N L / 2.
  std::optional<double> exact_smoothness() const override;
  std::optional<double> exact_noise_variance() const override { return 0.0; }
  /// F* = -L (2t+1) / (16 (t+1)).
  std::optional<double> optimal_value() const override;

  /// F evaluated directly from the tridiagonal form.
  double direct_loss(const ParamVector& w) const;
  /// grad F = (L/4)(A w - e_1) evaluated directly.
  ParamVector direct_gradient(const ParamVector& w) const;

  std::size_t horizon() const { return horizon_; }
  double L() const { return L_; }
  std::size_t first_client() const { return first_; }
  std::size_t second_client() const { return second_; }
  /// Entry (i, j) of A, 0-based indices.
  double matrix_entry(std::size_t i, std::size_t j) const;

 private:
  std::size_t dimension_;
  std::size_t horizon_;
  double L_;
  std::size_t n_clients_;
  std::size_t first_;
  std::size_t second_;
};

/// Functional constructor mirroring the other factories.
HardInstance build_hard_instance(std::size_t dimension, std::size_t horizon,
                                 double L, std::size_t n_clients);

}  // namespace fedstale
