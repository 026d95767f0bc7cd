#pragma once

#include <cstddef>
#include <limits>
#include <string_view>

#include <Eigen/Core>

namespace fedstale {

/// A point in parameter space: the global model or a client's local iterate.
using ParamVector = Eigen::VectorXd;

/// Client selector meaning "the global objective F = (1/N) sum_i F_i".
inline constexpr std::size_t kGlobal = std::numeric_limits<std::size_t>::max();

/// Throws std::invalid_argument if any coordinate of `w` is NaN or infinite.
void require_finite(const ParamVector& w, std::string_view what);

/// Throws std::invalid_argument if `w.size() != dimension`.
void require_dimension(const ParamVector& w, std::size_t dimension,
                       std::string_view what);

}  // namespace fedstale
