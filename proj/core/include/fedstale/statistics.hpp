#pragma once

#include <span>

namespace fedstale {

double mean(std::span<const double> values);
/// Sample standard deviation divided by sqrt(n); 0 for fewer than two values.
double standard_error(std::span<const double> values);
/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace fedstale
