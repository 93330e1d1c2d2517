#pragma once

#include <span>
#include <vector>

namespace coadapt {

/// Median with the midpoint average for even lengths. Empty input is an
/// error (std::invalid_argument).
double median(std::span<const double> values);

/// Quantile q in [0, 1] by linear interpolation between order statistics.
double quantile(std::span<const double> values, double q);

}  // namespace coadapt
