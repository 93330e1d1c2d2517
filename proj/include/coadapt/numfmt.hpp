#pragma once

#include <string>
#include <string_view>

namespace coadapt {

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

/// Shortest round-trip text without an exponent, e.g. 0.0001.
std::string format_fixed(double x);

/// Decimal text with 17 significant digits (lossless for doubles).
std::string format_double17(double x);

/// Strict parse of a whole string; throws std::invalid_argument.
double parse_double(std::string_view text);

}  // namespace coadapt
