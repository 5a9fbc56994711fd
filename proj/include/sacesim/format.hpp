#pragma once

#include <optional>
#include <string>

namespace sacesim {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// As format_double, but an absent value becomes the empty string.
std::string format_optional(const std::optional<double>& v);

/// Fixed-point with `decimals` digits after the point.
std::string format_fixed(double v, int decimals);

}  // namespace sacesim
