#pragma once

#include <string>
#include <string_view>

namespace rrl {

// Shortest decimal that parses back to the identical double ("nan", "inf"
// and "-inf" for non-finite values).
std::string format_double(double value);
// Accepts everything format_double emits; throws ArgumentError otherwise.
double parse_double(std::string_view text);

}  // namespace rrl
