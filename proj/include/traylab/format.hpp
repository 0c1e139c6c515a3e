#pragma once

#include <string>

namespace traylab {

/// printf-style fixed notation ("%.Nf"), so -0.04 at one decimal is "-0.0".
std::string format_fixed(double value, int decimals);

/// Shortest fixed-notation text that parses back to exactly `value`, with at
/// least one digit after the decimal point ("20.0", "0.18").
std::string format_number(double value);

/// At most `max_decimals` decimals, trailing zeros trimmed but one kept: 1.90 -> "1.9", 2 -> "2.0".
std::string format_trimmed(double value, int max_decimals);

}  // namespace traylab
