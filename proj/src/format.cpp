#include "traylab/format.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <vector>

namespace traylab {

std::string format_fixed(double value, int decimals) {
  std::vector<char> buf(64);
  int n = std::snprintf(buf.data(), buf.size(), "%.*f", decimals, value);
  if (n >= static_cast<int>(buf.size())) {
    buf.resize(static_cast<std::size_t>(n) + 1);
    n = std::snprintf(buf.data(), buf.size(), "%.*f", decimals, value);
  }
  return n > 0 ? std::string(buf.data(), static_cast<std::size_t>(n)) : std::string();
}

std::string format_number(double value) {
  std::array<char, 400> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed);
  std::string text(buf.data(), ec == std::errc{} ? end : buf.data());
  if (text.find('.') == std::string::npos && std::isfinite(value)) text += ".0";
  return text;
}

std::string format_trimmed(double value, int max_decimals) {
  std::string text = format_fixed(value, max_decimals);
  const auto dot = text.find('.');
  if (dot == std::string::npos) return text + ".0";
  while (text.size() > dot + 2 && text.back() == '0') text.pop_back();
  return text;
}

}  // namespace traylab
