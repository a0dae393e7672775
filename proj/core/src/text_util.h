#pragma once

#include <charconv>
#include <type_traits>
#include <cstdint>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "ealearn/error.h"

namespace ealearn::detail {

inline std::string_view trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_number(std::string_view text, std::string_view key) {
  text = trim(text);
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  std::from_chars_result r;
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for double is available in libstdc++ 11.
    r = std::from_chars(first, last, value, std::chars_format::general);
  } else {
    r = std::from_chars(first, last, value);
  }
  if (text.empty() || r.ec != std::errc() || r.ptr != last) {
    throw ValidationError(
        fmt::format("invalid value '{}' for '{}'", text, key));
  }
  return value;
}

inline bool parse_bool(std::string_view text, std::string_view key) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  throw ValidationError(fmt::format("invalid boolean '{}' for '{}'", text, key));
}

// Quotes a CSV field when it contains a separator, quote or newline.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace ealearn::detail
