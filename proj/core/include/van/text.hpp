#pragma once

#include <string>
#include <string_view>

namespace van {

/// Strict UTF-8 decode; throws std::invalid_argument on malformed input.
std::u32string utf8_to_u32(std::string_view text);
std::string u32_to_utf8(std::u32string_view text);
std::string utf8_encode(char32_t code_point);

/// Collapses runs of spaces to one and strips leading/trailing spaces.
std::string postprocess_text(std::string_view text);

}  // namespace van
