#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace van {

inline constexpr std::size_t kGlyphRows = 7;
inline constexpr std::size_t kGlyphCols = 5;

/// Dot-matrix bitmap; bit (4 - col) of rows[row] is set when the dot is inked.
struct Glyph {
  std::array<std::uint8_t, kGlyphRows> rows{};
  bool dot(std::size_t row, std::size_t col) const { return (rows[row] >> (kGlyphCols - 1 - col)) & 1u; }
};

/// Symbols covered by the built-in atlas: digits, upper-case letters, space.
const std::string& atlas_symbols();
bool atlas_has(char32_t symbol);
/// Throws std::invalid_argument for symbols outside the atlas.
const Glyph& atlas_glyph(char32_t symbol);

}  // namespace van
