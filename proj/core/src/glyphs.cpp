#include "van/glyphs.hpp"

#include <stdexcept>
#include <string_view>

#include "van/text.hpp"

namespace van {

namespace {

struct AtlasEntry {
  char symbol;
  std::string_view pattern;  // 7 rows of 5 cells, '#' inked
};

constexpr AtlasEntry kAtlas[] = {
    {'0', ".###.#...##..###.#.###..##...#.###."},
    {'1', "..#...##....#....#....#....#...###."},
    {'2', ".###.#...#....#...#...#...#...#####"},
    {'3', "#####...#...#.....#.....##...#.###."},
    {'4', "...#...##..#.#.#..#.#####...#....#."},
    {'5', "######....####.....#....##...#.###."},
    {'6', "..##..#...#....####.#...##...#.###."},
    {'7', "#####....#...#...#...#....#....#..."},
    {'8', ".###.#...##...#.###.#...##...#.###."},
    {'9', ".###.#...##...#.####....#...#..##.."},
    {'A', ".###.#...##...#######...##...##...#"},
    {'B', "####.#...##...#####.#...##...#####."},
    {'C', ".###.#...##....#....#....#...#.###."},
    {'D', "###..#..#.#...##...##...##..#.###.."},
    {'E', "######....#....####.#....#....#####"},
    {'F', "######....#....####.#....#....#...."},
    {'G', ".###.#...##....#.####...##...#.####"},
    {'H', "#...##...##...#######...##...##...#"},
    {'I', ".###...#....#....#....#....#...###."},
    {'J', "..###...#....#....#....#.#..#..##.."},
    {'K', "#...##..#.#.#..##...#.#..#..#.#...#"},
    {'L', "#....#....#....#....#....#....#####"},
    {'M', "#...###.###.#.##.#.##...##...##...#"},
    {'N', "#...##...###..##.#.##..###...##...#"},
    {'O', ".###.#...##...##...##...##...#.###."},
    {'P', "####.#...##...#####.#....#....#...."},
    {'Q', ".###.#...##...##...##.#.##..#..##.#"},
    {'R', "####.#...##...#####.#.#..#..#.#...#"},
    {'S', ".#####....#.....###.....#....#####."},
    {'T', "#####..#....#....#....#....#....#.."},
    {'U', "#...##...##...##...##...##...#.###."},
    {'V', "#...##...##...##...##...#.#.#...#.."},
    {'W', "#...##...##...##.#.##.#.##.#.#.#.#."},
    {'X', "#...##...#.#.#...#...#.#.#...##...#"},
    {'Y', "#...##...#.#.#...#....#....#....#.."},
    {'Z', "#####....#...#...#...#...#....#####"},
    {' ', "..................................."},
};

struct Atlas {
  std::string symbols;
  std::array<Glyph, 128> glyphs{};
  std::array<bool, 128> present{};

  Atlas() {
    for (const AtlasEntry& e : kAtlas) {
      if (e.pattern.size() != kGlyphRows * kGlyphCols) throw std::logic_error("glyph atlas entry has wrong size");
      Glyph g;
      for (std::size_t r = 0; r < kGlyphRows; ++r)
        for (std::size_t c = 0; c < kGlyphCols; ++c)
          if (e.pattern[r * kGlyphCols + c] == '#') g.rows[r] |= static_cast<std::uint8_t>(1u << (kGlyphCols - 1 - c));
      const auto index = static_cast<unsigned char>(e.symbol);
      glyphs[index] = g;
      present[index] = true;
      symbols.push_back(e.symbol);
    }
  }
};

const Atlas& atlas() {
  static const Atlas instance;
  return instance;
}

}  // namespace

const std::string& atlas_symbols() { return atlas().symbols; }

bool atlas_has(char32_t symbol) { return symbol < 128 && atlas().present[symbol]; }

const Glyph& atlas_glyph(char32_t symbol) {
  if (!atlas_has(symbol)) throw std::invalid_argument("no glyph for '" + utf8_encode(symbol) + "' in the atlas");
  return atlas().glyphs[symbol];
}

}  // namespace van
