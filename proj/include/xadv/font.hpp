#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xadv/image.hpp"
#include "xadv/rng.hpp"

namespace xadv {

// One glyph: a binary coverage mask (row-major, 0/1 per pixel) plus the
// horizontal advance in atlas pixels.
struct GlyphMask {
    int width = 0;
    int height = 0;
    int advance = 0;
    std::vector<std::uint8_t> bits;
};

// Fixed bitmap font. Either the embedded ASCII font or an atlas loaded from
// a glyph-sheet PNG plus a metrics JSON ({"line_height", "fallback",
// "glyphs": {"<codepoint>": {"x","y","w","h","advance"}}}).
class FontAtlas {
public:
    FontAtlas() = default;
    FontAtlas(int line_height, char32_t fallback, std::map<char32_t, GlyphMask> glyphs)
        : line_height_(line_height), fallback_(fallback), glyphs_(std::move(glyphs)) {}

    static const FontAtlas& builtin();
    static FontAtlas load(const std::string& png_path, const std::string& json_path);

    int line_height() const { return line_height_; }
    bool has(char32_t cp) const { return glyphs_.count(cp) != 0; }
    // Returns the glyph for cp, or the fallback glyph when cp is not covered.
    const GlyphMask& glyph(char32_t cp) const;

private:
    int line_height_ = 0;
    char32_t fallback_ = U'?';
    std::map<char32_t, GlyphMask> glyphs_;
};

// Resolves a style's font identifier: "builtin", or a path to the atlas PNG
// with the metrics JSON alongside (same stem, .json). Atlases are cached.
const FontAtlas& resolve_atlas(const std::string& identifier);

struct TypographyStyle {
    std::string font_atlas = "builtin";
    double relative_height = 0.08;  // glyph height as a fraction of image height
    std::array<float, 3> fill{1.0f, 1.0f, 1.0f};
    std::array<float, 3> outline{0.0f, 0.0f, 0.0f};
    int outline_width_px = 1;

    void validate() const;
};

// Decodes UTF-8 to codepoints; malformed sequences become U+FFFD.
std::vector<char32_t> decode_utf8(const std::string& text);

// Draws each word at an independent uniform position (row offset drawn first,
// then column). Glyphs are nearest-neighbor scaled so the line height equals
// round(relative_height * image height); covered pixels get the fill color,
// pixels within outline_width_px (Chebyshev) of coverage get the outline
// color, everything else is bitwise unchanged. Throws if a word's footprint
// does not fit inside the image.
ImageBuffer render_typography(const ImageBuffer& image, const std::vector<std::string>& words,
                              const TypographyStyle& style, Rng& rng);

}  // namespace xadv
