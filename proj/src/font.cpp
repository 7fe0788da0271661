#include "xadv/font.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>

#include <nlohmann/json.hpp>

#include "xadv/image_io.hpp"

namespace xadv {

namespace {

#include "xadv/font_builtin.inc"

FontAtlas build_builtin() {
    // The .inc packs each glyph as a continuous MSB-first bit stream,
    // bit index r * width + c, 16 rows per glyph.
    std::map<char32_t, GlyphMask> glyphs;
    for (const BuiltinGlyph& g : kBuiltinGlyphs) {
        GlyphMask m;
        m.width = g.width;
        m.height = kBuiltinFontLineHeight;
        m.advance = g.advance;
        m.bits.resize(static_cast<std::size_t>(m.width) * m.height);
        for (int r = 0; r < m.height; ++r)
            for (int c = 0; c < m.width; ++c) {
                const unsigned bit = static_cast<unsigned>(r * m.width + c);
                const unsigned char byte = kBuiltinGlyphBits[g.offset + bit / 8];
                m.bits[static_cast<std::size_t>(r) * m.width + c] =
                    (byte >> (7 - bit % 8)) & 1;
            }
        glyphs.emplace(static_cast<char32_t>(g.codepoint), std::move(m));
    }
    return FontAtlas(kBuiltinFontLineHeight, U'?', std::move(glyphs));
}

}  // namespace

const GlyphMask& FontAtlas::glyph(char32_t cp) const {
    auto it = glyphs_.find(cp);
    if (it != glyphs_.end()) return it->second;
    it = glyphs_.find(fallback_);
    if (it == glyphs_.end()) throw Error("font atlas has no fallback glyph");
    return it->second;
}

const FontAtlas& FontAtlas::builtin() {
    static const FontAtlas atlas = build_builtin();
    return atlas;
}

FontAtlas FontAtlas::load(const std::string& png_path, const std::string& json_path) {
    const ImageBuffer sheet = load_image(png_path);
    std::ifstream f(json_path);
    if (!f) throw Error("cannot open font metrics: " + json_path);
    nlohmann::json meta;
    try {
        f >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw Error("font metrics parse error in " + json_path + ": " + e.what());
    }

    FontAtlas atlas;
    atlas.line_height_ = meta.at("line_height").get<int>();
    if (atlas.line_height_ <= 0) throw Error("font metrics: line_height must be positive");
    atlas.fallback_ = static_cast<char32_t>(meta.value("fallback", 63));
    for (const auto& [key, g] : meta.at("glyphs").items()) {
        const char32_t cp = static_cast<char32_t>(std::stoul(key));
        const int x = g.at("x").get<int>();
        const int y = g.at("y").get<int>();
        GlyphMask m;
        m.width = g.at("w").get<int>();
        m.height = g.at("h").get<int>();
        m.advance = g.at("advance").get<int>();
        if (m.width <= 0 || m.height <= 0 || m.advance <= 0 || x < 0 || y < 0 ||
            x + m.width > sheet.width() || y + m.height > sheet.height())
            throw Error("font metrics: glyph " + key + " exceeds the atlas sheet");
        m.bits.resize(static_cast<std::size_t>(m.width) * m.height);
        for (int r = 0; r < m.height; ++r)
            for (int c = 0; c < m.width; ++c)
                m.bits[static_cast<std::size_t>(r) * m.width + c] =
                    sheet.at(y + r, x + c, 0) > 0.5f ? 1 : 0;
        atlas.glyphs_.emplace(cp, std::move(m));
    }
    if (atlas.glyphs_.empty()) throw Error("font metrics: no glyphs: " + json_path);
    if (!atlas.glyphs_.count(atlas.fallback_))
        throw Error("font metrics: fallback codepoint has no glyph: " + json_path);
    return atlas;
}

const FontAtlas& resolve_atlas(const std::string& identifier) {
    if (identifier == "builtin") return FontAtlas::builtin();
    static std::mutex mu;
    static std::map<std::string, FontAtlas> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(identifier);
    if (it != cache.end()) return it->second;
    std::string json_path = identifier;
    const auto dot = json_path.rfind(".png");
    if (dot != std::string::npos && dot == json_path.size() - 4)
        json_path = json_path.substr(0, dot);
    json_path += ".json";
    auto [pos, inserted] = cache.emplace(identifier, FontAtlas::load(identifier, json_path));
    return pos->second;
}

void TypographyStyle::validate() const {
    if (!(relative_height > 0.0) || relative_height > 0.5)
        throw Error("typography: relative_height must be in (0, 0.5]");
    for (float v : fill)
        if (!(v >= 0.0f && v <= 1.0f)) throw Error("typography: fill color outside [0, 1]");
    for (float v : outline)
        if (!(v >= 0.0f && v <= 1.0f)) throw Error("typography: outline color outside [0, 1]");
    if (outline_width_px < 0) throw Error("typography: outline width must be >= 0");
}

std::vector<char32_t> decode_utf8(const std::string& text) {
    std::vector<char32_t> out;
    const auto byte = [&text](std::size_t i) { return static_cast<unsigned char>(text[i]); };
    const auto is_cont = [&](std::size_t i) {
        return i < text.size() && (byte(i) & 0xC0) == 0x80;
    };
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char b0 = byte(i);
        char32_t cp = 0xFFFD;
        std::size_t len = 1;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0 && is_cont(i + 1)) {
            cp = static_cast<char32_t>((b0 & 0x1F) << 6 | (byte(i + 1) & 0x3F));
            len = 2;
            if (cp < 0x80) cp = 0xFFFD;
        } else if ((b0 & 0xF0) == 0xE0 && is_cont(i + 1) && is_cont(i + 2)) {
            cp = static_cast<char32_t>((b0 & 0x0F) << 12 | (byte(i + 1) & 0x3F) << 6 |
                                       (byte(i + 2) & 0x3F));
            len = 3;
            if (cp < 0x800) cp = 0xFFFD;
        } else if ((b0 & 0xF8) == 0xF0 && is_cont(i + 1) && is_cont(i + 2) && is_cont(i + 3)) {
            cp = static_cast<char32_t>((b0 & 0x07) << 18 | (byte(i + 1) & 0x3F) << 12 |
                                       (byte(i + 2) & 0x3F) << 6 | (byte(i + 3) & 0x3F));
            len = 4;
            if (cp < 0x10000 || cp > 0x10FFFF) cp = 0xFFFD;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

namespace {

int scaled_size(int value, double scale) {
    return std::max(1, static_cast<int>(std::lround(value * scale)));
}

// Rescale of a glyph mask to dst_w x dst_h. Upscaling samples the nearest
// source pixel; downscaling ORs each destination cell's source window so a
// thin stroke can shrink but never vanish — point sampling at small sizes
// would frequently miss every inked pixel and render nothing.
std::vector<std::uint8_t> scale_mask(const GlyphMask& g, int dst_w, int dst_h) {
    const auto window = [](int i, int dst, int src) -> std::pair<int, int> {
        if (dst >= src) {
            const int nearest = std::min(src - 1, i * src / dst);
            return {nearest, nearest + 1};
        }
        const int lo = i * src / dst;
        const int hi = std::min(src, (i + 1) * src / dst + ((i + 1) * src % dst ? 1 : 0));
        return {lo, std::max(hi, lo + 1)};
    };
    std::vector<std::uint8_t> out(static_cast<std::size_t>(dst_w) * dst_h, 0);
    for (int r = 0; r < dst_h; ++r) {
        const auto [r0, r1] = window(r, dst_h, g.height);
        for (int c = 0; c < dst_w; ++c) {
            const auto [c0, c1] = window(c, dst_w, g.width);
            std::uint8_t covered = 0;
            for (int sr = r0; sr < r1 && !covered; ++sr)
                for (int sc = c0; sc < c1 && !covered; ++sc)
                    covered = g.bits[static_cast<std::size_t>(sr) * g.width + sc];
            out[static_cast<std::size_t>(r) * dst_w + c] = covered;
        }
    }
    return out;
}

}  // namespace

ImageBuffer render_typography(const ImageBuffer& image, const std::vector<std::string>& words,
                              const TypographyStyle& style, Rng& rng) {
    style.validate();
    if (words.empty()) throw Error("typography: word list is empty");
    const FontAtlas& atlas = resolve_atlas(style.font_atlas);

    const int H = image.height();
    const int W = image.width();
    const int target_h = std::max(1, static_cast<int>(std::lround(style.relative_height * H)));
    const double scale = static_cast<double>(target_h) / atlas.line_height();
    const int ow = style.outline_width_px;

    ImageBuffer out = image;
    for (const std::string& word : words) {
        if (word.empty()) throw Error("typography: empty word");
        const std::vector<char32_t> cps = decode_utf8(word);

        struct Placed {
            const GlyphMask* glyph;
            int x, w;
        };
        std::vector<Placed> placed;
        int cursor = 0;
        int word_w = 0;
        for (char32_t cp : cps) {
            const GlyphMask& g = atlas.glyph(cp);
            const int gw = scaled_size(g.width, scale);
            placed.push_back({&g, cursor, gw});
            word_w = std::max(word_w, cursor + gw);
            cursor += scaled_size(g.advance, scale);
        }
        word_w = std::max(word_w, cursor);

        const int fw = word_w + 2 * ow;
        const int fh = target_h + 2 * ow;
        if (fw > W || fh > H)
            throw Error("typography: word \"" + word + "\" does not fit (" + std::to_string(fw) +
                        "x" + std::to_string(fh) + " in " + std::to_string(W) + "x" +
                        std::to_string(H) + ")");

        const int y0 = static_cast<int>(rng.uniform_int(0, H - fh));
        const int x0 = static_cast<int>(rng.uniform_int(0, W - fw));

        std::vector<std::uint8_t> mask(static_cast<std::size_t>(fw) * fh, 0);
        for (const Placed& p : placed) {
            const auto bits = scale_mask(*p.glyph, p.w, target_h);
            for (int r = 0; r < target_h; ++r)
                for (int c = 0; c < p.w; ++c)
                    if (bits[static_cast<std::size_t>(r) * p.w + c])
                        mask[static_cast<std::size_t>(ow + r) * fw + ow + p.x + c] = 1;
        }

        for (int r = 0; r < fh; ++r)
            for (int c = 0; c < fw; ++c) {
                if (mask[static_cast<std::size_t>(r) * fw + c]) {
                    for (int ch = 0; ch < 3; ++ch) out.at(y0 + r, x0 + c, ch) = style.fill[ch];
                    continue;
                }
                if (ow == 0) continue;
                bool near = false;
                for (int dr = -ow; dr <= ow && !near; ++dr)
                    for (int dc = -ow; dc <= ow && !near; ++dc) {
                        const int rr = r + dr;
                        const int cc = c + dc;
                        if (rr < 0 || rr >= fh || cc < 0 || cc >= fw) continue;
                        near = mask[static_cast<std::size_t>(rr) * fw + cc] != 0;
                    }
                if (near)
                    for (int ch = 0; ch < 3; ++ch) out.at(y0 + r, x0 + c, ch) = style.outline[ch];
            }
    }
    return out;
}

}  // namespace xadv
