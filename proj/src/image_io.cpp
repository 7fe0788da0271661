#include "xadv/image_io.hpp"

#include <png.h>

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>

namespace xadv {

namespace {

struct PngReadCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngReadCloser() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWriteCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngWriteCloser() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint32_t get_u32_le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

constexpr char kB64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

ImageBuffer load_image(const std::string& path) {
    PngReadCloser h;
    h.fp = std::fopen(path.c_str(), "rb");
    if (!h.fp) throw Error("cannot open image file: " + path);

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, h.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw Error("not a PNG file: " + path);

    h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!h.png) throw Error("png_create_read_struct failed");
    h.info = png_create_info_struct(h.png);
    if (!h.info) throw Error("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(h.png))) throw Error("PNG decode error: " + path);

    png_init_io(h.png, h.fp);
    png_set_sig_bytes(h.png, 8);
    png_read_info(h.png, h.info);

    const int bit_depth = png_get_bit_depth(h.png, h.info);
    const int color_type = png_get_color_type(h.png, h.info);
    if (bit_depth != 8)
        throw Error("unsupported PNG bit depth " + std::to_string(bit_depth) + " (want 8): " + path);
    if (color_type != PNG_COLOR_TYPE_RGB) {
        std::string what;
        switch (color_type) {
            case PNG_COLOR_TYPE_GRAY: what = "grayscale"; break;
            case PNG_COLOR_TYPE_PALETTE: what = "palette"; break;
            case PNG_COLOR_TYPE_RGB_ALPHA: what = "RGBA"; break;
            case PNG_COLOR_TYPE_GRAY_ALPHA: what = "gray+alpha"; break;
            default: what = "color type " + std::to_string(color_type);
        }
        throw Error("unsupported PNG " + what + " (want 8-bit RGB): " + path);
    }

    const int height = static_cast<int>(png_get_image_height(h.png, h.info));
    const int width = static_cast<int>(png_get_image_width(h.png, h.info));
    ImageBuffer out(height, width);

    std::vector<std::uint8_t> row(static_cast<std::size_t>(width) * 3);
    for (int r = 0; r < height; ++r) {
        png_read_row(h.png, row.data(), nullptr);
        for (int c = 0; c < width; ++c)
            for (int ch = 0; ch < 3; ++ch)
                out.at(r, c, ch) = static_cast<float>(row[c * 3 + ch]) / 255.0f;
    }
    png_read_end(h.png, nullptr);
    return out;
}

void save_image(const ImageBuffer& image, const std::string& path) {
    image.require_unit_range("save_image");
    const std::string tmp = path + ".tmp";

    {
        PngWriteCloser h;
        h.fp = std::fopen(tmp.c_str(), "wb");
        if (!h.fp) throw Error("cannot open file for writing: " + tmp);
        h.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!h.png) throw Error("png_create_write_struct failed");
        h.info = png_create_info_struct(h.png);
        if (!h.info) throw Error("png_create_info_struct failed");
        if (setjmp(png_jmpbuf(h.png))) throw Error("PNG encode error: " + path);

        png_init_io(h.png, h.fp);
        png_set_IHDR(h.png, h.info, image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(h.png, h.info);

        std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width()) * 3);
        for (int r = 0; r < image.height(); ++r) {
            for (int c = 0; c < image.width(); ++c)
                for (int ch = 0; ch < 3; ++ch) {
                    const double q = std::round(static_cast<double>(image.at(r, c, ch)) * 255.0);
                    row[c * 3 + ch] = static_cast<std::uint8_t>(q);
                }
            png_write_row(h.png, row.data());
        }
        png_write_end(h.png, nullptr);
    }

    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("rename " + tmp + " -> " + path + " failed: " + ec.message());
}

std::vector<std::uint8_t> encode_sidecar(const SidecarData& data) {
    if (data.values.size() !=
        static_cast<std::size_t>(data.height) * data.width * data.channels)
        throw Error("sidecar value count does not match header shape");
    std::vector<std::uint8_t> out;
    out.reserve(16 + data.values.size() * 4);
    out.insert(out.end(), {'X', 'A', 'D', 'V'});
    put_u32_le(out, data.height);
    put_u32_le(out, data.width);
    put_u32_le(out, data.channels);
    static_assert(sizeof(float) == 4);
    for (float v : data.values) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32_le(out, bits);
    }
    return out;
}

SidecarData decode_sidecar(const std::uint8_t* bytes, std::size_t size) {
    if (size < 16 || std::memcmp(bytes, "XADV", 4) != 0)
        throw Error("sidecar: missing XADV magic");
    SidecarData data;
    data.height = get_u32_le(bytes + 4);
    data.width = get_u32_le(bytes + 8);
    data.channels = get_u32_le(bytes + 12);
    const std::uint64_t count =
        static_cast<std::uint64_t>(data.height) * data.width * data.channels;
    if (size != 16 + count * 4)
        throw Error("sidecar: payload size mismatch (header says " + std::to_string(count) +
                    " floats)");
    data.values.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t bits = get_u32_le(bytes + 16 + i * 4);
        std::memcpy(&data.values[i], &bits, 4);
    }
    return data;
}

void save_sidecar(const ImageBuffer& image, const std::string& path) {
    SidecarData data;
    data.height = static_cast<std::uint32_t>(image.height());
    data.width = static_cast<std::uint32_t>(image.width());
    data.channels = ImageBuffer::kChannels;
    data.values.assign(image.values().begin(), image.values().end());
    const auto bytes = encode_sidecar(data);
    write_file_atomic(path, bytes.data(), bytes.size());
}

ImageBuffer load_sidecar(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    const SidecarData data = decode_sidecar(bytes.data(), bytes.size());
    if (data.channels != ImageBuffer::kChannels)
        throw Error("sidecar: expected 3 channels, got " + std::to_string(data.channels) + ": " +
                    path);
    return ImageBuffer(static_cast<int>(data.height), static_cast<int>(data.width), data.values);
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    if (f.bad()) throw Error("read error: " + path);
    return bytes;
}

void write_file_atomic(const std::string& path, const void* bytes, std::size_t size) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot open file for writing: " + tmp);
        f.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(size));
        if (!f) throw Error("write error: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("rename " + tmp + " -> " + path + " failed: " + ec.message());
}

std::string sha256_hex(const std::uint8_t* bytes, std::size_t size) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes, size, digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string sha256_file_hex(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    return sha256_hex(bytes.data(), bytes.size());
}

std::string base64_encode(const std::uint8_t* bytes, std::size_t size) {
    std::string out;
    out.reserve((size + 2) / 3 * 4);
    for (std::size_t i = 0; i < size; i += 3) {
        const std::uint32_t b0 = bytes[i];
        const std::uint32_t b1 = i + 1 < size ? bytes[i + 1] : 0;
        const std::uint32_t b2 = i + 2 < size ? bytes[i + 2] : 0;
        const std::uint32_t triple = (b0 << 16) | (b1 << 8) | b2;
        out.push_back(kB64Chars[(triple >> 18) & 0x3f]);
        out.push_back(kB64Chars[(triple >> 12) & 0x3f]);
        out.push_back(i + 1 < size ? kB64Chars[(triple >> 6) & 0x3f] : '=');
        out.push_back(i + 2 < size ? kB64Chars[triple & 0x3f] : '=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    static const auto table = [] {
        std::array<int, 256> t;
        t.fill(-1);
        for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(kB64Chars[i])] = i;
        return t;
    }();
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = table[static_cast<unsigned char>(c)];
        if (v < 0) throw Error("base64: invalid character");
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
        }
    }
    return out;
}

}  // namespace xadv
