#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xadv/image.hpp"

namespace xadv {

// Strict 8-bit RGB PNG reader. Anything else (palette, grayscale, alpha,
// 16-bit) is rejected with a message naming the offending property.
// Decoded bytes become floats as v / 255.
ImageBuffer load_image(const std::string& path);

// Writes an 8-bit RGB PNG; each value is quantized as round(v * 255) with
// halves rounding away from zero. The image must already be in [0, 1].
void save_image(const ImageBuffer& image, const std::string& path);

// Raw float sidecar: magic "XADV", then height/width/channels as u32 little
// endian, then height*width*channels f32 little endian. Carries exact float
// data where PNG quantization would lose it (checkpoints, gradient transport).
struct SidecarData {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t channels = 0;
    std::vector<float> values;
};

std::vector<std::uint8_t> encode_sidecar(const SidecarData& data);
SidecarData decode_sidecar(const std::uint8_t* bytes, std::size_t size);

void save_sidecar(const ImageBuffer& image, const std::string& path);
ImageBuffer load_sidecar(const std::string& path);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
// Writes to path + ".tmp" then renames, so readers never observe a partial file.
void write_file_atomic(const std::string& path, const void* bytes, std::size_t size);

std::string sha256_hex(const std::uint8_t* bytes, std::size_t size);
std::string sha256_file_hex(const std::string& path);

std::string base64_encode(const std::uint8_t* bytes, std::size_t size);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace xadv
