#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace xadv {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// H x W x 3 float image, row-major (row, column, channel). Values are kept in
// [0, 1]; constructors reject non-finite data, and clamp_unit() is the
// enforcement point after any arithmetic that can leave the range.
class ImageBuffer {
public:
    static constexpr int kChannels = 3;

    ImageBuffer() = default;
    ImageBuffer(int height, int width);
    ImageBuffer(int height, int width, std::vector<float> data);

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }

    float& at(int r, int c, int ch) { return data_[idx(r, c, ch)]; }
    float at(int r, int c, int ch) const { return data_[idx(r, c, ch)]; }

    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }
    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    // True iff every element lies in [0, 1].
    bool in_unit_range() const;
    void require_unit_range(const std::string& context) const;

    // Bitwise comparison, so -0.0f and 0.0f count as different.
    bool operator==(const ImageBuffer& other) const;

private:
    std::size_t idx(int r, int c, int ch) const {
        return (static_cast<std::size_t>(r) * width_ + c) * kChannels + ch;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<float> data_;
};

// Additive perturbation paired with an image of the same shape. Values are
// double so the update/projection arithmetic is exact to well below the
// 8-bit quantization step.
struct Perturbation {
    int height = 0;
    int width = 0;
    std::vector<double> data;
    double budget = 0.0;

    static Perturbation zeros(int height, int width, double budget);
    double max_abs() const;
};

// Project every element of delta into [-epsilon, epsilon]. Throws on
// non-finite elements (corrupted optimization state) or epsilon <= 0.
Perturbation clip_linf(const Perturbation& delta, double epsilon);

// Clamp every element into [0, 1]; in-range elements pass through unchanged.
ImageBuffer clamp_unit(const ImageBuffer& image);

// clamp_unit(image + delta); shapes must match.
ImageBuffer compose_clamped(const ImageBuffer& image, const Perturbation& delta);

// Bilinear resize with half-pixel-center sampling; output is clamped to [0, 1].
ImageBuffer resize_bilinear(const ImageBuffer& image, int out_height, int out_width);

}  // namespace xadv
