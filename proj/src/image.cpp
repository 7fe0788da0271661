#include "xadv/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace xadv {

namespace {

void check_shape(int height, int width) {
    if (height <= 0 || width <= 0)
        throw Error("image shape must be positive, got " + std::to_string(height) + "x" +
                    std::to_string(width));
}

}  // namespace

ImageBuffer::ImageBuffer(int height, int width) : height_(height), width_(width) {
    check_shape(height, width);
    data_.assign(static_cast<std::size_t>(height) * width * kChannels, 0.0f);
}

ImageBuffer::ImageBuffer(int height, int width, std::vector<float> data)
    : height_(height), width_(width), data_(std::move(data)) {
    check_shape(height, width);
    const std::size_t expect = static_cast<std::size_t>(height) * width * kChannels;
    if (data_.size() != expect)
        throw Error("image data size " + std::to_string(data_.size()) + " does not match " +
                    std::to_string(height) + "x" + std::to_string(width) + "x3");
    for (float v : data_)
        if (!std::isfinite(v)) throw Error("image data contains a non-finite value");
}

bool ImageBuffer::in_unit_range() const {
    for (float v : data_)
        if (v < 0.0f || v > 1.0f) return false;
    return true;
}

void ImageBuffer::require_unit_range(const std::string& context) const {
    if (!in_unit_range()) throw Error(context + ": image values outside [0, 1]");
}

bool ImageBuffer::operator==(const ImageBuffer& other) const {
    if (height_ != other.height_ || width_ != other.width_) return false;
    return std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

Perturbation Perturbation::zeros(int height, int width, double budget) {
    check_shape(height, width);
    Perturbation p;
    p.height = height;
    p.width = width;
    p.budget = budget;
    p.data.assign(static_cast<std::size_t>(height) * width * ImageBuffer::kChannels, 0.0);
    return p;
}

double Perturbation::max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
}

Perturbation clip_linf(const Perturbation& delta, double epsilon) {
    if (!(epsilon > 0.0)) throw Error("clip_linf: epsilon must be positive");
    Perturbation out = delta;
    for (double& v : out.data) {
        if (!std::isfinite(v)) throw Error("clip_linf: non-finite perturbation element");
        v = std::clamp(v, -epsilon, epsilon);
    }
    out.budget = epsilon;
    return out;
}

ImageBuffer clamp_unit(const ImageBuffer& image) {
    ImageBuffer out = image;
    for (float& v : out.values()) v = std::clamp(v, 0.0f, 1.0f);
    return out;
}

ImageBuffer compose_clamped(const ImageBuffer& image, const Perturbation& delta) {
    if (image.height() != delta.height || image.width() != delta.width)
        throw Error("compose_clamped: image and perturbation shapes differ");
    ImageBuffer out(image.height(), image.width());
    const float* src = image.data();
    float* dst = out.data();
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double v = static_cast<double>(src[i]) + delta.data[i];
        dst[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

ImageBuffer resize_bilinear(const ImageBuffer& image, int out_height, int out_width) {
    check_shape(out_height, out_width);
    ImageBuffer out(out_height, out_width);
    const int ih = image.height();
    const int iw = image.width();
    const double sy = static_cast<double>(ih) / out_height;
    const double sx = static_cast<double>(iw) / out_width;
    for (int r = 0; r < out_height; ++r) {
        double fy = (r + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(ih - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, ih - 1);
        const double wy = fy - y0;
        for (int c = 0; c < out_width; ++c) {
            double fx = (c + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(iw - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, iw - 1);
            const double wx = fx - x0;
            for (int ch = 0; ch < ImageBuffer::kChannels; ++ch) {
                const double top = (1.0 - wx) * image.at(y0, x0, ch) + wx * image.at(y0, x1, ch);
                const double bot = (1.0 - wx) * image.at(y1, x0, ch) + wx * image.at(y1, x1, ch);
                const double v = (1.0 - wy) * top + wy * bot;
                out.at(r, c, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return out;
}

}  // namespace xadv
