#pragma once

#include <string>
#include <vector>

#include "xadv/image.hpp"
#include "xadv/rng.hpp"

namespace xadv {

enum class DefenseKind { None, GaussianNoise, GaussianBlur };

std::string to_string(DefenseKind kind);
DefenseKind parse_defense_kind(const std::string& name);

struct DefenseSpec {
    DefenseKind kind = DefenseKind::None;

    // gaussian_noise
    double noise_mean = 0.0;
    double noise_std = 0.005;

    // gaussian_blur
    int kernel_size = 3;  // odd
    double sigma = 0.1;

    void validate() const;
};

// Adds i.i.d. Gaussian noise per element (row-major draw order) and clamps.
// With noise_std == 0 and noise_mean == 0 the image passes through bitwise
// unchanged.
ImageBuffer apply_gaussian_noise(const ImageBuffer& image, const DefenseSpec& spec, Rng& rng);

// 1-D kernel w_i = exp(-(i - c)^2 / (2 sigma^2)), normalized to sum 1.
std::vector<double> gaussian_kernel(int size, double sigma);

// Separable Gaussian blur with replicate edge handling. The double-precision
// value path is exposed so results can be compared against a dense 2-D
// convolution without float casts in the way.
std::vector<double> gaussian_blur_values(const ImageBuffer& image, int kernel_size, double sigma);
ImageBuffer apply_gaussian_blur(const ImageBuffer& image, const DefenseSpec& spec);

// Dispatches on spec.kind; None returns the image unchanged.
ImageBuffer apply_defense(const ImageBuffer& image, const DefenseSpec& spec, Rng& rng);

}  // namespace xadv
