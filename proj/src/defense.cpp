#include "xadv/defense.hpp"

#include <algorithm>
#include <cmath>

namespace xadv {

std::string to_string(DefenseKind kind) {
    switch (kind) {
        case DefenseKind::None: return "none";
        case DefenseKind::GaussianNoise: return "gaussian_noise";
        case DefenseKind::GaussianBlur: return "gaussian_blur";
    }
    return "none";
}

DefenseKind parse_defense_kind(const std::string& name) {
    if (name == "none") return DefenseKind::None;
    if (name == "gaussian_noise" || name == "noise") return DefenseKind::GaussianNoise;
    if (name == "gaussian_blur" || name == "blur") return DefenseKind::GaussianBlur;
    throw Error("unknown defense: \"" + name + "\"");
}

void DefenseSpec::validate() const {
    switch (kind) {
        case DefenseKind::None:
            break;
        case DefenseKind::GaussianNoise:
            if (!(noise_std >= 0.0)) throw Error("defense: noise std must be >= 0");
            if (!std::isfinite(noise_mean)) throw Error("defense: noise mean must be finite");
            break;
        case DefenseKind::GaussianBlur:
            if (kernel_size < 1 || kernel_size % 2 == 0)
                throw Error("defense: kernel size must be odd and >= 1");
            if (!(sigma > 0.0)) throw Error("defense: sigma must be positive");
            break;
    }
}

ImageBuffer apply_gaussian_noise(const ImageBuffer& image, const DefenseSpec& spec, Rng& rng) {
    spec.validate();
    ImageBuffer out = image;
    for (float& v : out.values()) {
        const double noisy = static_cast<double>(v) + rng.gaussian(spec.noise_mean, spec.noise_std);
        v = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
    }
    return out;
}

std::vector<double> gaussian_kernel(int size, double sigma) {
    if (size < 1 || size % 2 == 0) throw Error("gaussian kernel: size must be odd and >= 1");
    if (!(sigma > 0.0)) throw Error("gaussian kernel: sigma must be positive");
    std::vector<double> k(static_cast<std::size_t>(size));
    const int c = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - c;
        k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

std::vector<double> gaussian_blur_values(const ImageBuffer& image, int kernel_size, double sigma) {
    const std::vector<double> k = gaussian_kernel(kernel_size, sigma);
    const int H = image.height();
    const int W = image.width();
    if (kernel_size > H || kernel_size > W)
        throw Error("gaussian blur: kernel size " + std::to_string(kernel_size) +
                    " exceeds image " + std::to_string(H) + "x" + std::to_string(W));
    const int c = kernel_size / 2;

    // Horizontal pass with replicated columns, then vertical with replicated
    // rows; this equals a dense 2-D convolution over the edge-extended image.
    std::vector<double> tmp(image.size());
    for (int r = 0; r < H; ++r)
        for (int col = 0; col < W; ++col)
            for (int ch = 0; ch < 3; ++ch) {
                double s = 0.0;
                for (int i = 0; i < kernel_size; ++i) {
                    const int cc = std::clamp(col + i - c, 0, W - 1);
                    s += k[static_cast<std::size_t>(i)] * image.at(r, cc, ch);
                }
                tmp[(static_cast<std::size_t>(r) * W + col) * 3 + ch] = s;
            }

    std::vector<double> out(image.size());
    for (int r = 0; r < H; ++r)
        for (int col = 0; col < W; ++col)
            for (int ch = 0; ch < 3; ++ch) {
                double s = 0.0;
                for (int i = 0; i < kernel_size; ++i) {
                    const int rr = std::clamp(r + i - c, 0, H - 1);
                    s += k[static_cast<std::size_t>(i)] *
                         tmp[(static_cast<std::size_t>(rr) * W + col) * 3 + ch];
                }
                out[(static_cast<std::size_t>(r) * W + col) * 3 + ch] = s;
            }
    return out;
}

ImageBuffer apply_gaussian_blur(const ImageBuffer& image, const DefenseSpec& spec) {
    spec.validate();
    const std::vector<double> vals = gaussian_blur_values(image, spec.kernel_size, spec.sigma);
    ImageBuffer out(image.height(), image.width());
    float* dst = out.data();
    for (std::size_t i = 0; i < vals.size(); ++i)
        dst[i] = static_cast<float>(std::clamp(vals[i], 0.0, 1.0));
    return out;
}

ImageBuffer apply_defense(const ImageBuffer& image, const DefenseSpec& spec, Rng& rng) {
    spec.validate();
    switch (spec.kind) {
        case DefenseKind::None: return image;
        case DefenseKind::GaussianNoise: return apply_gaussian_noise(image, spec, rng);
        case DefenseKind::GaussianBlur: return apply_gaussian_blur(image, spec);
    }
    throw Error("apply_defense: unhandled kind");
}

}  // namespace xadv
