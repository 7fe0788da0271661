#include "xadv/augment.hpp"

#include <algorithm>
#include <cmath>

namespace xadv {

std::string to_string(AugMethod method) {
    switch (method) {
        case AugMethod::None: return "none";
        case AugMethod::Dim: return "dim";
        case AugMethod::Sim: return "sim";
        case AugMethod::Bc: return "bc";
        case AugMethod::Tim: return "tim";
        case AugMethod::Sia: return "sia";
        case AugMethod::Admix: return "admix";
        case AugMethod::Aip: return "aip";
        case AugMethod::Tatm: return "tatm";
    }
    return "none";
}

AugMethod parse_aug_method(const std::string& name) {
    for (AugMethod m : all_aug_methods())
        if (to_string(m) == name) return m;
    if (name == "none") return AugMethod::None;
    throw Error("unknown augmentation method: \"" + name + "\"");
}

const std::vector<AugMethod>& all_aug_methods() {
    static const std::vector<AugMethod> methods = {
        AugMethod::Dim, AugMethod::Sim, AugMethod::Bc,    AugMethod::Tim,
        AugMethod::Sia, AugMethod::Admix, AugMethod::Aip, AugMethod::Tatm};
    return methods;
}

bool is_semantic(AugMethod method) {
    return method == AugMethod::Admix || method == AugMethod::Aip || method == AugMethod::Tatm;
}

void AugmentationSpec::validate() const {
    switch (method) {
        case AugMethod::None:
            break;
        case AugMethod::Dim:
            if (dim_probability < 0.0 || dim_probability > 1.0)
                throw Error("dim: probability outside [0, 1]");
            if (!(dim_scale_min > 0.0) || dim_scale_min > dim_scale_max || dim_scale_max > 1.0)
                throw Error("dim: scale range must satisfy 0 < min <= max <= 1");
            break;
        case AugMethod::Sim:
            if (sim_max_power < 0) throw Error("sim: max power must be >= 0");
            break;
        case AugMethod::Bc:
            if (!(bc_factor_min > 0.0) || bc_factor_min > bc_factor_max)
                throw Error("bc: factor range must satisfy 0 < min <= max");
            break;
        case AugMethod::Tim:
            if (tim_max_shift_frac < 0.0 || tim_max_shift_frac > 0.5)
                throw Error("tim: max shift fraction outside [0, 0.5]");
            break;
        case AugMethod::Sia:
            if (sia_grid < 1) throw Error("sia: grid must be >= 1");
            if (!(sia_block_scale > 0.0) || sia_block_scale > 1.0)
                throw Error("sia: block scale outside (0, 1]");
            if (sia_max_shift_frac < 0.0 || sia_max_shift_frac > 0.5)
                throw Error("sia: max shift fraction outside [0, 0.5]");
            break;
        case AugMethod::Admix:
            if (!(admix_strength >= 0.0)) throw Error("admix: strength must be >= 0");
            if (!patches || patches->entries.empty()) throw Error("admix: patch set required");
            break;
        case AugMethod::Aip:
            if (!(aip_patch_scale > 0.0) || aip_patch_scale > 0.5)
                throw Error("aip: patch scale outside (0, 0.5]");
            if (aip_patch_count < 1) throw Error("aip: patch count must be >= 1");
            if (!patches || patches->entries.empty()) throw Error("aip: patch set required");
            break;
        case AugMethod::Tatm:
            if (tatm_amount < 1) throw Error("tatm: amount must be >= 1");
            typography.validate();
            if (tatm_fixed_words.empty() && (!words || words->entries.empty()))
                throw Error("tatm: word set required");
            break;
    }
}

namespace {

int scaled_dim(int value, double factor) {
    return std::max(1, static_cast<int>(std::lround(value * factor)));
}

inline int wrap_index(int i, int n) {
    const int m = i % n;
    return m < 0 ? m + n : m;
}

ImageBuffer apply_dim(const ImageBuffer& image, const AugmentationSpec& spec, Rng& rng) {
    if (rng.uniform() >= spec.dim_probability) return image;
    const double f = rng.uniform(spec.dim_scale_min, spec.dim_scale_max);
    const int nh = scaled_dim(image.height(), f);
    const int nw = scaled_dim(image.width(), f);
    const ImageBuffer small = resize_bilinear(image, nh, nw);
    const int dy = static_cast<int>(rng.uniform_int(0, image.height() - nh));
    const int dx = static_cast<int>(rng.uniform_int(0, image.width() - nw));
    ImageBuffer out(image.height(), image.width());
    for (int r = 0; r < nh; ++r)
        for (int c = 0; c < nw; ++c)
            for (int ch = 0; ch < 3; ++ch) out.at(dy + r, dx + c, ch) = small.at(r, c, ch);
    return out;
}

ImageBuffer apply_sim(const ImageBuffer& image, const AugmentationSpec& spec, Rng& rng) {
    const auto i = rng.uniform_int(0, spec.sim_max_power);
    const float factor = std::ldexp(1.0f, -static_cast<int>(i));
    ImageBuffer out = image;
    for (float& v : out.values()) v *= factor;
    return out;
}

ImageBuffer apply_bc(const ImageBuffer& image, const AugmentationSpec& spec, Rng& rng) {
    const double f = rng.uniform(spec.bc_factor_min, spec.bc_factor_max);
    ImageBuffer out = image;
    for (float& v : out.values())
        v = std::clamp(static_cast<float>(v * f), 0.0f, 1.0f);
    return out;
}

// out(r, c) = in((r - dy) mod H, (c - dx) mod W); dx drawn first, then dy.
ImageBuffer apply_tim(const ImageBuffer& image, const AugmentationSpec& spec, Rng& rng) {
    const int max_dx =
        static_cast<int>(std::lround(spec.tim_max_shift_frac * image.width()));
    const int max_dy =
        static_cast<int>(std::lround(spec.tim_max_shift_frac * image.height()));
    const int dx = static_cast<int>(rng.uniform_int(-max_dx, max_dx));
    const int dy = static_cast<int>(rng.uniform_int(-max_dy, max_dy));
    ImageBuffer out(image.height(), image.width());
    for (int r = 0; r < image.height(); ++r) {
        const int sr = wrap_index(r - dy, image.height());
        for (int c = 0; c < image.width(); ++c) {
            const int sc = wrap_index(c - dx, image.width());
            for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = image.at(sr, sc, ch);
        }
    }
    return out;
}

// Block transforms for sia, drawn as uniform_int(0, 5) per block in row-major
// block order: 0 identity, 1 horizontal flip, 2 vertical flip, 3 rotate 180,
// 4 shrink to sia_block_scale and zero-pad centered, 5 wrap-around shift.
ImageBuffer apply_sia(const ImageBuffer& image, const AugmentationSpec& spec, Rng& rng) {
    ImageBuffer out = image;
    const int G = spec.sia_grid;
    const int H = image.height();
    const int W = image.width();
    for (int bi = 0; bi < G; ++bi) {
        const int r0 = bi * H / G;
        const int r1 = (bi + 1) * H / G;
        for (int bj = 0; bj < G; ++bj) {
            const int c0 = bj * W / G;
            const int c1 = (bj + 1) * W / G;
            const int bh = r1 - r0;
            const int bw = c1 - c0;
            if (bh <= 0 || bw <= 0) continue;

            ImageBuffer block(bh, bw);
            for (int r = 0; r < bh; ++r)
                for (int c = 0; c < bw; ++c)
                    for (int ch = 0; ch < 3; ++ch)
                        block.at(r, c, ch) = image.at(r0 + r, c0 + c, ch);

            const auto kind = rng.uniform_int(0, 5);
            ImageBuffer result(bh, bw);
            switch (kind) {
                case 0:
                    result = block;
                    break;
                case 1:
                    for (int r = 0; r < bh; ++r)
                        for (int c = 0; c < bw; ++c)
                            for (int ch = 0; ch < 3; ++ch)
                                result.at(r, c, ch) = block.at(r, bw - 1 - c, ch);
                    break;
                case 2:
                    for (int r = 0; r < bh; ++r)
                        for (int c = 0; c < bw; ++c)
                            for (int ch = 0; ch < 3; ++ch)
                                result.at(r, c, ch) = block.at(bh - 1 - r, c, ch);
                    break;
                case 3:
                    for (int r = 0; r < bh; ++r)
                        for (int c = 0; c < bw; ++c)
                            for (int ch = 0; ch < 3; ++ch)
                                result.at(r, c, ch) = block.at(bh - 1 - r, bw - 1 - c, ch);
                    break;
                case 4: {
                    const int nh = scaled_dim(bh, spec.sia_block_scale);
                    const int nw = scaled_dim(bw, spec.sia_block_scale);
                    const ImageBuffer small = resize_bilinear(block, nh, nw);
                    const int oy = (bh - nh) / 2;
                    const int ox = (bw - nw) / 2;
                    for (int r = 0; r < nh; ++r)
                        for (int c = 0; c < nw; ++c)
                            for (int ch = 0; ch < 3; ++ch)
                                result.at(oy + r, ox + c, ch) = small.at(r, c, ch);
                    break;
                }
                case 5: {
                    const int mx = static_cast<int>(std::lround(spec.sia_max_shift_frac * bw));
                    const int my = static_cast<int>(std::lround(spec.sia_max_shift_frac * bh));
                    const int dx = static_cast<int>(rng.uniform_int(-mx, mx));
                    const int dy = static_cast<int>(rng.uniform_int(-my, my));
                    for (int r = 0; r < bh; ++r) {
                        const int sr = wrap_index(r - dy, bh);
                        for (int c = 0; c < bw; ++c) {
                            const int sc = wrap_index(c - dx, bw);
                            for (int ch = 0; ch < 3; ++ch)
                                result.at(r, c, ch) = block.at(sr, sc, ch);
                        }
                    }
                    break;
                }
            }
            for (int r = 0; r < bh; ++r)
                for (int c = 0; c < bw; ++c)
                    for (int ch = 0; ch < 3; ++ch)
                        out.at(r0 + r, c0 + c, ch) = result.at(r, c, ch);
        }
    }
    return out;
}

ImageBuffer apply_admix(const ImageBuffer& image, const AugmentationSpec& spec, Rng& rng) {
    const auto idx =
        rng.uniform_int(0, static_cast<std::int64_t>(spec.patches->entries.size()) - 1);
    const ImageBuffer mixin =
        resize_bilinear(spec.patches->entries[static_cast<std::size_t>(idx)], image.height(),
                        image.width());
    ImageBuffer out(image.height(), image.width());
    const float* a = image.data();
    const float* b = mixin.data();
    float* dst = out.data();
    const float s = static_cast<float>(spec.admix_strength);
    for (std::size_t i = 0; i < image.size(); ++i)
        dst[i] = std::clamp(a[i] + s * b[i], 0.0f, 1.0f);
    return out;
}

ImageBuffer apply_aip(const ImageBuffer& image, const AugmentationSpec& spec, Rng& rng) {
    ImageBuffer out = image;
    for (int k = 0; k < spec.aip_patch_count; ++k) {
        const auto idx =
            rng.uniform_int(0, static_cast<std::int64_t>(spec.patches->entries.size()) - 1);
        out = paste_patch(out, spec.patches->entries[static_cast<std::size_t>(idx)],
                          spec.aip_patch_scale, rng);
    }
    return out;
}

ImageBuffer apply_tatm(const ImageBuffer& image, const AugmentationSpec& spec, Rng& rng) {
    std::vector<std::string> chosen = spec.tatm_fixed_words;
    if (chosen.empty()) chosen = sample_words(*spec.words, spec.tatm_pos, spec.tatm_amount, rng);
    return render_typography(image, chosen, spec.typography, rng);
}

}  // namespace

ImageBuffer augment(const ImageBuffer& image, const AugmentationSpec& spec, Rng& rng) {
    spec.validate();
    switch (spec.method) {
        case AugMethod::None: return image;
        case AugMethod::Dim: return apply_dim(image, spec, rng);
        case AugMethod::Sim: return apply_sim(image, spec, rng);
        case AugMethod::Bc: return apply_bc(image, spec, rng);
        case AugMethod::Tim: return apply_tim(image, spec, rng);
        case AugMethod::Sia: return apply_sia(image, spec, rng);
        case AugMethod::Admix: return apply_admix(image, spec, rng);
        case AugMethod::Aip: return apply_aip(image, spec, rng);
        case AugMethod::Tatm: return apply_tatm(image, spec, rng);
    }
    throw Error("augment: unhandled method");
}

ImageBuffer paste_patch(const ImageBuffer& image, const ImageBuffer& patch, double scale,
                        Rng& rng) {
    if (!(scale > 0.0) || scale > 0.5) throw Error("paste_patch: scale outside (0, 0.5]");
    if (patch.height() <= 0 || patch.width() <= 0) throw Error("paste_patch: empty patch");
    const int long_side =
        std::max(1, static_cast<int>(std::lround(scale * std::min(image.height(), image.width()))));
    int nh, nw;
    if (patch.height() >= patch.width()) {
        nh = long_side;
        nw = std::max(1, static_cast<int>(std::lround(
                             static_cast<double>(patch.width()) * long_side / patch.height())));
    } else {
        nw = long_side;
        nh = std::max(1, static_cast<int>(std::lround(
                             static_cast<double>(patch.height()) * long_side / patch.width())));
    }
    if (nh > image.height() || nw > image.width())
        throw Error("paste_patch: scaled patch exceeds the image");
    const ImageBuffer small = resize_bilinear(patch, nh, nw);
    const int y0 = static_cast<int>(rng.uniform_int(0, image.height() - nh));
    const int x0 = static_cast<int>(rng.uniform_int(0, image.width() - nw));
    ImageBuffer out = image;
    for (int r = 0; r < nh; ++r)
        for (int c = 0; c < nw; ++c)
            for (int ch = 0; ch < 3; ++ch) out.at(y0 + r, x0 + c, ch) = small.at(r, c, ch);
    return out;
}

}  // namespace xadv
