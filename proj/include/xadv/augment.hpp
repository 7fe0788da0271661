#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xadv/font.hpp"
#include "xadv/image.hpp"
#include "xadv/rng.hpp"
#include "xadv/wordset.hpp"

namespace xadv {

// Pixel-level methods rearrange or rescale existing pixel statistics;
// semantic methods (admix, aip, tatm) introduce content foreign to the image.
enum class AugMethod { None, Dim, Sim, Bc, Tim, Sia, Admix, Aip, Tatm };

std::string to_string(AugMethod method);
AugMethod parse_aug_method(const std::string& name);
const std::vector<AugMethod>& all_aug_methods();
bool is_semantic(AugMethod method);

// Parameters for every method live side by side; only the fields of the
// selected method are read. Defaults follow the standard settings for each
// method.
struct AugmentationSpec {
    AugMethod method = AugMethod::None;

    // dim: with probability dim_probability, resize by a factor drawn from
    // [dim_scale_min, dim_scale_max] and zero-pad back at a uniform offset.
    double dim_probability = 0.7;
    double dim_scale_min = 0.9;
    double dim_scale_max = 1.0;

    // sim: scale intensities by 1 / 2^i, i uniform in [0, sim_max_power].
    int sim_max_power = 4;

    // bc: multiply by a factor from [bc_factor_min, bc_factor_max], clamp.
    double bc_factor_min = 0.7;
    double bc_factor_max = 1.3;

    // tim: wrap-around translation, |dx| <= round(tim_max_shift_frac * W),
    // |dy| <= round(tim_max_shift_frac * H).
    double tim_max_shift_frac = 0.1;

    // sia: sia_grid x sia_grid blocks, each independently transformed.
    int sia_grid = 3;
    double sia_block_scale = 0.8;
    double sia_max_shift_frac = 0.2;

    // admix: clamp(x + admix_strength * x'), x' a patch resized to full size.
    double admix_strength = 0.2;

    // aip: paste aip_patch_count patches, each scaled so its long side is
    // aip_patch_scale * min(H, W), at uniform positions.
    double aip_patch_scale = 0.2;
    int aip_patch_count = 1;

    // tatm: render tatm_amount words drawn from the word set (filtered by
    // tatm_pos). Words are drawn fresh on every call; pre-filling
    // tatm_fixed_words pins them instead.
    int tatm_amount = 3;
    std::optional<PartOfSpeech> tatm_pos = PartOfSpeech::Noun;
    std::vector<std::string> tatm_fixed_words;
    TypographyStyle typography;

    std::shared_ptr<const WordSet> words;      // tatm
    std::shared_ptr<const PatchSet> patches;   // admix, aip

    // Checks ranges and that the selected method's resources are present.
    void validate() const;
};

// Applies one draw of the selected augmentation. Consumes from rng only what
// the method needs, so a shared stream stays aligned across iterations.
// Output has the input's shape and stays in [0, 1].
ImageBuffer augment(const ImageBuffer& image, const AugmentationSpec& spec, Rng& rng);

// Resizes the patch to long side max(1, round(scale * min(H, W))), keeping
// aspect, and overwrites the image at a uniform position (row offset drawn
// first, then column). Requires 0 < scale <= 0.5.
ImageBuffer paste_patch(const ImageBuffer& image, const ImageBuffer& patch, double scale,
                        Rng& rng);

}  // namespace xadv
