#include "xadv/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "xadv/image_io.hpp"

namespace xadv {

std::string to_string(EnsembleAggregation agg) {
    return agg == EnsembleAggregation::Mean ? "mean" : "sum";
}

EnsembleAggregation parse_aggregation(const std::string& name) {
    if (name == "mean") return EnsembleAggregation::Mean;
    if (name == "sum") return EnsembleAggregation::Sum;
    throw Error("unknown aggregation: \"" + name + "\" (want mean or sum)");
}

void AttackConfig::validate() const {
    if (!(alpha > 0.0) || !(alpha <= epsilon) || !(epsilon <= 1.0))
        throw Error("attack: need 0 < alpha <= epsilon <= 1");
    if (iterations < 0) throw Error("attack: iterations must be >= 0");
    if (target.empty()) throw Error("attack: target must not be empty");
    augmentation.validate();
}

namespace {

inline double sign(double x) { return static_cast<double>(x > 0.0) - static_cast<double>(x < 0.0); }

AdversarialResult run_attack(const std::vector<std::shared_ptr<SurrogateModel>>& models,
                             const ImageBuffer& image, const AttackConfig& config, Rng& rng,
                             const IterationObserver& observer) {
    config.validate();
    if (models.empty()) throw Error("attack: no surrogate models");
    for (const auto& m : models)
        if (!m) throw Error("attack: null surrogate model");
    image.require_unit_range("attack input");

    const auto t_start = std::chrono::steady_clock::now();
    const std::size_t n = image.size();
    const double inv_m = 1.0 / static_cast<double>(models.size());

    Perturbation delta = Perturbation::zeros(image.height(), image.width(), config.epsilon);
    if (!config.zero_init_delta)
        for (double& v : delta.data) v = rng.uniform(-config.epsilon, config.epsilon);

    AugmentationSpec aug = config.augmentation;
    if (aug.method == AugMethod::Tatm && !aug.tatm_fixed_words.empty() &&
        static_cast<int>(aug.tatm_fixed_words.size()) != aug.tatm_amount)
        throw Error("attack: tatm_fixed_words count differs from tatm_amount");

    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(config.iterations));
    std::vector<double> grad(n);

    for (int it = 0; it < config.iterations; ++it) {
        std::string current_adapter;
        try {
            const ImageBuffer x_t = augment(image, aug, rng);
            const ImageBuffer x_adv = compose_clamped(x_t, delta);

            double value = 0.0;
            std::fill(grad.begin(), grad.end(), 0.0);
            for (const auto& model : models) {
                current_adapter = model->id();
                ObjectiveGrad og = model->objective_and_gradient(x_adv, config.prompt,
                                                                 config.target);
                if (og.gradient.size() != n)
                    throw Error("gradient size " + std::to_string(og.gradient.size()) +
                                " does not match image size " + std::to_string(n));
                if (!std::isfinite(og.value)) throw Error("non-finite objective value");
                for (std::size_t i = 0; i < n; ++i) {
                    if (!std::isfinite(og.gradient[i])) throw Error("non-finite gradient");
                    grad[i] += og.gradient[i];
                }
                value += og.value;
            }
            current_adapter.clear();
            if (config.aggregation == EnsembleAggregation::Mean) {
                value *= inv_m;
                for (double& g : grad) g *= inv_m;
            }

            trace.push_back(value);
            for (std::size_t i = 0; i < n; ++i)
                delta.data[i] = std::clamp(delta.data[i] + config.alpha * sign(grad[i]),
                                           -config.epsilon, config.epsilon);

            if (observer) observer(it, delta, value);
        } catch (const AttackError&) {
            throw;
        } catch (const Error& e) {
            throw AttackError("attack stopped at iteration " + std::to_string(it) + ": " +
                                  e.what(),
                              it, trace, current_adapter);
        }
    }

    AdversarialResult result;
    result.adversarial_image = compose_clamped(image, delta);
    result.delta = std::move(delta);
    result.objective_trace = std::move(trace);
    result.config = config;
    for (const auto& m : models) result.surrogate_ids.push_back(m->id());
    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

}  // namespace

AdversarialResult pgd_attack(SurrogateModel& model, const ImageBuffer& image,
                             const AttackConfig& config, Rng& rng,
                             const IterationObserver& observer) {
    std::vector<std::shared_ptr<SurrogateModel>> models = {
        std::shared_ptr<SurrogateModel>(&model, [](SurrogateModel*) {})};
    return run_attack(models, image, config, rng, observer);
}

AdversarialResult ensemble_attack(const std::vector<std::shared_ptr<SurrogateModel>>& models,
                                  const ImageBuffer& image, const AttackConfig& config, Rng& rng,
                                  const IterationObserver& observer) {
    return run_attack(models, image, config, rng, observer);
}

namespace {

nlohmann::json augmentation_to_json(const AugmentationSpec& spec) {
    nlohmann::json j;
    j["method"] = to_string(spec.method);
    switch (spec.method) {
        case AugMethod::None:
            break;
        case AugMethod::Dim:
            j["probability"] = spec.dim_probability;
            j["scale_min"] = spec.dim_scale_min;
            j["scale_max"] = spec.dim_scale_max;
            break;
        case AugMethod::Sim:
            j["max_power"] = spec.sim_max_power;
            break;
        case AugMethod::Bc:
            j["factor_min"] = spec.bc_factor_min;
            j["factor_max"] = spec.bc_factor_max;
            break;
        case AugMethod::Tim:
            j["max_shift_frac"] = spec.tim_max_shift_frac;
            break;
        case AugMethod::Sia:
            j["grid"] = spec.sia_grid;
            j["block_scale"] = spec.sia_block_scale;
            j["max_shift_frac"] = spec.sia_max_shift_frac;
            break;
        case AugMethod::Admix:
            j["strength"] = spec.admix_strength;
            if (spec.patches) j["patch_source"] = spec.patches->source;
            break;
        case AugMethod::Aip:
            j["patch_scale"] = spec.aip_patch_scale;
            j["patch_count"] = spec.aip_patch_count;
            if (spec.patches) j["patch_source"] = spec.patches->source;
            break;
        case AugMethod::Tatm:
            j["amount"] = spec.tatm_amount;
            j["pos"] = spec.tatm_pos ? to_string(*spec.tatm_pos) : "any";
            if (!spec.tatm_fixed_words.empty()) j["fixed_words"] = spec.tatm_fixed_words;
            if (spec.words) j["word_source"] = spec.words->source;
            j["typography"] = {{"font_atlas", spec.typography.font_atlas},
                               {"relative_height", spec.typography.relative_height},
                               {"fill", spec.typography.fill},
                               {"outline", spec.typography.outline},
                               {"outline_width_px", spec.typography.outline_width_px}};
            break;
    }
    return j;
}

}  // namespace

void write_manifest(const AdversarialResult& result, const std::string& manifest_path,
                    const std::string& png_path) {
    nlohmann::json j;
    j["version"] = "xadv-1";
    j["config"] = {{"epsilon", result.config.epsilon},
                   {"alpha", result.config.alpha},
                   {"iterations", result.config.iterations},
                   {"target", result.config.target},
                   {"prompt", result.config.prompt},
                   {"seed", result.config.seed},
                   {"zero_init_delta", result.config.zero_init_delta},
                   {"aggregation", to_string(result.config.aggregation)},
                   {"augmentation", augmentation_to_json(result.config.augmentation)}};
    j["surrogate_ids"] = result.surrogate_ids;
    j["objective_trace"] = result.objective_trace;
    j["output_png"] = png_path;
    j["png_sha256"] = sha256_file_hex(png_path);
    const std::string text = j.dump(2) + "\n";
    write_file_atomic(manifest_path, text.data(), text.size());
}

}  // namespace xadv
