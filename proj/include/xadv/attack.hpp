#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "xadv/augment.hpp"
#include "xadv/image.hpp"
#include "xadv/models.hpp"
#include "xadv/rng.hpp"

namespace xadv {

// How per-model objectives and gradients are combined in an ensemble attack.
enum class EnsembleAggregation { Mean, Sum };

std::string to_string(EnsembleAggregation agg);
EnsembleAggregation parse_aggregation(const std::string& name);

struct AttackConfig {
    double epsilon = 16.0 / 255.0;
    double alpha = 1.0 / 255.0;
    int iterations = 1000;
    std::string target;
    std::string prompt = "describe the image.";
    AugmentationSpec augmentation;
    std::uint64_t seed = 0;
    // Start from delta = 0 instead of uniform(-epsilon, epsilon); used by
    // tests that need a deterministic first step.
    bool zero_init_delta = false;
    EnsembleAggregation aggregation = EnsembleAggregation::Mean;

    void validate() const;
};

struct AdversarialResult {
    ImageBuffer adversarial_image;   // clamp_unit(clean + delta)
    Perturbation delta;
    std::vector<double> objective_trace;  // one aggregated value per iteration
    AttackConfig config;
    std::vector<std::string> surrogate_ids;
    double wall_time_s = 0.0;
};

// Raised when an iteration cannot proceed; carries where the run stopped and
// the trace collected so far.
class AttackError : public Error {
public:
    AttackError(const std::string& msg, int iteration, std::vector<double> partial_trace,
                std::string adapter_id)
        : Error(msg),
          iteration(iteration),
          partial_trace(std::move(partial_trace)),
          adapter_id(std::move(adapter_id)) {}

    int iteration;
    std::vector<double> partial_trace;
    std::string adapter_id;
};

// Called after each iteration's projection with the current delta.
using IterationObserver =
    std::function<void(int iteration, const Perturbation& delta, double objective)>;

// Projected gradient ascent under the L-inf budget. Each iteration augments
// the clean image, applies the current delta, steps along sign(gradient),
// and projects back into [-epsilon, epsilon]. The returned image applies the
// final delta to the unaugmented input.
AdversarialResult pgd_attack(SurrogateModel& model, const ImageBuffer& image,
                             const AttackConfig& config, Rng& rng,
                             const IterationObserver& observer = {});

// Same loop with the objective aggregated across models each iteration.
// With one model and mean aggregation this is bitwise identical to
// pgd_attack.
AdversarialResult ensemble_attack(const std::vector<std::shared_ptr<SurrogateModel>>& models,
                                  const ImageBuffer& image, const AttackConfig& config, Rng& rng,
                                  const IterationObserver& observer = {});

// Writes a reproduction manifest next to a saved adversarial PNG: config,
// surrogate ids, objective trace, the PNG path, and the PNG's SHA-256.
// png_path must already exist; it is recorded as given.
void write_manifest(const AdversarialResult& result, const std::string& manifest_path,
                    const std::string& png_path);

}  // namespace xadv
