#pragma once

#include <string>
#include <vector>

#include "xadv/image.hpp"

namespace xadv {

struct ObjectiveGrad {
    double value = 0.0;                // larger = image embedding closer to the target text
    std::vector<double> gradient;      // d value / d pixel, image-shaped (H*W*3)
};

// White-box model the attack optimizes against. Implementations must be
// deterministic; thread_safe() declares whether one instance may serve
// concurrent calls.
class SurrogateModel {
public:
    virtual ~SurrogateModel() = default;
    virtual std::string id() const = 0;
    virtual ObjectiveGrad objective_and_gradient(const ImageBuffer& image,
                                                 const std::string& prompt,
                                                 const std::string& target) = 0;
    virtual bool thread_safe() const { return false; }
};

// Black-box model under evaluation: text in, text out, no gradients.
class VictimModel {
public:
    virtual ~VictimModel() = default;
    virtual std::string id() const = 0;
    // Groups victims that share a vision encoder with a surrogate.
    virtual std::string vision_encoder_tag() const = 0;
    virtual std::string generate(const ImageBuffer& image, const std::string& prompt) = 0;
    virtual bool thread_safe() const { return false; }
};

// Joint image/text embedder used for scoring and analysis. Embeddings are
// unit-norm vectors of a fixed dimension.
class EmbeddingScorer {
public:
    virtual ~EmbeddingScorer() = default;
    virtual std::string id() const = 0;
    virtual std::vector<double> embed_image(const ImageBuffer& image) = 0;
    virtual std::vector<double> embed_text(const std::string& text) = 0;
    virtual bool thread_safe() const { return false; }
};

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm(const std::vector<double>& v);
// cos(a, b); zero-norm input is an error.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace xadv
