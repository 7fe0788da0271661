#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "xadv/image.hpp"
#include "xadv/models.hpp"
#include "xadv/wordset.hpp"

namespace xadv {

// Small self-contained vision-language models for desk-scale experiments.
// A frozen vision encoder pools the image to a coarse grid, applies a seeded
// linear layer and tanh, and L2-normalizes. Text heads map a character-bag
// feature through a trained linear layer into the same embedding space; they
// are fitted at construction so each vocabulary word's text embedding matches
// the vision embedding of that word's procedural grounding image. Two text
// heads trained against the same encoder therefore agree on what a direction
// in embedding space "means", which is what makes transfer across heads
// observable at this scale.

inline constexpr int kToyPool = 16;       // pooled grid is kToyPool x kToyPool x 3
inline constexpr int kToyEmbedDim = 32;
inline constexpr std::uint64_t kToyDefaultSeed = 2024;

// Vocabulary shared by every toy model (all nouns).
const std::vector<std::string>& toy_vocabulary();

// Deterministic synthetic image depicting a vocabulary word: a word-seeded
// mixture of sinusoidal gratings, distinct per word.
ImageBuffer toy_grounding_image(const std::string& word, int height = 64, int width = 64);

class ToyEncoder {
public:
    explicit ToyEncoder(std::uint64_t seed);

    // Adaptive average pool to kToyPool x kToyPool (per channel), flattened.
    std::vector<double> pool(const ImageBuffer& image) const;
    // tanh(W p + b), L2-normalized.
    std::vector<double> embed(const ImageBuffer& image) const;

    std::uint64_t seed() const { return seed_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& bias() const { return bias_; }

private:
    std::uint64_t seed_;
    std::vector<double> weights_;  // kToyEmbedDim x (kToyPool*kToyPool*3), row-major
    std::vector<double> bias_;
};

class ToyTextHead {
public:
    // Fits the head so embed(word) approximates encoder.embed(grounding(word))
    // for every vocabulary word. Deterministic: seeded init, fixed schedule.
    ToyTextHead(const ToyEncoder& encoder, std::uint64_t seed);

    std::vector<double> embed(const std::string& text) const;
    // Mean cosine between fitted text embeddings and their targets.
    double fit_quality() const { return fit_quality_; }

    static std::vector<double> char_bag(const std::string& text);

private:
    std::vector<double> weights_;  // kToyEmbedDim x kCharBagDim
    std::vector<double> bias_;
    double fit_quality_ = 0.0;
};

class ToySurrogate : public SurrogateModel {
public:
    explicit ToySurrogate(std::uint64_t seed = kToyDefaultSeed);

    std::string id() const override { return id_; }
    // value = cos(encoder(image), text(target)); analytic gradient.
    ObjectiveGrad objective_and_gradient(const ImageBuffer& image, const std::string& prompt,
                                         const std::string& target) override;
    bool thread_safe() const override { return true; }

    const ToyEncoder& encoder() const { return *encoder_; }
    const ToyTextHead& text_head() const { return *text_; }

private:
    std::string id_;
    std::shared_ptr<const ToyEncoder> encoder_;
    std::shared_ptr<const ToyTextHead> text_;
};

class ToyVictim : public VictimModel {
public:
    ToyVictim(std::shared_ptr<const ToyEncoder> encoder, std::uint64_t text_seed,
              std::string id, std::string encoder_tag);

    std::string id() const override { return id_; }
    std::string vision_encoder_tag() const override { return encoder_tag_; }
    // Greedy caption: "a photo of a <best vocabulary word>."
    std::string generate(const ImageBuffer& image, const std::string& prompt) override;
    bool thread_safe() const override { return true; }

private:
    std::shared_ptr<const ToyEncoder> encoder_;
    std::shared_ptr<const ToyTextHead> text_;
    std::string id_;
    std::string encoder_tag_;
};

class ToyScorer : public EmbeddingScorer {
public:
    ToyScorer(std::shared_ptr<const ToyEncoder> encoder,
              std::shared_ptr<const ToyTextHead> text, std::string id);

    std::string id() const override { return id_; }
    std::vector<double> embed_image(const ImageBuffer& image) override;
    std::vector<double> embed_text(const std::string& text) override;
    bool thread_safe() const override { return true; }

private:
    std::shared_ptr<const ToyEncoder> encoder_;
    std::shared_ptr<const ToyTextHead> text_;
    std::string id_;
};

// The standard desk-scale model family:
//  - surrogate: encoder A, text head seeded from A
//  - victim_shared: encoder A with an independently seeded text head
//    (transfer across language heads behind one vision encoder)
//  - victim_independent: encoder B, its own text head
//    (transfer across entirely different vision encoders)
//  - scorer: encoder A paired with the surrogate's text head
struct ToyStack {
    std::shared_ptr<ToySurrogate> surrogate;
    std::shared_ptr<ToyVictim> victim_shared;
    std::shared_ptr<ToyVictim> victim_independent;
    std::shared_ptr<ToyScorer> scorer;
};

ToyStack make_toy_stack(std::uint64_t seed = kToyDefaultSeed);

// Word set / patch set views of the toy vocabulary and grounding images,
// for tatm / admix / aip at desk scale.
std::shared_ptr<const WordSet> toy_word_set();
std::shared_ptr<const PatchSet> toy_patch_set();

// Deterministic labeled fixtures: grounding image of a non-target vocabulary
// word plus seeded Gaussian jitter; .first is the image id, the caption is
// "a photo of a <word>.".
struct ToyFixture {
    std::string id;
    std::string word;
    std::string caption;
    ImageBuffer image;
};
std::vector<ToyFixture> toy_fixture_images(int count, std::uint64_t seed, int height = 64,
                                           int width = 64);

}  // namespace xadv
