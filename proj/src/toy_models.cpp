#include "xadv/toy_models.hpp"

#include <algorithm>
#include <cmath>

#include "xadv/rng.hpp"

namespace xadv {

namespace {

constexpr int kCharBagDim = 28;
constexpr double kTwoPi = 6.28318530717958647692;

// Pool cell boundaries partition [0, extent) into kToyPool ranges.
inline int cell_lo(int cell, int extent) { return cell * extent / kToyPool; }
inline int cell_hi(int cell, int extent) { return (cell + 1) * extent / kToyPool; }
inline int cell_of(int index, int extent) {
    // Inverse of the partition above: smallest cell whose range contains index.
    int cell = (static_cast<long long>(index) * kToyPool + kToyPool - 1) / extent;
    while (cell_lo(cell, extent) > index) --cell;
    while (cell_hi(cell, extent) <= index) ++cell;
    return cell;
}

std::vector<double> normalized(std::vector<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n == 0.0) throw Error("toy model: zero-norm embedding");
    for (double& x : v) x /= n;
    return v;
}

}  // namespace

const std::vector<std::string>& toy_vocabulary() {
    static const std::vector<std::string> vocab = {
        "circle", "square", "stripe", "spiral", "grid",    "wave",
        "dot",    "cross",  "cat",    "dog",    "flower",  "table",
        "tree",   "moon",   "suicide", "unknown", "vitacease", "mystovoid"};
    return vocab;
}

ImageBuffer toy_grounding_image(const std::string& word, int height, int width) {
    Rng rng(fnv1a64(word));
    // Per channel, a fixed mixture of four gratings; parameters depend only
    // on the word, so any raster size samples the same continuous field.
    struct Grating {
        double fr, fc, phase, amp;
    };
    Grating gratings[3][4];
    for (auto& channel : gratings)
        for (Grating& g : channel) {
            g.fr = static_cast<double>(rng.uniform_int(0, 6));
            g.fc = static_cast<double>(rng.uniform_int(1, 6));
            g.phase = rng.uniform(0.0, kTwoPi);
            g.amp = rng.uniform(0.08, 0.18);
        }
    ImageBuffer out(height, width);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            for (int ch = 0; ch < 3; ++ch) {
                double v = 0.5;
                for (const Grating& g : gratings[ch])
                    v += g.amp * std::sin(kTwoPi * (g.fr * r / height + g.fc * c / width) +
                                          g.phase);
                out.at(r, c, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
    return out;
}

ToyEncoder::ToyEncoder(std::uint64_t seed) : seed_(seed) {
    constexpr int kIn = kToyPool * kToyPool * 3;
    Rng rng(seed);
    weights_.resize(static_cast<std::size_t>(kToyEmbedDim) * kIn);
    const double scale = 1.5 / std::sqrt(static_cast<double>(kIn));
    for (double& w : weights_) w = rng.gaussian(0.0, scale);
    bias_.resize(kToyEmbedDim);
    for (double& b : bias_) b = rng.gaussian(0.0, 0.1);
}

std::vector<double> ToyEncoder::pool(const ImageBuffer& image) const {
    if (image.height() < kToyPool || image.width() < kToyPool)
        throw Error("toy encoder: image must be at least " + std::to_string(kToyPool) + "x" +
                    std::to_string(kToyPool));
    std::vector<double> p(static_cast<std::size_t>(kToyPool) * kToyPool * 3, 0.0);
    for (int ci = 0; ci < kToyPool; ++ci) {
        const int r0 = cell_lo(ci, image.height());
        const int r1 = cell_hi(ci, image.height());
        for (int cj = 0; cj < kToyPool; ++cj) {
            const int c0 = cell_lo(cj, image.width());
            const int c1 = cell_hi(cj, image.width());
            const double inv = 1.0 / (static_cast<double>(r1 - r0) * (c1 - c0));
            for (int ch = 0; ch < 3; ++ch) {
                double s = 0.0;
                for (int r = r0; r < r1; ++r)
                    for (int c = c0; c < c1; ++c) s += image.at(r, c, ch);
                p[(static_cast<std::size_t>(ci) * kToyPool + cj) * 3 + ch] = s * inv;
            }
        }
    }
    return p;
}

std::vector<double> ToyEncoder::embed(const ImageBuffer& image) const {
    const std::vector<double> p = pool(image);
    std::vector<double> z(kToyEmbedDim);
    for (int i = 0; i < kToyEmbedDim; ++i) {
        double s = bias_[i];
        const double* row = &weights_[static_cast<std::size_t>(i) * p.size()];
        for (std::size_t j = 0; j < p.size(); ++j) s += row[j] * p[j];
        z[i] = std::tanh(s);
    }
    return normalized(std::move(z));
}

std::vector<double> ToyTextHead::char_bag(const std::string& text) {
    std::vector<double> b(kCharBagDim, 0.0);
    int other = 0;
    for (unsigned char c : text) {
        const unsigned char lc = (c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c;
        if (lc >= 'a' && lc <= 'z')
            b[lc - 'a'] += 1.0;
        else
            ++other;
    }
    const double len = std::max<std::size_t>(text.size(), 1);
    for (int i = 0; i < 26; ++i) b[i] /= len;
    b[26] = other / len;
    b[27] = 0.1 * static_cast<double>(text.size());
    return b;
}

ToyTextHead::ToyTextHead(const ToyEncoder& encoder, std::uint64_t seed) {
    const auto& vocab = toy_vocabulary();
    std::vector<std::vector<double>> bags;
    std::vector<std::vector<double>> targets;
    for (const std::string& w : vocab) {
        bags.push_back(char_bag(w));
        targets.push_back(encoder.embed(toy_grounding_image(w)));
    }

    Rng rng(seed);
    weights_.resize(static_cast<std::size_t>(kToyEmbedDim) * kCharBagDim);
    for (double& w : weights_) w = rng.gaussian(0.0, 0.3);
    bias_.assign(kToyEmbedDim, 0.0);

    // Full-batch gradient descent on sum of (1 - cos(embed(word), target)).
    constexpr int kIters = 800;
    constexpr double kLr = 0.4;
    for (int it = 0; it < kIters; ++it) {
        std::vector<double> gw(weights_.size(), 0.0);
        std::vector<double> gb(kToyEmbedDim, 0.0);
        for (std::size_t k = 0; k < vocab.size(); ++k) {
            const auto& b = bags[k];
            const auto& y = targets[k];
            std::vector<double> u(kToyEmbedDim);
            double nsq = 0.0;
            for (int i = 0; i < kToyEmbedDim; ++i) {
                double s = bias_[i];
                const double* row = &weights_[static_cast<std::size_t>(i) * kCharBagDim];
                for (int j = 0; j < kCharBagDim; ++j) s += row[j] * b[j];
                u[i] = std::tanh(s);
                nsq += u[i] * u[i];
            }
            const double n = std::sqrt(nsq);
            double cos_uy = 0.0;
            for (int i = 0; i < kToyEmbedDim; ++i) cos_uy += u[i] / n * y[i];
            for (int i = 0; i < kToyEmbedDim; ++i) {
                const double e_i = u[i] / n;
                const double dcos_du = (y[i] - cos_uy * e_i) / n;
                const double dz = -dcos_du * (1.0 - u[i] * u[i]);
                gb[i] += dz;
                double* grow = &gw[static_cast<std::size_t>(i) * kCharBagDim];
                for (int j = 0; j < kCharBagDim; ++j) grow[j] += dz * b[j];
            }
        }
        for (std::size_t i = 0; i < weights_.size(); ++i) weights_[i] -= kLr * gw[i];
        for (int i = 0; i < kToyEmbedDim; ++i) bias_[i] -= kLr * gb[i];
    }

    double total = 0.0;
    for (std::size_t k = 0; k < vocab.size(); ++k)
        total += dot(embed(vocab[k]), targets[k]);
    fit_quality_ = total / static_cast<double>(vocab.size());
}

std::vector<double> ToyTextHead::embed(const std::string& text) const {
    if (text.empty()) throw Error("toy text head: empty text");
    const std::vector<double> b = char_bag(text);
    std::vector<double> u(kToyEmbedDim);
    for (int i = 0; i < kToyEmbedDim; ++i) {
        double s = bias_[i];
        const double* row = &weights_[static_cast<std::size_t>(i) * kCharBagDim];
        for (int j = 0; j < kCharBagDim; ++j) s += row[j] * b[j];
        u[i] = std::tanh(s);
    }
    return normalized(std::move(u));
}

ToySurrogate::ToySurrogate(std::uint64_t seed)
    : id_("toy-surrogate:" + std::to_string(seed)),
      encoder_(std::make_shared<ToyEncoder>(mix_seed(seed, 0x10))),
      text_(std::make_shared<ToyTextHead>(*encoder_, mix_seed(seed, 0x11))) {}

ObjectiveGrad ToySurrogate::objective_and_gradient(const ImageBuffer& image,
                                                   const std::string& prompt,
                                                   const std::string& target) {
    (void)prompt;  // the toy objective conditions on the target text only
    if (target.empty()) throw Error("toy surrogate: empty target");
    image.require_unit_range("toy surrogate");

    const std::vector<double> t = text_->embed(target);
    const std::vector<double> p = encoder_->pool(image);
    const std::size_t in_dim = p.size();

    std::vector<double> u(kToyEmbedDim);
    double nsq = 0.0;
    for (int i = 0; i < kToyEmbedDim; ++i) {
        double s = encoder_->bias()[i];
        const double* row = &encoder_->weights()[static_cast<std::size_t>(i) * in_dim];
        for (std::size_t j = 0; j < in_dim; ++j) s += row[j] * p[j];
        u[i] = std::tanh(s);
        nsq += u[i] * u[i];
    }
    const double n = std::sqrt(nsq);
    double value = 0.0;
    for (int i = 0; i < kToyEmbedDim; ++i) value += u[i] / n * t[i];

    // Chain rule back to pooled features, then spread over each pool cell.
    std::vector<double> dp(in_dim, 0.0);
    for (int i = 0; i < kToyEmbedDim; ++i) {
        const double e_i = u[i] / n;
        const double dz = (t[i] - value * e_i) / n * (1.0 - u[i] * u[i]);
        const double* row = &encoder_->weights()[static_cast<std::size_t>(i) * in_dim];
        for (std::size_t j = 0; j < in_dim; ++j) dp[j] += dz * row[j];
    }

    ObjectiveGrad out;
    out.value = value;
    out.gradient.resize(image.size());
    const int H = image.height();
    const int W = image.width();
    for (int r = 0; r < H; ++r) {
        const int ci = cell_of(r, H);
        const double rh = static_cast<double>(cell_hi(ci, H) - cell_lo(ci, H));
        for (int c = 0; c < W; ++c) {
            const int cj = cell_of(c, W);
            const double cw = static_cast<double>(cell_hi(cj, W) - cell_lo(cj, W));
            const double inv = 1.0 / (rh * cw);
            const std::size_t pbase = (static_cast<std::size_t>(ci) * kToyPool + cj) * 3;
            const std::size_t gbase = (static_cast<std::size_t>(r) * W + c) * 3;
            for (int ch = 0; ch < 3; ++ch)
                out.gradient[gbase + ch] = dp[pbase + ch] * inv;
        }
    }
    return out;
}

ToyVictim::ToyVictim(std::shared_ptr<const ToyEncoder> encoder, std::uint64_t text_seed,
                     std::string id, std::string encoder_tag)
    : encoder_(std::move(encoder)),
      text_(std::make_shared<ToyTextHead>(*encoder_, text_seed)),
      id_(std::move(id)),
      encoder_tag_(std::move(encoder_tag)) {}

std::string ToyVictim::generate(const ImageBuffer& image, const std::string& prompt) {
    (void)prompt;  // the caption template ignores the prompt
    image.require_unit_range("toy victim");
    const std::vector<double> e = encoder_->embed(image);
    const auto& vocab = toy_vocabulary();
    std::size_t best = 0;
    double best_score = -2.0;
    for (std::size_t k = 0; k < vocab.size(); ++k) {
        const double s = dot(e, text_->embed(vocab[k]));
        if (s > best_score) {
            best_score = s;
            best = k;
        }
    }
    return "a photo of a " + vocab[best] + ".";
}

ToyScorer::ToyScorer(std::shared_ptr<const ToyEncoder> encoder,
                     std::shared_ptr<const ToyTextHead> text, std::string id)
    : encoder_(std::move(encoder)), text_(std::move(text)), id_(std::move(id)) {}

std::vector<double> ToyScorer::embed_image(const ImageBuffer& image) {
    image.require_unit_range("toy scorer");
    return encoder_->embed(image);
}

std::vector<double> ToyScorer::embed_text(const std::string& text) {
    return text_->embed(text);
}

ToyStack make_toy_stack(std::uint64_t seed) {
    ToyStack stack;
    stack.surrogate = std::make_shared<ToySurrogate>(seed);
    auto encoder_a = std::make_shared<ToyEncoder>(mix_seed(seed, 0x10));
    auto encoder_b = std::make_shared<ToyEncoder>(mix_seed(seed, 0x30));
    const std::string tag_a = "toy-enc-a:" + std::to_string(seed);
    const std::string tag_b = "toy-enc-b:" + std::to_string(seed);
    stack.victim_shared = std::make_shared<ToyVictim>(
        encoder_a, mix_seed(seed, 0x21), "toy-victim-shared:" + std::to_string(seed), tag_a);
    stack.victim_independent = std::make_shared<ToyVictim>(
        encoder_b, mix_seed(seed, 0x31), "toy-victim-independent:" + std::to_string(seed), tag_b);
    auto scorer_text = std::make_shared<ToyTextHead>(*encoder_a, mix_seed(seed, 0x11));
    stack.scorer =
        std::make_shared<ToyScorer>(encoder_a, scorer_text, "toy-scorer:" + std::to_string(seed));
    return stack;
}

std::shared_ptr<const WordSet> toy_word_set() {
    static const auto set = [] {
        std::vector<WordEntry> entries;
        const auto& vocab = toy_vocabulary();
        // The last four entries are attack targets; keep them out of the
        // augmentation vocabulary so tatm never stamps a target word.
        for (std::size_t i = 0; i + 4 < vocab.size(); ++i)
            entries.push_back({vocab[i], PartOfSpeech::Noun});
        return std::make_shared<const WordSet>(make_word_set(entries, "toy-vocabulary"));
    }();
    return set;
}

std::shared_ptr<const PatchSet> toy_patch_set() {
    static const auto set = [] {
        auto s = std::make_shared<PatchSet>();
        s->source = "toy-grounding";
        const auto& vocab = toy_vocabulary();
        for (std::size_t i = 0; i < 8; ++i) {
            s->entries.push_back(toy_grounding_image(vocab[i], 32, 32));
            s->names.push_back(vocab[i] + ".png");
        }
        return std::shared_ptr<const PatchSet>(s);
    }();
    return set;
}

std::vector<ToyFixture> toy_fixture_images(int count, std::uint64_t seed, int height, int width) {
    if (count < 1) throw Error("toy fixtures: count must be >= 1");
    const auto words = toy_word_set();
    std::vector<ToyFixture> out;
    for (int k = 0; k < count; ++k) {
        const std::string& word =
            words->entries[static_cast<std::size_t>(k) % words->entries.size()].word;
        ImageBuffer img = toy_grounding_image(word, height, width);
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
        for (float& v : img.values())
            v = static_cast<float>(std::clamp(static_cast<double>(v) + rng.gaussian(0.0, 0.02),
                                              0.0, 1.0));
        ToyFixture fx;
        fx.id = word + "_" + std::to_string(k);
        fx.word = word;
        fx.caption = "a photo of a " + word + ".";
        fx.image = std::move(img);
        out.push_back(std::move(fx));
    }
    return out;
}

}  // namespace xadv
