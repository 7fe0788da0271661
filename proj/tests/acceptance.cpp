// Acceptance gate: twelve end-to-end criteria covering the attack loop's
// budget and determinism guarantees, oracle equivalence for every metric,
// the toy-stack transfer findings, and the CLI pipeline. Each criterion
// prints one "[ACCEPTANCE] C## <name>: PASS|FAIL" line; tolerances are
// pinned next to the checks they guard.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "xadv/analysis.hpp"
#include "xadv/attack.hpp"
#include "xadv/defense.hpp"
#include "xadv/evaluate.hpp"
#include "xadv/image_io.hpp"
#include "xadv/metrics.hpp"
#include "xadv/rng.hpp"
#include "xadv/toy_models.hpp"

using namespace xadv;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(const char* id, const char* name, bool pass, const std::string& detail) {
    std::printf("[ACCEPTANCE] %s %s: %s (%s)\n", id, name, pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
}

AttackConfig base_config(const std::string& target = "vitacease") {
    AttackConfig config;
    config.epsilon = 16.0 / 255.0;
    config.alpha = 1.0 / 255.0;
    config.iterations = 50;
    config.target = target;
    return config;
}

AugmentationSpec spec_for(AugMethod method) {
    AugmentationSpec spec;
    spec.method = method;
    if (method == AugMethod::Tatm) spec.words = toy_word_set();
    if (method == AugMethod::Admix || method == AugMethod::Aip) spec.patches = toy_patch_set();
    return spec;
}

ImageBuffer dark_random_image(int h, int w, Rng& rng) {
    ImageBuffer img(h, w);
    for (float& v : img.values()) v = static_cast<float>(rng.uniform(0.0, 0.1));
    return img;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "cannot open " << path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// 95% Wilson score interval for a Bernoulli mean.
std::pair<double, double> wilson95(double p_hat, int n) {
    const double z = 1.959963984540054;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p_hat + z2 / (2.0 * n)) / denom;
    const double half =
        z * std::sqrt(p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// C01: for all 8 augmentation methods x 25 seeded runs (32x32 images, 50
// iterations, epsilon 16/255, alpha 1/255), every intermediate and final
// delta satisfies max|delta| <= epsilon exactly. Runtime < 2 min.
// ---------------------------------------------------------------------------
TEST_CASE("C01 budget invariant suite") {
    const auto t0 = Clock::now();
    ToySurrogate surrogate(kToyDefaultSeed);
    const auto fixtures = toy_fixture_images(25, 0xB1, 32, 32);

    long long checked = 0;
    long long violations = 0;
    for (AugMethod method : all_aug_methods()) {
        AttackConfig config = base_config();
        config.augmentation = spec_for(method);
        const double eps = config.epsilon;
        for (int run = 0; run < 25; ++run) {
            config.seed = static_cast<std::uint64_t>(run);
            Rng rng(mix_seed(config.seed, fnv1a64(to_string(method))));
            const auto observer = [&](int, const Perturbation& delta, double) {
                for (double v : delta.data) {
                    ++checked;
                    if (!(std::abs(v) <= eps)) ++violations;
                }
            };
            const AdversarialResult result =
                pgd_attack(surrogate, fixtures[static_cast<std::size_t>(run)].image, config,
                           rng, observer);
            for (double v : result.delta.data) {
                ++checked;
                if (!(std::abs(v) <= eps)) ++violations;
            }
        }
    }
    const double elapsed = seconds_since(t0);
    const bool pass = violations == 0 && elapsed < 120.0;
    report("C01", "budget invariant suite", pass,
           fmt("%lld delta coordinates checked, %lld violations, %.1fs", checked, violations,
               elapsed));
    CHECK(violations == 0);
    CHECK(elapsed < 120.0);
}

// ---------------------------------------------------------------------------
// C02: identical (config, seed) produces a bitwise-identical adversarial PNG
// and manifest hash across 5 repeated runs per method. Runtime < 2 min.
// ---------------------------------------------------------------------------
TEST_CASE("C02 determinism") {
    const auto t0 = Clock::now();
    ToySurrogate surrogate(kToyDefaultSeed);
    const ImageBuffer image = toy_fixture_images(1, 0xB2, 32, 32).front().image;
    const fs::path dir = test::temp_dir("xadv_acceptance_c02");

    int mismatches = 0;
    for (AugMethod method : all_aug_methods()) {
        AttackConfig config = base_config();
        config.augmentation = spec_for(method);
        config.seed = 7;

        // Every run writes to the same paths so the recorded PNG path (part
        // of the manifest) is identical; bytes are captured between runs.
        const fs::path png = dir / (to_string(method) + ".png");
        const fs::path manifest = dir / (to_string(method) + ".json");
        std::string first_png;
        std::string first_manifest_sha;
        for (int run = 0; run < 5; ++run) {
            Rng rng(mix_seed(config.seed, fnv1a64(to_string(method))));
            const AdversarialResult result = pgd_attack(surrogate, image, config, rng);
            save_image(result.adversarial_image, png.string());
            write_manifest(result, manifest.string(), png.string());
            const std::string png_bytes = read_bytes(png);
            const std::string manifest_sha = sha256_file_hex(manifest.string());
            if (run == 0) {
                first_png = png_bytes;
                first_manifest_sha = manifest_sha;
            } else if (png_bytes != first_png || manifest_sha != first_manifest_sha) {
                ++mismatches;
            }
        }
    }
    const double elapsed = seconds_since(t0);
    const bool pass = mismatches == 0 && elapsed < 120.0;
    report("C02", "determinism", pass,
           fmt("8 methods x 5 runs, %d mismatched repeats, %.1fs", mismatches, elapsed));
    CHECK(mismatches == 0);
    CHECK(elapsed < 120.0);
}

// ---------------------------------------------------------------------------
// C03: on a separable quadratic objective, the delta trajectory matches the
// closed-form per-coordinate simulation exactly for 10 iterations on a 2x2
// image, for 20 random (alpha, epsilon, target) triples.
// ---------------------------------------------------------------------------
namespace {

// Separable quadratic: objective = -sum_i w_i (y_i - t_i)^2 over the pixel
// values y, so each coordinate's gradient sign depends only on itself and
// the whole trajectory has a closed form.
class QuadraticSurrogate : public SurrogateModel {
public:
    QuadraticSurrogate(std::vector<double> w, std::vector<double> t)
        : w_(std::move(w)), t_(std::move(t)) {}

    std::string id() const override { return "quadratic"; }
    bool thread_safe() const override { return true; }

    ObjectiveGrad objective_and_gradient(const ImageBuffer& image, const std::string&,
                                         const std::string&) override {
        ObjectiveGrad out;
        out.gradient.resize(image.size());
        out.value = 0.0;
        for (std::size_t i = 0; i < image.size(); ++i) {
            const double y = static_cast<double>(image.values()[i]);
            out.value -= w_[i] * (y - t_[i]) * (y - t_[i]);
            out.gradient[i] = -2.0 * w_[i] * (y - t_[i]);
        }
        return out;
    }

private:
    std::vector<double> w_;
    std::vector<double> t_;
};

}  // namespace

TEST_CASE("C03 sign dynamics oracle") {
    Rng rng(0xC3);
    const std::size_t n = 2 * 2 * 3;
    long long compared = 0;
    long long mismatches = 0;

    for (int trial = 0; trial < 20; ++trial) {
        const double alpha = rng.uniform(0.002, 0.05);
        const double epsilon = rng.uniform(alpha, 0.12);
        std::vector<double> w(n), t(n), x0(n);
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = rng.uniform(0.1, 3.0);
            t[i] = rng.uniform(-0.2, 1.2);  // targets may sit outside [0, 1]
            x0[i] = rng.uniform(0.05, 0.95);
        }
        ImageBuffer image(2, 2);
        for (std::size_t i = 0; i < n; ++i) image.values()[i] = static_cast<float>(x0[i]);

        QuadraticSurrogate surrogate(w, t);
        AttackConfig config;
        config.epsilon = epsilon;
        config.alpha = alpha;
        config.iterations = 10;
        config.target = "quadratic-target";
        config.zero_init_delta = true;

        std::vector<std::vector<double>> trajectory;
        Rng attack_rng(1);
        pgd_attack(surrogate, image, config, attack_rng,
                   [&](int, const Perturbation& delta, double) {
                       trajectory.push_back(delta.data);
                   });

        // Closed-form per-coordinate simulation, mirroring the composition's
        // float cast and sign(0) = 0.
        std::vector<double> delta(n, 0.0);
        for (int it = 0; it < 10; ++it) {
            for (std::size_t i = 0; i < n; ++i) {
                const float y =
                    static_cast<float>(std::clamp(static_cast<double>(image.values()[i]) +
                                                      delta[i],
                                                  0.0, 1.0));
                const double g = -2.0 * w[i] * (static_cast<double>(y) - t[i]);
                const double step = static_cast<double>(g > 0.0) - static_cast<double>(g < 0.0);
                delta[i] = std::clamp(delta[i] + alpha * step, -epsilon, epsilon);
            }
            for (std::size_t i = 0; i < n; ++i) {
                ++compared;
                if (trajectory[static_cast<std::size_t>(it)][i] != delta[i]) ++mismatches;
            }
        }
    }
    const bool pass = mismatches == 0;
    report("C03", "sign dynamics oracle", pass,
           fmt("20 triples x 10 iterations, %lld coordinates compared exactly, %lld mismatches",
               compared, mismatches));
    CHECK(mismatches == 0);
}

// ---------------------------------------------------------------------------
// C04: analytic gradient vs central finite differences (nominal step 1e-3),
// relative error <= 1e-4 on 20 coordinates x 5 images.
// ---------------------------------------------------------------------------
TEST_CASE("C04 gradient check") {
    ToySurrogate surrogate(kToyDefaultSeed);
    Rng rng(0xC4);
    const std::string prompt = "describe the image.";
    const std::string target = "vitacease";

    double worst = 0.0;
    int failures = 0;
    for (int im = 0; im < 5; ++im) {
        const ImageBuffer image = test::random_interior_image(32, 32, rng);
        const ObjectiveGrad analytic = surrogate.objective_and_gradient(image, prompt, target);
        for (int probe = 0; probe < 20; ++probe) {
            const std::size_t coord =
                static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(image.size()) - 1));
            ImageBuffer plus = image;
            ImageBuffer minus = image;
            plus.values()[coord] = static_cast<float>(image.values()[coord] + 1e-3);
            minus.values()[coord] = static_cast<float>(image.values()[coord] - 1e-3);
            // The images store floats, so divide by the realized step rather
            // than the nominal 2e-3.
            const double h = static_cast<double>(plus.values()[coord]) -
                             static_cast<double>(minus.values()[coord]);
            const double fd = (surrogate.objective_and_gradient(plus, prompt, target).value -
                               surrogate.objective_and_gradient(minus, prompt, target).value) /
                              h;
            const double a = analytic.gradient[coord];
            const double rel =
                std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-12});
            worst = std::max(worst, rel);
            if (!(rel <= 1e-4)) ++failures;
        }
    }
    const bool pass = failures == 0;
    report("C04", "gradient check", pass,
           fmt("100 coordinates, worst relative error %.3g (tolerance 1e-4)", worst));
    CHECK(failures == 0);
}

// ---------------------------------------------------------------------------
// C05: final objective exceeds the initial objective by >= 0.1 in >= 95% of
// 50 seeded runs (no augmentation, 200 iterations).
// ---------------------------------------------------------------------------
TEST_CASE("C05 attack effectiveness") {
    ToySurrogate surrogate(kToyDefaultSeed);
    const std::vector<std::string> targets = {"suicide", "unknown", "vitacease", "mystovoid"};

    int improved = 0;
    double min_gain = 1e9;
    for (int run = 0; run < 50; ++run) {
        Rng image_rng(mix_seed(0xC5, static_cast<std::uint64_t>(run)));
        const ImageBuffer image = dark_random_image(32, 32, image_rng);
        AttackConfig config = base_config(targets[static_cast<std::size_t>(run) % 4]);
        config.iterations = 200;
        config.seed = static_cast<std::uint64_t>(run);
        Rng rng(mix_seed(0xC5F0, static_cast<std::uint64_t>(run)));
        const AdversarialResult result = pgd_attack(surrogate, image, config, rng);
        const double gain = result.objective_trace.back() - result.objective_trace.front();
        min_gain = std::min(min_gain, gain);
        if (gain >= 0.1) ++improved;
    }
    const bool pass = improved >= 48;  // >= 95% of 50
    report("C05", "attack effectiveness", pass,
           fmt("%d/50 runs gained >= 0.1 (min gain %.3f)", improved, min_gain));
    CHECK(improved >= 48);
}

// ---------------------------------------------------------------------------
// C06: adversarial images crafted on the toy surrogate reach ASR >= 0.3 on
// the shared-encoder victim while clean images stay at ASR = 0.0, over 30
// images; the independent-encoder ASR is reported but not asserted.
// Runtime < 10 min.
// ---------------------------------------------------------------------------
TEST_CASE("C06 toy transfer analogue") {
    const auto t0 = Clock::now();
    const ToyStack stack = make_toy_stack(kToyDefaultSeed);
    const auto fixtures = toy_fixture_images(30, 0xC6, 32, 32);
    const std::string prompt = "describe the image.";
    const std::string target = "vitacease";

    std::vector<std::string> shared_adv, shared_clean, indep_adv, indep_clean;
    for (const ToyFixture& fx : fixtures) {
        AttackConfig config = base_config(target);
        Rng rng(mix_seed(0xC6A1, fnv1a64(fx.id)));
        const AdversarialResult result = pgd_attack(*stack.surrogate, fx.image, config, rng);
        shared_adv.push_back(stack.victim_shared->generate(result.adversarial_image, prompt));
        shared_clean.push_back(stack.victim_shared->generate(fx.image, prompt));
        indep_adv.push_back(stack.victim_independent->generate(result.adversarial_image, prompt));
        indep_clean.push_back(stack.victim_independent->generate(fx.image, prompt));
    }
    const double asr_shared = attack_success_rate(shared_adv, target);
    const double asr_shared_clean = attack_success_rate(shared_clean, target);
    const double asr_indep = attack_success_rate(indep_adv, target);
    const double asr_indep_clean = attack_success_rate(indep_clean, target);
    const double elapsed = seconds_since(t0);

    const bool pass = asr_shared >= 0.3 && asr_shared_clean == 0.0 && elapsed < 600.0;
    report("C06", "toy transfer analogue", pass,
           fmt("shared ASR %.3f (need >= 0.3), shared clean ASR %.3f (need 0), independent ASR "
               "%.3f / clean %.3f reported only, %.1fs",
               asr_shared, asr_shared_clean, asr_indep, asr_indep_clean, elapsed));
    CHECK(asr_shared >= 0.3);
    CHECK(asr_shared_clean == 0.0);
    CHECK(elapsed < 600.0);
}

// ---------------------------------------------------------------------------
// C07: typography and patch augmentation each reach shared-victim ASR >= the
// no-augmentation baseline in at least 3 of 5 seeds (30 images per seed),
// reported with 95% confidence intervals; hard-fail only if BOTH methods
// lose in >= 4 of 5 seeds.
// ---------------------------------------------------------------------------
TEST_CASE("C07 semantic augmentation ordering") {
    const ToyStack stack = make_toy_stack(kToyDefaultSeed);
    const std::string prompt = "describe the image.";
    const std::string target = "vitacease";

    const auto asr_for = [&](AugMethod method, std::uint64_t seed,
                             const std::vector<ToyFixture>& fixtures) {
        AttackConfig config = base_config(target);
        config.augmentation = spec_for(method);
        config.seed = seed;
        std::vector<std::string> responses;
        for (const ToyFixture& fx : fixtures) {
            Rng rng(mix_seed(seed, fnv1a64(fx.id)));
            const AdversarialResult result = pgd_attack(*stack.surrogate, fx.image, config, rng);
            responses.push_back(stack.victim_shared->generate(result.adversarial_image, prompt));
        }
        return attack_success_rate(responses, target);
    };

    int tatm_wins = 0;
    int aip_wins = 0;
    double none_sum = 0.0, tatm_sum = 0.0, aip_sum = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto fixtures = toy_fixture_images(30, seed, 32, 32);
        const double none = asr_for(AugMethod::None, seed, fixtures);
        const double tatm = asr_for(AugMethod::Tatm, seed, fixtures);
        const double aip = asr_for(AugMethod::Aip, seed, fixtures);
        if (tatm >= none) ++tatm_wins;
        if (aip >= none) ++aip_wins;
        none_sum += none;
        tatm_sum += tatm;
        aip_sum += aip;
        std::printf("  C07 seed %llu: none %.3f  tatm %.3f  aip %.3f\n",
                    static_cast<unsigned long long>(seed), none, tatm, aip);
    }
    const int n = 150;  // 5 seeds x 30 Bernoulli trials per method
    const auto [none_lo, none_hi] = wilson95(none_sum / 5.0, n);
    const auto [tatm_lo, tatm_hi] = wilson95(tatm_sum / 5.0, n);
    const auto [aip_lo, aip_hi] = wilson95(aip_sum / 5.0, n);
    std::printf("  C07 pooled ASR with 95%% CI: none %.3f [%.3f, %.3f], tatm %.3f [%.3f, %.3f], "
                "aip %.3f [%.3f, %.3f]\n",
                none_sum / 5.0, none_lo, none_hi, tatm_sum / 5.0, tatm_lo, tatm_hi, aip_sum / 5.0,
                aip_lo, aip_hi);
    if (tatm_wins < 3)
        std::printf("  C07 note: typography augmentation beat the baseline in only %d/5 seeds\n",
                    tatm_wins);
    if (aip_wins < 3)
        std::printf("  C07 note: patch augmentation beat the baseline in only %d/5 seeds\n",
                    aip_wins);

    // Hard failure is defined as BOTH methods losing in >= 4 of 5 seeds.
    const bool pass = !(tatm_wins <= 1 && aip_wins <= 1);
    report("C07", "semantic augmentation ordering", pass,
           fmt("tatm >= baseline in %d/5 seeds, aip in %d/5 seeds", tatm_wins, aip_wins));
    CHECK(pass);
}

// ---------------------------------------------------------------------------
// C08: the ensemble attack with one model is bitwise equal to the
// single-model attack, and two identical surrogates are bitwise equal to
// the single-surrogate ensemble.
// ---------------------------------------------------------------------------
TEST_CASE("C08 ensemble degeneracy") {
    const ImageBuffer image = toy_fixture_images(1, 0xB8, 32, 32).front().image;
    AttackConfig config = base_config();
    config.seed = 11;

    const auto run_single = [&] {
        ToySurrogate surrogate(kToyDefaultSeed);
        Rng rng(config.seed);
        return pgd_attack(surrogate, image, config, rng);
    };
    const auto run_ensemble = [&](int copies) {
        std::vector<std::shared_ptr<SurrogateModel>> models;
        for (int i = 0; i < copies; ++i)
            models.push_back(std::make_shared<ToySurrogate>(kToyDefaultSeed));
        Rng rng(config.seed);
        return ensemble_attack(models, image, config, rng);
    };

    const AdversarialResult single = run_single();
    const AdversarialResult m1 = run_ensemble(1);
    const AdversarialResult m2 = run_ensemble(2);

    const auto bitwise_equal = [](const AdversarialResult& a, const AdversarialResult& b) {
        return a.adversarial_image == b.adversarial_image && a.delta.data == b.delta.data &&
               a.objective_trace == b.objective_trace;
    };
    const bool m1_equal = bitwise_equal(single, m1);
    const bool m2_equal = bitwise_equal(m1, m2);
    const bool pass = m1_equal && m2_equal;
    report("C08", "ensemble degeneracy", pass,
           fmt("M=1 vs single bitwise: %s; identical pair vs M=1 bitwise: %s",
               m1_equal ? "equal" : "DIFFERENT", m2_equal ? "equal" : "DIFFERENT"));
    CHECK(m1_equal);
    CHECK(m2_equal);
}

// ---------------------------------------------------------------------------
// C09: metric oracles. Unigram F1 matches a brute-force clipped counter on
// 1000 random pairs exactly; mean angle and angular difference match
// independent re-implementations within 1e-12 on 1000 random clusters; the
// separable blur matches a dense 2-D convolution within 1e-9 on 50 random
// images; the blur kernel sums to 1 +/- 1e-12.
// ---------------------------------------------------------------------------
namespace {

// Brute-force clipped-unigram F1 with its own tokenizer (ASCII lowercase,
// split on every non-alphanumeric byte).
double rouge_oracle(const std::string& cand_text, const std::string& ref_text) {
    const auto tokens = [](const std::string& text) {
        std::vector<std::string> out;
        std::string cur;
        for (unsigned char c : text) {
            const bool alnum =
                (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
            if (alnum) {
                cur.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
            } else if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        }
        if (!cur.empty()) out.push_back(cur);
        return out;
    };
    const auto cand = tokens(cand_text);
    const auto ref = tokens(ref_text);
    if (cand.empty() || ref.empty()) return 0.0;
    std::unordered_map<std::string, int> cc, rc;
    for (const auto& t : cand) ++cc[t];
    for (const auto& t : ref) ++rc[t];
    int overlap = 0;
    for (const auto& [tok, count] : cc) {
        const auto it = rc.find(tok);
        if (it != rc.end()) overlap += std::min(count, it->second);
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / static_cast<double>(cand.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

std::string random_text(Rng& rng) {
    static const std::vector<std::string> words = {"Cat",  "dog",  "a",    "a1",   "42",
                                                   "MOON", "tree", "wave", "cat",  "x9y"};
    static const std::vector<std::string> seps = {" ", ", ", "--", "\t", "! ", "."};
    std::string out;
    const int len = rng.uniform_int(0, 8);
    for (int i = 0; i < len; ++i) {
        out += words[static_cast<std::size_t>(rng.uniform_int(0, 9))];
        out += seps[static_cast<std::size_t>(rng.uniform_int(0, 5))];
    }
    return out;
}

std::vector<double> dense_blur_oracle(const ImageBuffer& img, int size, double sigma) {
    // Own kernel: w_i = exp(-(i-c)^2 / (2 sigma^2)), normalized.
    std::vector<double> k(static_cast<std::size_t>(size));
    const double c = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        k[static_cast<std::size_t>(i)] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;

    const int H = img.height();
    const int W = img.width();
    const int half = size / 2;
    std::vector<double> out(img.size(), 0.0);
    for (int r = 0; r < H; ++r)
        for (int col = 0; col < W; ++col)
            for (int ch = 0; ch < 3; ++ch) {
                double s = 0.0;
                for (int i = 0; i < size; ++i)
                    for (int j = 0; j < size; ++j) {
                        const int rr = std::clamp(r + i - half, 0, H - 1);
                        const int cc = std::clamp(col + j - half, 0, W - 1);
                        s += k[static_cast<std::size_t>(i)] * k[static_cast<std::size_t>(j)] *
                             static_cast<double>(img.at(rr, cc, ch));
                    }
                out[(static_cast<std::size_t>(r) * W + col) * 3 + ch] = s;
            }
    return out;
}

}  // namespace

TEST_CASE("C09 metric oracles") {
    Rng rng(0xC9);
    bool pass = true;
    std::string detail;

    // Unigram F1: exact equality on 1000 random pairs.
    int rouge_mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::string a = random_text(rng);
        const std::string b = random_text(rng);
        if (rouge1_f1(a, b) != rouge_oracle(a, b)) ++rouge_mismatches;
    }
    pass = pass && rouge_mismatches == 0;
    detail += fmt("rouge exact mismatches %d/1000", rouge_mismatches);

    // Mean angle and angular difference: long-double re-implementations,
    // tolerance 1e-12, on 1000 random clusters.
    double worst_angle = 0.0;
    double worst_angdiff = 0.0;
    for (int i = 0; i < 1000; ++i) {
        ClusterProjection cluster;
        cluster.method = "oracle";
        cluster.origin = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const int points = rng.uniform_int(1, 12);
        long double sum = 0.0L;
        for (int p = 0; p < points; ++p) {
            const double radius = rng.uniform(0.05, 3.0);
            const double theta = rng.uniform(-3.1, 3.1);
            const double dx = radius * std::cos(theta);
            const double dy = radius * std::sin(theta);
            cluster.points.push_back({cluster.origin[0] + dx, cluster.origin[1] + dy});
            sum += atan2l(static_cast<long double>(cluster.points.back()[1]) -
                              static_cast<long double>(cluster.origin[1]),
                          static_cast<long double>(cluster.points.back()[0]) -
                              static_cast<long double>(cluster.origin[0]));
        }
        const double expected = static_cast<double>(sum / points);
        worst_angle = std::max(worst_angle, std::abs(mean_angle(cluster) - expected));

        const double semantic = rng.uniform(-3.0, 3.0);
        const int k = rng.uniform_int(1, 5);
        std::vector<double> pixel(static_cast<std::size_t>(k));
        long double psum = 0.0L;
        for (double& v : pixel) {
            v = rng.uniform(-3.0, 3.0);
            psum += static_cast<long double>(v);
        }
        const double expected_diff =
            static_cast<double>(static_cast<long double>(semantic) - psum / k);
        worst_angdiff =
            std::max(worst_angdiff, std::abs(angular_difference(semantic, pixel) - expected_diff));
    }
    pass = pass && worst_angle <= 1e-12 && worst_angdiff <= 1e-12;
    detail += fmt("; angle err %.2g, angdiff err %.2g (tol 1e-12)", worst_angle, worst_angdiff);

    // Separable blur vs dense convolution: 1e-9 on 50 random images.
    double worst_blur = 0.0;
    for (int i = 0; i < 50; ++i) {
        const int size = 1 + 2 * rng.uniform_int(0, 2);  // 1, 3, or 5
        const int h = rng.uniform_int(size, size + 7);
        const int w = rng.uniform_int(size, size + 7);
        const double sigma = rng.uniform(0.05, 2.0);
        const ImageBuffer img = test::random_image(h, w, rng);
        const std::vector<double> got = gaussian_blur_values(img, size, sigma);
        const std::vector<double> want = dense_blur_oracle(img, size, sigma);
        for (std::size_t j = 0; j < got.size(); ++j)
            worst_blur = std::max(worst_blur, std::abs(got[j] - want[j]));
    }
    pass = pass && worst_blur <= 1e-9;
    detail += fmt("; blur err %.2g (tol 1e-9)", worst_blur);

    // Kernel normalization: 1 +/- 1e-12 across sizes and sigmas.
    double worst_kernel = 0.0;
    for (int size : {1, 3, 5, 7, 9, 11}) {
        for (int i = 0; i < 10; ++i) {
            const double sigma = rng.uniform(0.01, 5.0);
            const std::vector<double> k = gaussian_kernel(size, sigma);
            double sum = 0.0;
            for (double v : k) sum += v;
            worst_kernel = std::max(worst_kernel, std::abs(sum - 1.0));
        }
    }
    pass = pass && worst_kernel <= 1e-12;
    detail += fmt("; kernel sum err %.2g (tol 1e-12)", worst_kernel);

    report("C09", "metric oracles", pass, detail);
    CHECK(rouge_mismatches == 0);
    CHECK(worst_angle <= 1e-12);
    CHECK(worst_angdiff <= 1e-12);
    CHECK(worst_blur <= 1e-9);
    CHECK(worst_kernel <= 1e-12);
}

// ---------------------------------------------------------------------------
// C10: gaussian noise with std 0 and a size-1 blur are exact identities;
// with the standard defense parameters (noise std 0.005; blur size 3 sigma
// 0.1) the evaluation harness produces complete record sets with no
// fabricated cells.
// ---------------------------------------------------------------------------
TEST_CASE("C10 defense identities and plumbing") {
    Rng rng(0xD0);
    const ImageBuffer image = test::random_image(17, 23, rng);

    DefenseSpec zero_noise;
    zero_noise.kind = DefenseKind::GaussianNoise;
    zero_noise.noise_mean = 0.0;
    zero_noise.noise_std = 0.0;
    Rng noise_rng(3);
    const bool noise_identity = apply_gaussian_noise(image, zero_noise, noise_rng) == image;

    DefenseSpec unit_blur;
    unit_blur.kind = DefenseKind::GaussianBlur;
    unit_blur.kernel_size = 1;
    unit_blur.sigma = 0.1;
    const bool blur_identity = apply_gaussian_blur(image, unit_blur) == image;

    // Plumbing with the standard parameters over a small matrix.
    const ToyStack stack = make_toy_stack(kToyDefaultSeed);
    const auto fixtures = toy_fixture_images(3, 0xD1, 32, 32);
    std::vector<AdversarialInput> inputs;
    std::map<std::string, CleanReference> refs;
    for (const ToyFixture& fx : fixtures) {
        Rng jitter(fnv1a64(fx.id));
        ImageBuffer adv = fx.image;
        for (float& v : adv.values())
            v = static_cast<float>(std::clamp(static_cast<double>(v) + jitter.uniform(-0.05, 0.05),
                                              0.0, 1.0));
        inputs.push_back({fx.id, adv, "none", "toy-surrogate"});
        refs.emplace(fx.id, CleanReference{fx.image, fx.caption});
    }
    const std::vector<std::shared_ptr<VictimModel>> victims = {stack.victim_shared,
                                                               stack.victim_independent};
    const std::vector<std::string> prompts = {"describe the image.", "what is shown?"};

    int incomplete = 0;
    for (const DefenseKind kind : {DefenseKind::GaussianNoise, DefenseKind::GaussianBlur}) {
        EvaluateOptions options;
        options.defense.kind = kind;
        options.defense.noise_mean = 0.0;
        options.defense.noise_std = 0.005;
        options.defense.kernel_size = 3;
        options.defense.sigma = 0.1;
        options.seed = 5;
        const auto records =
            evaluate_matrix(inputs, victims, prompts, "vitacease", *stack.scorer, refs, options);

        // Complete set: every (image, victim, prompt) cell exactly once, the
        // defense tag on each record, no failed or non-finite cells.
        std::set<std::string> seen;
        for (const EvaluationRecord& r : records) {
            if (r.failed || r.defense != to_string(kind) || r.response.empty() ||
                !std::isfinite(r.clip_score) || !std::isfinite(r.rouge_1_f1)) {
                ++incomplete;
                continue;
            }
            seen.insert(r.image_id + "|" + r.victim_id + "|" + r.prompt_id);
        }
        if (records.size() != inputs.size() * victims.size() * prompts.size() ||
            seen.size() != records.size())
            ++incomplete;
    }

    const bool pass = noise_identity && blur_identity && incomplete == 0;
    report("C10", "defense identities and plumbing", pass,
           fmt("noise std=0 identity: %s; blur size=1 identity: %s; incomplete records: %d",
               noise_identity ? "exact" : "BROKEN", blur_identity ? "exact" : "BROKEN",
               incomplete));
    CHECK(noise_identity);
    CHECK(blur_identity);
    CHECK(incomplete == 0);
}

// ---------------------------------------------------------------------------
// C11: a planar 10-D fixture reconstructs through the fitted plane to within
// 1e-9, and projections match an independent eigendecomposition oracle up
// to sign.
// ---------------------------------------------------------------------------
namespace {

// Cyclic Jacobi eigensolver for small symmetric matrices; the independent
// oracle for the PCA implementation.
void jacobi_eigen(std::vector<std::vector<double>> a, std::vector<double>& eigenvalues,
                  std::vector<std::vector<double>>& eigenvectors) {
    const std::size_t n = a.size();
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-28) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a[i][p];
                    const double aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a[p][i];
                    const double aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v[i][p];
                    const double viq = v[i][q];
                    v[i][p] = c * vip - s * viq;
                    v[i][q] = s * vip + c * viq;
                }
            }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
    eigenvalues.assign(n, 0.0);
    eigenvectors.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        eigenvalues[k] = a[order[k]][order[k]];
        for (std::size_t i = 0; i < n; ++i) eigenvectors[k][i] = v[i][order[k]];
    }
}

}  // namespace

TEST_CASE("C11 pca fidelity") {
    Rng rng(0xCB);
    const std::size_t dim = 10;
    double worst_recon = 0.0;
    double worst_proj = 0.0;

    for (int trial = 0; trial < 5; ++trial) {
        // Two random orthonormal directions spanning the plane.
        std::vector<double> mean(dim), d1(dim), d2(dim);
        for (auto* vec : {&mean, &d1, &d2})
            for (double& v : *vec) v = rng.uniform(-1.0, 1.0);
        double n1 = 0.0;
        for (double v : d1) n1 += v * v;
        for (double& v : d1) v /= std::sqrt(n1);
        double dot12 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dot12 += d1[i] * d2[i];
        for (std::size_t i = 0; i < dim; ++i) d2[i] -= dot12 * d1[i];
        double n2 = 0.0;
        for (double v : d2) n2 += v * v;
        for (double& v : d2) v /= std::sqrt(n2);

        std::vector<std::vector<double>> embeddings;
        for (int p = 0; p < 40; ++p) {
            const double a = 2.5 * rng.uniform(-1.0, 1.0);
            const double b = 0.9 * rng.uniform(-1.0, 1.0);
            std::vector<double> e(dim);
            for (std::size_t i = 0; i < dim; ++i) e[i] = mean[i] + a * d1[i] + b * d2[i];
            embeddings.push_back(std::move(e));
        }
        std::vector<double> clean(dim);
        const double ca = rng.uniform(-0.5, 0.5);
        const double cb = rng.uniform(-0.5, 0.5);
        for (std::size_t i = 0; i < dim; ++i) clean[i] = mean[i] + ca * d1[i] + cb * d2[i];

        const PcaResult pca = pca_project(embeddings, clean);

        // Planar data must reconstruct through the two components.
        for (std::size_t p = 0; p < embeddings.size(); ++p) {
            for (std::size_t i = 0; i < dim; ++i) {
                const double rebuilt = pca.mean[i] + pca.projections[p][0] * pca.components[0][i] +
                                       pca.projections[p][1] * pca.components[1][i];
                worst_recon = std::max(worst_recon, std::abs(rebuilt - embeddings[p][i]));
            }
        }

        // Independent oracle: population covariance of the union (points +
        // clean), eigendecomposition by Jacobi rotations.
        std::vector<std::vector<double>> all = embeddings;
        all.push_back(clean);
        std::vector<double> om(dim, 0.0);
        for (const auto& e : all)
            for (std::size_t i = 0; i < dim; ++i) om[i] += e[i];
        for (double& v : om) v /= static_cast<double>(all.size());
        std::vector<std::vector<double>> cov(dim, std::vector<double>(dim, 0.0));
        for (const auto& e : all)
            for (std::size_t i = 0; i < dim; ++i)
                for (std::size_t j = 0; j < dim; ++j)
                    cov[i][j] += (e[i] - om[i]) * (e[j] - om[j]);
        for (auto& row : cov)
            for (double& v : row) v /= static_cast<double>(all.size());

        std::vector<double> eigenvalues;
        std::vector<std::vector<double>> eigenvectors;
        jacobi_eigen(cov, eigenvalues, eigenvectors);

        // Projections must match the oracle basis up to a per-component sign.
        for (int k = 0; k < 2; ++k) {
            double same = 0.0;
            double flipped = 0.0;
            for (std::size_t p = 0; p < embeddings.size(); ++p) {
                double oracle_proj = 0.0;
                for (std::size_t i = 0; i < dim; ++i)
                    oracle_proj += (embeddings[p][i] - om[i]) * eigenvectors[k][i];
                same = std::max(same, std::abs(pca.projections[p][k] - oracle_proj));
                flipped = std::max(flipped, std::abs(pca.projections[p][k] + oracle_proj));
            }
            worst_proj = std::max(worst_proj, std::min(same, flipped));
        }
    }

    const bool pass = worst_recon <= 1e-9 && worst_proj <= 1e-9;
    report("C11", "pca fidelity", pass,
           fmt("reconstruction err %.2g, projection-vs-oracle err %.2g (tol 1e-9)", worst_recon,
               worst_proj));
    CHECK(worst_recon <= 1e-9);
    CHECK(worst_proj <= 1e-9);
}

// ---------------------------------------------------------------------------
// C12: attack -> evaluate -> analyze through the command-line binary over 5
// fixture images completes with exit status 0 and the documented directory
// layout, in < 5 min.
// ---------------------------------------------------------------------------
TEST_CASE("C12 cli end to end") {
    const auto t0 = Clock::now();
    const char* cli_env = std::getenv("XADV_CLI");
    const std::string cli = cli_env && *cli_env ? cli_env : "./xadv";
    REQUIRE_MESSAGE(fs::exists(cli), "CLI binary not found at " << cli);

    const fs::path root = test::temp_dir("xadv_acceptance_c12");
    const fs::path in_dir = root / "images";
    const fs::path out_dir = root / "run";
    fs::create_directories(in_dir);
    std::ofstream captions(in_dir / "captions.tsv");
    std::string first_image;
    for (const ToyFixture& fx : toy_fixture_images(5, kToyDefaultSeed, 32, 32)) {
        save_image(fx.image, (in_dir / (fx.id + ".png")).string());
        captions << fx.id << "\t" << fx.caption << "\n";
        if (first_image.empty()) first_image = (in_dir / (fx.id + ".png")).string();
    }
    captions.close();

    const fs::path log = root / "cli.log";
    const auto run = [&](const std::string& args) {
        const std::string cmd = cli + " " + args + " >> " + log.string() + " 2>&1";
        const int rc = std::system(cmd.c_str());
        const int status = rc < 0 ? rc : WEXITSTATUS(rc);
        if (status != 0) {
            std::printf("  C12 command failed (%d): %s\n", status, cmd.c_str());
            std::printf("%s\n", read_bytes(log).c_str());
        }
        return status;
    };

    const int rc_attack =
        run("attack --input " + in_dir.string() + " --out " + out_dir.string() +
            " --target vitacease --method tatm --word-set toy --iterations 40 --seed 3");
    const int rc_eval =
        run("evaluate --input " + (out_dir / "adv").string() + " --clean-dir " + in_dir.string() +
            " --captions " + (in_dir / "captions.tsv").string() + " --out " + out_dir.string() +
            " --target vitacease --include-clean true");
    const int rc_analyze = run("analyze --input " + first_image + " --out " + out_dir.string() +
                               " --target vitacease --views 25 --word-set toy --patch-set toy");

    const auto count_files = [](const fs::path& dir, const std::string& ext) {
        int n = 0;
        if (fs::is_directory(dir))
            for (const auto& entry : fs::directory_iterator(dir))
                if (entry.path().extension() == ext) ++n;
        return n;
    };
    const int adv_count = count_files(out_dir / "adv", ".png");
    const int manifest_count = count_files(out_dir / "manifests", ".json");
    std::vector<std::string> missing;
    for (const char* rel :
         {"attack_summary.json", "records.csv", "summary.json", "analysis/projections.csv",
          "analysis/angles.csv", "analysis/angular_difference.csv", "analysis/similarity.csv"})
        if (!fs::exists(out_dir / rel)) missing.push_back(rel);

    const double elapsed = seconds_since(t0);
    const bool pass = rc_attack == 0 && rc_eval == 0 && rc_analyze == 0 && adv_count == 5 &&
                      manifest_count == 5 && missing.empty() && elapsed < 300.0;
    std::string missing_list;
    for (const auto& m : missing) missing_list += " " + m;
    report("C12", "cli end to end", pass,
           fmt("attack/evaluate/analyze exit %d/%d/%d, 5 adv pngs: %s, 5 manifests: %s, missing "
               "artifacts:%s, %.1fs",
               rc_attack, rc_eval, rc_analyze, adv_count == 5 ? "yes" : "NO",
               manifest_count == 5 ? "yes" : "NO",
               missing_list.empty() ? " none" : missing_list.c_str(), elapsed));
    CHECK(rc_attack == 0);
    CHECK(rc_eval == 0);
    CHECK(rc_analyze == 0);
    CHECK(adv_count == 5);
    CHECK(manifest_count == 5);
    CHECK(missing.empty());
    CHECK(elapsed < 300.0);
}
