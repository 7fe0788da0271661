// Tests for the projected-gradient attack loop: budget projection, sign
// dynamics against a closed-form oracle, ensemble aggregation, error
// reporting, and run manifests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "test_util.hpp"
#include "xadv/attack.hpp"
#include "xadv/image_io.hpp"
#include "xadv/toy_models.hpp"

using namespace xadv;

namespace {

// Separable quadratic objective f(x) = -sum_i (x_i - t_i)^2. Its gradient is
// -2 (x_i - t_i), so sign steps walk each coordinate toward t_i. Closed-form
// per-coordinate dynamics make an exact oracle for the update rule.
class QuadraticModel : public SurrogateModel {
public:
    explicit QuadraticModel(std::vector<double> target) : target_(std::move(target)) {}

    std::string id() const override { return "quadratic"; }
    bool thread_safe() const override { return true; }

    ObjectiveGrad objective_and_gradient(const ImageBuffer& image, const std::string&,
                                         const std::string&) override {
        ++calls;
        REQUIRE(image.size() == target_.size());
        ObjectiveGrad out;
        out.gradient.resize(image.size());
        out.value = 0.0;
        for (std::size_t i = 0; i < image.size(); ++i) {
            const double d = static_cast<double>(image.values()[i]) - target_[i];
            out.value -= d * d;
            out.gradient[i] = -2.0 * d;
        }
        return out;
    }

    int calls = 0;

private:
    std::vector<double> target_;
};

// Constant objective with a fixed gradient field (possibly negated); pairs of
// these with opposite signs make the aggregated gradient exactly zero.
class FixedGradModel : public SurrogateModel {
public:
    FixedGradModel(std::string id, double value, double gain)
        : id_(std::move(id)), value_(value), gain_(gain) {}

    std::string id() const override { return id_; }
    bool thread_safe() const override { return true; }

    ObjectiveGrad objective_and_gradient(const ImageBuffer& image, const std::string&,
                                         const std::string&) override {
        ObjectiveGrad out;
        out.value = value_;
        out.gradient.resize(image.size());
        for (std::size_t i = 0; i < image.size(); ++i)
            out.gradient[i] = gain_ * std::sin(static_cast<double>(i) + 1.0);
        return out;
    }

private:
    std::string id_;
    double value_;
    double gain_;
};

// Fails with a plain error on the n-th call; healthy quadratic before that.
class BombModel : public QuadraticModel {
public:
    BombModel(std::vector<double> target, int fail_on_call)
        : QuadraticModel(std::move(target)), fail_on_call_(fail_on_call) {}

    std::string id() const override { return "bomb"; }

    ObjectiveGrad objective_and_gradient(const ImageBuffer& image, const std::string& prompt,
                                         const std::string& target) override {
        ObjectiveGrad out = QuadraticModel::objective_and_gradient(image, prompt, target);
        if (calls == fail_on_call_) throw Error("boom");
        return out;
    }

private:
    int fail_on_call_;
};

class BadGradientModel : public SurrogateModel {
public:
    enum class Mode { WrongSize, NanValue, NanGradient };
    explicit BadGradientModel(Mode mode) : mode_(mode) {}

    std::string id() const override { return "bad-gradient"; }
    bool thread_safe() const override { return true; }

    ObjectiveGrad objective_and_gradient(const ImageBuffer& image, const std::string&,
                                         const std::string&) override {
        ObjectiveGrad out;
        out.value = mode_ == Mode::NanValue ? std::nan("") : 0.5;
        out.gradient.assign(mode_ == Mode::WrongSize ? image.size() - 1 : image.size(), 0.25);
        if (mode_ == Mode::NanGradient) out.gradient[2] = std::nan("");
        return out;
    }

private:
    Mode mode_;
};

AttackConfig quad_config(int iterations, double epsilon = 16.0 / 255.0,
                         double alpha = 1.0 / 255.0) {
    AttackConfig cfg;
    cfg.epsilon = epsilon;
    cfg.alpha = alpha;
    cfg.iterations = iterations;
    cfg.target = "t";
    cfg.seed = 7;
    return cfg;
}

double sign_of(double x) {
    return static_cast<double>(x > 0.0) - static_cast<double>(x < 0.0);
}

}  // namespace

TEST_CASE("aggregation names round-trip and reject unknowns") {
    CHECK(to_string(EnsembleAggregation::Mean) == "mean");
    CHECK(to_string(EnsembleAggregation::Sum) == "sum");
    CHECK(parse_aggregation("mean") == EnsembleAggregation::Mean);
    CHECK(parse_aggregation("sum") == EnsembleAggregation::Sum);
    CHECK_THROWS_WITH_AS(parse_aggregation("median"),
                         "unknown aggregation: \"median\" (want mean or sum)", Error);
}

TEST_CASE("attack config validation enforces the budget ordering") {
    AttackConfig cfg = quad_config(10);
    CHECK_NOTHROW(cfg.validate());

    AttackConfig bad = cfg;
    bad.alpha = 0.0;
    CHECK_THROWS_WITH_AS(bad.validate(), "attack: need 0 < alpha <= epsilon <= 1", Error);
    bad = cfg;
    bad.alpha = bad.epsilon * 2.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = cfg;
    bad.epsilon = 1.5;
    bad.alpha = 0.5;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = cfg;
    bad.iterations = -1;
    CHECK_THROWS_WITH_AS(bad.validate(), "attack: iterations must be >= 0", Error);
    bad = cfg;
    bad.target.clear();
    CHECK_THROWS_WITH_AS(bad.validate(), "attack: target must not be empty", Error);
    bad = cfg;
    bad.augmentation.method = AugMethod::Dim;
    bad.augmentation.dim_probability = 1.2;
    CHECK_THROWS_AS(bad.validate(), Error);  // augmentation spec validated too

    // Boundary: alpha == epsilon == 1 is legal.
    AttackConfig edge = cfg;
    edge.epsilon = 1.0;
    edge.alpha = 1.0;
    CHECK_NOTHROW(edge.validate());
}

TEST_CASE("sign dynamics match the closed-form per-coordinate simulation") {
    // 20 random (alpha, epsilon, target) triples on a 2x2 image, 10 iterations.
    // The simulation mirrors the update arithmetic operation for operation, so
    // the comparison is exact, not approximate.
    Rng meta(20240601);
    for (int trial = 0; trial < 20; ++trial) {
        const double epsilon = meta.uniform(0.02, 0.3);
        const double alpha = epsilon * meta.uniform(0.05, 1.0);
        const ImageBuffer image = test::random_image(2, 2, meta);
        std::vector<double> target(image.size());
        for (double& t : target) t = meta.uniform(-0.5, 1.5);  // may force 0/1 clamping

        QuadraticModel model(target);
        AttackConfig cfg = quad_config(10, epsilon, alpha);
        cfg.seed = 1000 + static_cast<std::uint64_t>(trial);
        const bool random_init = trial % 2 == 0;
        cfg.zero_init_delta = !random_init;

        Rng rng(cfg.seed);
        const AdversarialResult res = pgd_attack(model, image, cfg, rng);

        // Simulate: delta0 replayed from an identically seeded source, then
        // per coordinate x_a = float(clamp01(x + d)), g = -2 (x_a - t),
        // d = clamp(d + alpha * sign(g), -eps, eps).
        const std::size_t n = image.size();
        std::vector<double> delta(n, 0.0);
        Rng replay(cfg.seed);
        if (random_init)
            for (double& d : delta) d = replay.uniform(-epsilon, epsilon);

        std::vector<std::vector<double>> sim_deltas;
        std::vector<double> sim_trace;
        for (int it = 0; it < 10; ++it) {
            double value = 0.0;
            std::vector<double> grad(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double v = static_cast<double>(image.values()[i]) + delta[i];
                const double xa = static_cast<double>(static_cast<float>(std::clamp(v, 0.0, 1.0)));
                const double d = xa - target[i];
                value -= d * d;
                grad[i] = -2.0 * d;
            }
            sim_trace.push_back(value);
            for (std::size_t i = 0; i < n; ++i)
                delta[i] = std::clamp(delta[i] + alpha * sign_of(grad[i]), -epsilon, epsilon);
            sim_deltas.push_back(delta);
        }

        REQUIRE(res.objective_trace.size() == 10);
        for (int it = 0; it < 10; ++it) CHECK(res.objective_trace[it] == sim_trace[it]);
        REQUIRE(res.delta.data.size() == n);
        for (std::size_t i = 0; i < n; ++i) CHECK(res.delta.data[i] == sim_deltas.back()[i]);

        // And the composed output applies the final delta to the clean image.
        const ImageBuffer expect = compose_clamped(image, res.delta);
        CHECK(res.adversarial_image == expect);
    }
}

TEST_CASE("every intermediate and final delta respects the budget for all methods") {
    const std::vector<AugMethod> methods = {AugMethod::None, AugMethod::Dim,   AugMethod::Sim,
                                            AugMethod::Bc,   AugMethod::Tim,   AugMethod::Sia,
                                            AugMethod::Admix, AugMethod::Aip,  AugMethod::Tatm};
    ToySurrogate model(kToyDefaultSeed);
    for (AugMethod method : methods) {
        for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
            AttackConfig cfg;
            cfg.iterations = 8;
            cfg.target = "vitacease";
            cfg.seed = seed;
            cfg.augmentation.method = method;
            if (method == AugMethod::Admix || method == AugMethod::Aip)
                cfg.augmentation.patches = toy_patch_set();
            if (method == AugMethod::Tatm) cfg.augmentation.words = toy_word_set();

            Rng rng(seed);
            ImageBuffer image = toy_grounding_image("cat", 32, 32);
            int observed = 0;
            const AdversarialResult res = pgd_attack(
                model, image, cfg, rng,
                [&](int it, const Perturbation& delta, double objective) {
                    CHECK(it == observed);
                    ++observed;
                    CHECK(delta.max_abs() <= cfg.epsilon);
                    CHECK(std::isfinite(objective));
                });
            CHECK(observed == 8);
            CHECK(res.delta.max_abs() <= cfg.epsilon);
            CHECK(res.delta.height == 32);
            CHECK(res.delta.width == 32);
            CHECK(res.delta.budget == cfg.epsilon);
            CHECK(res.objective_trace.size() == 8);
            for (float v : res.adversarial_image.values()) {
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
            CHECK(res.surrogate_ids == std::vector<std::string>{model.id()});
            CHECK(res.wall_time_s >= 0.0);
            CHECK(res.config.target == "vitacease");
        }
    }
}

TEST_CASE("with grid-aligned budgets the delta stays on the 1/255 grid") {
    ToySurrogate model(kToyDefaultSeed);
    struct Grid { double eps; double alpha; int levels; int step; };
    for (const Grid g : {Grid{16.0 / 255.0, 1.0 / 255.0, 16, 1},
                         Grid{8.0 / 255.0, 2.0 / 255.0, 8, 2}}) {
        AttackConfig cfg;
        cfg.epsilon = g.eps;
        cfg.alpha = g.alpha;
        cfg.iterations = 40;
        cfg.target = "mystovoid";
        cfg.zero_init_delta = true;
        Rng rng(9);
        const ImageBuffer image = toy_grounding_image("grid", 20, 20);
        const AdversarialResult res = pgd_attack(model, image, cfg, rng);
        bool saturated = false;
        for (double d : res.delta.data) {
            const double scaled = d * 255.0;
            const double k = std::round(scaled);
            CHECK(std::abs(scaled - k) < 1e-9);
            CHECK(std::abs(k) <= g.levels);
            CHECK(static_cast<long long>(k) % g.step == 0);
            if (std::abs(k) == g.levels) saturated = true;
        }
        CHECK(saturated);  // 40 sign steps are enough to reach the wall somewhere
    }
}

TEST_CASE("iterations = 0 applies only the seeded initialization and calls no model") {
    QuadraticModel model(std::vector<double>(4 * 5 * 3, 0.5));
    AttackConfig cfg = quad_config(0);
    Rng meta(31);
    const ImageBuffer image = test::random_image(4, 5, meta);

    Rng rng(cfg.seed);
    const AdversarialResult res = pgd_attack(model, image, cfg, rng);
    CHECK(model.calls == 0);
    CHECK(res.objective_trace.empty());

    Rng replay(cfg.seed);
    for (double d : res.delta.data) CHECK(d == replay.uniform(-cfg.epsilon, cfg.epsilon));
    CHECK(res.adversarial_image == compose_clamped(image, res.delta));

    // Zero-init variant: output equals the clean image exactly.
    AttackConfig zcfg = quad_config(0);
    zcfg.zero_init_delta = true;
    Rng zrng(zcfg.seed);
    const AdversarialResult zres = pgd_attack(model, image, zcfg, zrng);
    CHECK(zres.adversarial_image == image);
    CHECK(zres.delta.max_abs() == 0.0);
}

TEST_CASE("the trace records the objective before each update") {
    ToySurrogate model(kToyDefaultSeed);
    AttackConfig cfg;
    cfg.iterations = 4;
    cfg.target = "dog";
    cfg.zero_init_delta = true;
    const ImageBuffer image = toy_grounding_image("cat", 24, 24);
    Rng rng(3);
    const AdversarialResult res = pgd_attack(model, image, cfg, rng);
    // With zero init and no augmentation, iteration 0 scores the clean image.
    const double clean = model.objective_and_gradient(image, cfg.prompt, cfg.target).value;
    REQUIRE(res.objective_trace.size() == 4);
    CHECK(res.objective_trace[0] == clean);
    // The climb is monotone on this easy objective.
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
        CHECK(res.objective_trace[i] > res.objective_trace[i - 1]);
}

TEST_CASE("identical seeds reproduce the full result bitwise; different seeds do not") {
    ToySurrogate model(kToyDefaultSeed);
    AttackConfig cfg;
    cfg.iterations = 6;
    cfg.target = "vitacease";
    cfg.augmentation.method = AugMethod::Sia;
    const ImageBuffer image = toy_grounding_image("wave", 32, 32);

    Rng r1(11), r2(11), r3(12);
    const AdversarialResult a = pgd_attack(model, image, cfg, r1);
    const AdversarialResult b = pgd_attack(model, image, cfg, r2);
    const AdversarialResult c = pgd_attack(model, image, cfg, r3);
    CHECK(a.adversarial_image == b.adversarial_image);
    CHECK(a.delta.data == b.delta.data);
    CHECK(a.objective_trace == b.objective_trace);
    CHECK(a.adversarial_image != c.adversarial_image);
}

TEST_CASE("observer sees every iteration and the final delta") {
    QuadraticModel model(std::vector<double>(2 * 2 * 3, 0.9));
    AttackConfig cfg = quad_config(5);
    Rng meta(41);
    const ImageBuffer image = test::random_image(2, 2, meta);
    Rng rng(cfg.seed);
    std::vector<double> seen_objectives;
    std::vector<double> last_delta;
    const AdversarialResult res =
        pgd_attack(model, image, cfg, rng, [&](int, const Perturbation& delta, double objective) {
            seen_objectives.push_back(objective);
            last_delta = delta.data;
        });
    CHECK(seen_objectives == res.objective_trace);
    CHECK(last_delta == res.delta.data);
}

TEST_CASE("ensemble with one model is bitwise equal to the single-model attack") {
    auto model = std::make_shared<ToySurrogate>(kToyDefaultSeed);
    AttackConfig cfg;
    cfg.iterations = 6;
    cfg.target = "unknown";
    cfg.augmentation.method = AugMethod::Bc;
    const ImageBuffer image = toy_grounding_image("tree", 24, 24);

    for (EnsembleAggregation agg : {EnsembleAggregation::Mean, EnsembleAggregation::Sum}) {
        cfg.aggregation = agg;
        Rng r1(5), r2(5);
        const AdversarialResult single = pgd_attack(*model, image, cfg, r1);
        const AdversarialResult ens = ensemble_attack({model}, image, cfg, r2);
        CHECK(single.adversarial_image == ens.adversarial_image);
        CHECK(single.delta.data == ens.delta.data);
        CHECK(single.objective_trace == ens.objective_trace);
        CHECK(ens.surrogate_ids == single.surrogate_ids);
    }
}

TEST_CASE("two identical surrogates under mean aggregation match the single run bitwise") {
    auto m1 = std::make_shared<ToySurrogate>(kToyDefaultSeed);
    auto m2 = std::make_shared<ToySurrogate>(kToyDefaultSeed);
    AttackConfig cfg;
    cfg.iterations = 6;
    cfg.target = "suicide";
    const ImageBuffer image = toy_grounding_image("moon", 24, 24);

    Rng r1(5), r2(5);
    const AdversarialResult single = pgd_attack(*m1, image, cfg, r1);
    const AdversarialResult pair = ensemble_attack({m1, m2}, image, cfg, r2);
    CHECK(pair.adversarial_image == single.adversarial_image);
    CHECK(pair.delta.data == single.delta.data);
    CHECK(pair.objective_trace == single.objective_trace);
    REQUIRE(pair.surrogate_ids.size() == 2);
    CHECK(pair.surrogate_ids[0] == pair.surrogate_ids[1]);
}

TEST_CASE("antisymmetric gradients cancel exactly and freeze the delta") {
    auto plus = std::make_shared<FixedGradModel>("plus", 0.25, 1.0);
    auto minus = std::make_shared<FixedGradModel>("minus", 0.75, -1.0);
    AttackConfig cfg = quad_config(6);
    Rng meta(51);
    const ImageBuffer image = test::random_image(3, 3, meta);

    for (EnsembleAggregation agg : {EnsembleAggregation::Mean, EnsembleAggregation::Sum}) {
        cfg.aggregation = agg;
        Rng rng(cfg.seed);
        const AdversarialResult res = ensemble_attack({plus, minus}, image, cfg, rng);
        Rng replay(cfg.seed);
        for (double d : res.delta.data) CHECK(d == replay.uniform(-cfg.epsilon, cfg.epsilon));
        const double expect = agg == EnsembleAggregation::Mean ? 0.5 : 1.0;
        for (double v : res.objective_trace) CHECK(v == expect);
    }
}

TEST_CASE("sum aggregation doubles the objective of a duplicated model") {
    auto m1 = std::make_shared<ToySurrogate>(kToyDefaultSeed);
    auto m2 = std::make_shared<ToySurrogate>(kToyDefaultSeed);
    AttackConfig cfg;
    cfg.iterations = 3;
    cfg.target = "dog";
    cfg.zero_init_delta = true;
    cfg.aggregation = EnsembleAggregation::Sum;
    const ImageBuffer image = toy_grounding_image("cat", 24, 24);
    Rng r1(5), r2(5);
    const AdversarialResult pair = ensemble_attack({m1, m2}, image, cfg, r2);
    cfg.aggregation = EnsembleAggregation::Mean;
    const AdversarialResult mean_pair = ensemble_attack({m1, m2}, image, cfg, r1);
    REQUIRE(pair.objective_trace.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(pair.objective_trace[i] == 2.0 * mean_pair.objective_trace[i]);
    // sign(2g) == sign(g), so the trajectory itself is unchanged.
    CHECK(pair.delta.data == mean_pair.delta.data);
}

TEST_CASE("attack input validation happens before any iteration") {
    QuadraticModel model(std::vector<double>(12, 0.5));
    AttackConfig cfg = quad_config(3);
    ImageBuffer bad(2, 2);
    bad.at(0, 0, 0) = 1.5f;
    Rng rng(1);
    CHECK_THROWS_WITH_AS(pgd_attack(model, bad, cfg, rng),
                         "attack input: image values outside [0, 1]", Error);
    CHECK(model.calls == 0);

    const ImageBuffer ok = test::solid_image(2, 2, 0.5f, 0.5f, 0.5f);
    CHECK_THROWS_WITH_AS(ensemble_attack({}, ok, cfg, rng), "attack: no surrogate models", Error);
    CHECK_THROWS_WITH_AS(ensemble_attack({nullptr}, ok, cfg, rng), "attack: null surrogate model",
                         Error);
}

TEST_CASE("a fixed word list must match the configured word count") {
    ToySurrogate model(kToyDefaultSeed);
    AttackConfig cfg;
    cfg.iterations = 2;
    cfg.target = "dog";
    cfg.augmentation.method = AugMethod::Tatm;
    cfg.augmentation.words = toy_word_set();
    cfg.augmentation.tatm_fixed_words = {"cat", "dog"};  // tatm_amount defaults to 3
    const ImageBuffer image = toy_grounding_image("cat", 64, 64);
    Rng rng(1);
    CHECK_THROWS_WITH_AS(pgd_attack(model, image, cfg, rng),
                         "attack: tatm_fixed_words count differs from tatm_amount", Error);
}

TEST_CASE("adapter failure mid-run carries iteration, partial trace, and adapter id") {
    Rng meta(61);
    const ImageBuffer image = test::random_image(2, 2, meta);
    std::vector<double> target(image.size(), 0.5);

    BombModel bomb(target, 4);  // healthy for calls 1..3, throws on call 4
    AttackConfig cfg = quad_config(10);
    Rng rng(cfg.seed);
    try {
        pgd_attack(bomb, image, cfg, rng);
        FAIL("expected AttackError");
    } catch (const AttackError& e) {
        CHECK(e.iteration == 3);
        CHECK(e.partial_trace.size() == 3);
        CHECK(e.adapter_id == "bomb");
        CHECK(std::string(e.what()) == "attack stopped at iteration 3: boom");
        // The partial trace matches a clean run's prefix.
        QuadraticModel healthy(target);
        Rng r2(cfg.seed);
        const AdversarialResult full = pgd_attack(healthy, image, cfg, r2);
        for (std::size_t i = 0; i < e.partial_trace.size(); ++i)
            CHECK(e.partial_trace[i] == full.objective_trace[i]);
    }
}

TEST_CASE("malformed adapter outputs abort with a diagnostic") {
    Rng meta(71);
    const ImageBuffer image = test::random_image(2, 3, meta);
    AttackConfig cfg = quad_config(3);
    using Mode = BadGradientModel::Mode;
    struct Case { Mode mode; const char* needle; };
    for (const Case c : {Case{Mode::WrongSize, "gradient size"},
                         Case{Mode::NanValue, "non-finite objective value"},
                         Case{Mode::NanGradient, "non-finite gradient"}}) {
        BadGradientModel model(c.mode);
        Rng rng(1);
        try {
            pgd_attack(model, image, cfg, rng);
            FAIL("expected AttackError");
        } catch (const AttackError& e) {
            CHECK(e.iteration == 0);
            CHECK(e.partial_trace.empty());
            CHECK(e.adapter_id == "bad-gradient");
            CHECK(std::string(e.what()).find(c.needle) != std::string::npos);
        }
    }
}

TEST_CASE("augmentation failure mid-run reports the iteration without an adapter id") {
    ToySurrogate model(kToyDefaultSeed);
    AttackConfig cfg;
    cfg.iterations = 2;
    cfg.target = "dog";
    cfg.augmentation.method = AugMethod::Tatm;
    cfg.augmentation.words = toy_word_set();
    cfg.augmentation.tatm_amount = 1;
    cfg.augmentation.tatm_fixed_words = {"mmmmmmmmmmmmmmmmmmmmmmmmmmmmmmmm"};
    const ImageBuffer image = toy_grounding_image("cat", 16, 16);
    Rng rng(1);
    try {
        pgd_attack(model, image, cfg, rng);
        FAIL("expected AttackError");
    } catch (const AttackError& e) {
        CHECK(e.iteration == 0);
        CHECK(e.adapter_id.empty());
        CHECK(std::string(e.what()).find("does not fit") != std::string::npos);
    }
}

TEST_CASE("manifests record the run and hash the saved image") {
    const std::string dir = test::temp_dir("attack_manifest");
    ToySurrogate model(kToyDefaultSeed);
    AttackConfig cfg;
    cfg.iterations = 3;
    cfg.target = "vitacease";
    cfg.seed = 99;
    cfg.augmentation.method = AugMethod::Admix;
    cfg.augmentation.patches = toy_patch_set();
    const ImageBuffer image = toy_grounding_image("dot", 32, 32);
    Rng rng(cfg.seed);
    const AdversarialResult res = pgd_attack(model, image, cfg, rng);

    const std::string png = dir + "/dot_0.admix.vitacease.png";
    save_image(res.adversarial_image, png);
    const std::string manifest = dir + "/dot_0.admix.vitacease.json";
    write_manifest(res, manifest, png);

    std::ifstream in(manifest);
    REQUIRE(in.good());
    const nlohmann::json j = nlohmann::json::parse(in);
    CHECK(j.at("version").get<std::string>() == "xadv-1");
    CHECK(j.at("config").at("epsilon").get<double>() == cfg.epsilon);
    CHECK(j.at("config").at("alpha").get<double>() == cfg.alpha);
    CHECK(j.at("config").at("iterations").get<int>() == 3);
    CHECK(j.at("config").at("target").get<std::string>() == "vitacease");
    CHECK(j.at("config").at("prompt").get<std::string>() == "describe the image.");
    CHECK(j.at("config").at("seed").get<std::uint64_t>() == 99);
    CHECK(j.at("config").at("zero_init_delta").get<bool>() == false);
    CHECK(j.at("config").at("aggregation").get<std::string>() == "mean");
    CHECK(j.at("config").at("augmentation").at("method").get<std::string>() == "admix");
    CHECK(j.at("config").at("augmentation").at("patch_source").get<std::string>() ==
          "toy-grounding");
    CHECK(j.at("surrogate_ids").get<std::vector<std::string>>() ==
          std::vector<std::string>{"toy-surrogate:2024"});
    REQUIRE(j.at("objective_trace").size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(j.at("objective_trace")[i].get<double>() == res.objective_trace[i]);
    CHECK(j.at("output_png").get<std::string>() == png);
    CHECK(j.at("png_sha256").get<std::string>() == sha256_file_hex(png));
    CHECK(!j.contains("wall_time_s"));  // manifests must be byte-reproducible

    // Re-writing the manifest yields identical bytes.
    const std::string manifest2 = dir + "/again.json";
    write_manifest(res, manifest2, png);
    CHECK(read_file_bytes(manifest) == read_file_bytes(manifest2));

    // Re-running with the recorded config and seed reproduces the PNG hash.
    Rng rng2(cfg.seed);
    const AdversarialResult res2 = pgd_attack(model, image, cfg, rng2);
    const std::string png2 = dir + "/repro.png";
    save_image(res2.adversarial_image, png2);
    CHECK(sha256_file_hex(png2) == j.at("png_sha256").get<std::string>());

    CHECK_THROWS_AS(write_manifest(res, dir + "/no-such-dir/m.json", png), Error);
}

TEST_CASE("tatm manifests describe the typography and word source") {
    ToySurrogate model(kToyDefaultSeed);
    AttackConfig cfg;
    cfg.iterations = 1;
    cfg.target = "dog";
    cfg.augmentation.method = AugMethod::Tatm;
    cfg.augmentation.words = toy_word_set();
    cfg.augmentation.tatm_fixed_words = {"cat", "dog", "moon"};
    const ImageBuffer image = toy_grounding_image("cat", 64, 64);
    Rng rng(2);
    const AdversarialResult res = pgd_attack(model, image, cfg, rng);

    const std::string dir = test::temp_dir("attack_manifest_tatm");
    const std::string png = dir + "/x.png";
    save_image(res.adversarial_image, png);
    const std::string manifest = dir + "/x.json";
    write_manifest(res, manifest, png);
    std::ifstream in(manifest);
    const nlohmann::json j = nlohmann::json::parse(in);
    const auto& aug = j.at("config").at("augmentation");
    CHECK(aug.at("method").get<std::string>() == "tatm");
    CHECK(aug.at("amount").get<int>() == 3);
    CHECK(aug.at("pos").get<std::string>() == "noun");
    CHECK(aug.at("fixed_words").get<std::vector<std::string>>() ==
          std::vector<std::string>{"cat", "dog", "moon"});
    CHECK(aug.at("word_source").get<std::string>() == "toy-vocabulary");
    CHECK(aug.at("typography").at("relative_height").get<double>() == 0.08);
    CHECK(aug.at("typography").at("outline_width_px").get<int>() == 1);
}
