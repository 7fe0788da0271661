// Command-line front end: configuration loading (file, XADV_ environment
// overrides, flags — later sources win), subcommand dispatch, and batch
// orchestration over image sets.
//
// Subcommands: attack, ensemble-attack, evaluate, defend, analyze, render-aug.
// Run with --help for the key reference. Experiment layout under --out:
//   adv/<image>.<method>.<target>.png     adversarial images
//   manifests/<image>.<method>.<target>.json  reproduction manifests
//   attack_summary.json                   per-run outcomes (attack commands)
//   records.csv, summary.json             evaluation matrix outputs
//   analysis/*.csv                        embedding-space analysis
// Exit status: 0 on full success, 1 when any run or cell failed, 2 on
// configuration errors. Fatal errors print one JSON object to stderr.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xadv/analysis.hpp"
#include "xadv/attack.hpp"
#include "xadv/augment.hpp"
#include "xadv/defense.hpp"
#include "xadv/evaluate.hpp"
#include "xadv/image_io.hpp"
#include "xadv/remote.hpp"
#include "xadv/toy_models.hpp"

namespace {

using namespace xadv;
using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    // Attack parameters.
    double epsilon = 16.0 / 255.0;
    double alpha = 1.0 / 255.0;
    int iterations = 1000;
    std::string target;
    std::string prompt = "describe the image.";
    std::string method = "none";
    std::uint64_t seed = 0;
    bool zero_init_delta = false;
    std::string aggregation = "mean";

    // Augmentation knobs (only the selected method's fields are read).
    double dim_probability = 0.7;
    double dim_scale_min = 0.9;
    double dim_scale_max = 1.0;
    int sim_max_power = 4;
    double bc_factor_min = 0.7;
    double bc_factor_max = 1.3;
    double tim_max_shift_frac = 0.1;
    int sia_grid = 3;
    double sia_block_scale = 0.8;
    double sia_max_shift_frac = 0.2;
    double admix_strength = 0.2;
    double aip_patch_scale = 0.2;
    int aip_patch_count = 1;
    int tatm_amount = 3;
    std::string tatm_pos = "noun";  // noun | adjective | verb | any

    // Paths.
    std::string input;       // image file, directory, or ';'-separated files
    std::string out;         // experiment directory (created if absent)
    std::string word_set;    // word list path, or "toy" for the built-in set
    std::string patch_set;   // patch directory, or "toy" for the built-in set
    std::string prompts;     // evaluation prompt file (one per line)
    std::string clean_dir;   // clean reference images for evaluate
    std::string captions;    // optional "id<TAB>caption" reference texts

    // Models: ';'-separated endpoint lists.
    std::string surrogates = "toy";
    std::string victims = "toy-shared;toy-independent";
    std::string scorer = "toy";
    double adapter_timeout_s = 30.0;

    // Defense.
    std::string defense = "none";
    double defense_noise_mean = 0.0;
    double defense_noise_std = 0.005;
    int defense_kernel_size = 3;
    double defense_sigma = 0.1;

    // Evaluation.
    bool whole_word_asr = false;
    double clip_weight = 1.0;
    bool include_clean = false;
    int parallelism = 1;

    // Analysis.
    int views = 300;
    std::string analyze_methods = "dim;sim;bc;tim;sia;admix;aip;tatm";
    std::string similarity_texts;  // default: the target
    bool circular_mean = false;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

double parse_double_value(const std::string& key, const std::string& text) {
    try {
        const auto slash = text.find('/');
        if (slash != std::string::npos) {
            std::size_t a_end = 0;
            std::size_t b_end = 0;
            const double num = std::stod(text.substr(0, slash), &a_end);
            const std::string den_text = text.substr(slash + 1);
            const double den = std::stod(den_text, &b_end);
            if (a_end != slash || b_end != den_text.size() || den == 0.0)
                throw std::invalid_argument(text);
            return num / den;
        }
        std::size_t end = 0;
        const double v = std::stod(text, &end);
        if (end != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " wants a number (got '" + text + "')");
    }
}

int parse_int_value(const std::string& key, const std::string& text) {
    try {
        std::size_t end = 0;
        const long v = std::stol(text, &end);
        if (end != text.size()) throw std::invalid_argument(text);
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " wants an integer (got '" + text + "')");
    }
}

std::uint64_t parse_u64_value(const std::string& key, const std::string& text) {
    try {
        std::size_t end = 0;
        const std::uint64_t v = std::stoull(text, &end);
        if (end != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " wants an unsigned integer (got '" + text + "')");
    }
}

bool parse_bool_value(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError("config: " + key + " wants true or false (got '" + text + "')");
}

struct KeyInfo {
    std::string name;
    std::string help;
    std::function<void(RunConfig&, const std::string&)> set;
    bool is_bool = false;
};

class ConfigSchema {
public:
    ConfigSchema() {
        const auto dbl = [this](const char* name, double RunConfig::*field, const char* help) {
            add(name, help, [name, field](RunConfig& rc, const std::string& v) {
                rc.*field = parse_double_value(name, v);
            });
        };
        const auto num = [this](const char* name, int RunConfig::*field, const char* help) {
            add(name, help, [name, field](RunConfig& rc, const std::string& v) {
                rc.*field = parse_int_value(name, v);
            });
        };
        const auto str = [this](const char* name, std::string RunConfig::*field,
                                const char* help) {
            add(name, help,
                [field](RunConfig& rc, const std::string& v) { rc.*field = v; });
        };
        const auto boolean = [this](const char* name, bool RunConfig::*field, const char* help) {
            add(name, help,
                [name, field](RunConfig& rc, const std::string& v) {
                    rc.*field = parse_bool_value(name, v);
                },
                true);
        };

        dbl("epsilon", &RunConfig::epsilon, "L-inf budget (default 16/255; fractions allowed)");
        dbl("alpha", &RunConfig::alpha, "step size (default 1/255)");
        num("iterations", &RunConfig::iterations, "attack iterations (default 1000)");
        str("target", &RunConfig::target, "target word the attack optimizes toward (required)");
        str("prompt", &RunConfig::prompt, "prompt sent to models (default 'describe the image.')");
        str("method", &RunConfig::method,
            "augmentation: none|dim|sim|bc|tim|sia|admix|aip|tatm (default none)");
        add("seed", "run seed; per-image streams are derived from it (default 0)",
            [](RunConfig& rc, const std::string& v) { rc.seed = parse_u64_value("seed", v); });
        boolean("zero_init_delta", &RunConfig::zero_init_delta,
                "start from delta = 0 instead of uniform(-eps, eps)");
        str("aggregation", &RunConfig::aggregation, "ensemble aggregation: mean|sum");

        dbl("dim_probability", &RunConfig::dim_probability, "dim: transform probability");
        dbl("dim_scale_min", &RunConfig::dim_scale_min, "dim: minimum resize factor");
        dbl("dim_scale_max", &RunConfig::dim_scale_max, "dim: maximum resize factor");
        num("sim_max_power", &RunConfig::sim_max_power, "sim: max halving exponent");
        dbl("bc_factor_min", &RunConfig::bc_factor_min, "bc: min brightness factor");
        dbl("bc_factor_max", &RunConfig::bc_factor_max, "bc: max brightness factor");
        dbl("tim_max_shift_frac", &RunConfig::tim_max_shift_frac, "tim: max shift fraction");
        num("sia_grid", &RunConfig::sia_grid, "sia: blocks per side");
        dbl("sia_block_scale", &RunConfig::sia_block_scale, "sia: per-block scale");
        dbl("sia_max_shift_frac", &RunConfig::sia_max_shift_frac, "sia: per-block shift");
        dbl("admix_strength", &RunConfig::admix_strength, "admix: blend strength");
        dbl("aip_patch_scale", &RunConfig::aip_patch_scale, "aip: patch long side fraction");
        num("aip_patch_count", &RunConfig::aip_patch_count, "aip: patches per draw");
        num("tatm_amount", &RunConfig::tatm_amount, "tatm: words rendered per draw");
        str("tatm_pos", &RunConfig::tatm_pos, "tatm: word filter noun|adjective|verb|any");

        str("input", &RunConfig::input, "image file, directory, or ';'-separated files");
        str("out", &RunConfig::out, "experiment output directory (required)");
        str("word_set", &RunConfig::word_set, "tatm word list path, or 'toy'");
        str("patch_set", &RunConfig::patch_set, "admix/aip patch directory, or 'toy'");
        str("prompts", &RunConfig::prompts, "evaluation prompt file, one per line");
        str("clean_dir", &RunConfig::clean_dir, "clean reference images for evaluate");
        str("captions", &RunConfig::captions, "reference captions file: id<TAB>caption");

        str("surrogates", &RunConfig::surrogates,
            "';'-separated: toy[:seed] or <id>@<endpoint> (default toy)");
        str("victims", &RunConfig::victims,
            "';'-separated: toy-shared[:seed], toy-independent[:seed], or <id>@<tag>@<endpoint>");
        str("scorer", &RunConfig::scorer, "toy[:seed] or <id>@<endpoint> (default toy)");
        dbl("adapter_timeout_s", &RunConfig::adapter_timeout_s,
            "remote adapter response timeout in seconds");

        str("defense", &RunConfig::defense, "none|gaussian_noise|gaussian_blur (default none)");
        dbl("defense_noise_mean", &RunConfig::defense_noise_mean, "noise mean (default 0)");
        dbl("defense_noise_std", &RunConfig::defense_noise_std, "noise std (default 0.005)");
        num("defense_kernel_size", &RunConfig::defense_kernel_size,
            "blur kernel size, odd (default 3)");
        dbl("defense_sigma", &RunConfig::defense_sigma, "blur sigma (default 0.1)");

        boolean("whole_word_asr", &RunConfig::whole_word_asr,
                "count hits on whole-word matches only");
        dbl("clip_weight", &RunConfig::clip_weight, "similarity score weight (default 1.0)");
        boolean("include_clean", &RunConfig::include_clean,
                "also evaluate the clean reference images (method 'clean')");
        num("parallelism", &RunConfig::parallelism, "worker threads (default 1)");

        num("views", &RunConfig::views, "analyze: augmented views per method (default 300)");
        str("analyze_methods", &RunConfig::analyze_methods,
            "analyze: ';'-separated method list");
        str("similarity_texts", &RunConfig::similarity_texts,
            "analyze: ';'-separated texts for the similarity table (default: target)");
        boolean("circular_mean", &RunConfig::circular_mean,
                "analyze: report circular mean angles instead of arithmetic");
    }

    const std::vector<KeyInfo>& keys() const { return keys_; }

    const KeyInfo* find(const std::string& name) const {
        for (const auto& k : keys_)
            if (k.name == name) return &k;
        return nullptr;
    }

    void set(RunConfig& rc, const std::string& name, const std::string& value,
             const std::string& origin) const {
        const KeyInfo* k = find(name);
        if (!k) throw ConfigError("config: unknown key '" + name + "' (" + origin + ")");
        k->set(rc, value);
    }

private:
    void add(std::string name, std::string help,
             std::function<void(RunConfig&, const std::string&)> set, bool is_bool = false) {
        keys_.push_back({std::move(name), std::move(help), std::move(set), is_bool});
    }

    std::vector<KeyInfo> keys_;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Flat "key = value" file; '#' lines are comments, values may be quoted.
void apply_config_file(const ConfigSchema& schema, RunConfig& rc, const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw ConfigError("config: cannot open " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: " + path + ":" + std::to_string(line_no) +
                              ": expected key = value");
        const std::string key = trim(text.substr(0, eq));
        std::string value = trim(text.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        schema.set(rc, key, value, path + ":" + std::to_string(line_no));
    }
}

void apply_environment(const ConfigSchema& schema, RunConfig& rc) {
    for (const auto& k : schema.keys()) {
        std::string var = "XADV_";
        for (char c : k.name) var.push_back(static_cast<char>(std::toupper(c)));
        if (const char* v = std::getenv(var.c_str()); v && *v)
            schema.set(rc, k.name, v, "environment " + var);
    }
}

std::string normalize_flag(std::string name) {
    for (char& c : name)
        if (c == '-') c = '_';
    return name;
}

std::vector<std::string> split_list(const std::string& text, char sep = ';') {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

// Owns whatever a model entry needed (toy stacks, transports) so the models
// stay alive for the duration of the run.
struct ModelPool {
    std::vector<std::shared_ptr<SurrogateModel>> surrogates;
    std::vector<std::shared_ptr<VictimModel>> victims;
    std::shared_ptr<EmbeddingScorer> scorer;
    std::map<std::uint64_t, ToyStack> stacks;

    ToyStack& stack(std::uint64_t seed) {
        auto it = stacks.find(seed);
        if (it == stacks.end()) it = stacks.emplace(seed, make_toy_stack(seed)).first;
        return it->second;
    }
};

// "toy" / "toy-shared" style entries take an optional ":<seed>" suffix.
std::uint64_t toy_seed_of(const std::string& entry, const std::string& prefix) {
    if (entry == prefix) return kToyDefaultSeed;
    return parse_u64_value(entry, entry.substr(prefix.size() + 1));
}

ModelPool build_models(const RunConfig& rc, bool need_surrogates, bool need_victims,
                       bool need_scorer) {
    ModelPool pool;
    if (need_surrogates) {
        for (const std::string& entry : split_list(rc.surrogates)) {
            if (entry == "toy" || entry.rfind("toy:", 0) == 0) {
                pool.surrogates.push_back(pool.stack(toy_seed_of(entry, "toy")).surrogate);
                continue;
            }
            const auto at = entry.find('@');
            if (at == std::string::npos)
                throw ConfigError("config: surrogate entry '" + entry +
                                  "' must be toy[:seed] or <id>@<endpoint>");
            pool.surrogates.push_back(std::make_shared<RemoteSurrogate>(
                make_transport(entry.substr(at + 1), rc.adapter_timeout_s),
                entry.substr(0, at)));
        }
        if (pool.surrogates.empty()) throw ConfigError("config: no surrogates configured");
    }
    if (need_victims) {
        for (const std::string& entry : split_list(rc.victims)) {
            if (entry == "toy-shared" || entry.rfind("toy-shared:", 0) == 0) {
                pool.victims.push_back(pool.stack(toy_seed_of(entry, "toy-shared")).victim_shared);
                continue;
            }
            if (entry == "toy-independent" || entry.rfind("toy-independent:", 0) == 0) {
                pool.victims.push_back(
                    pool.stack(toy_seed_of(entry, "toy-independent")).victim_independent);
                continue;
            }
            const auto first = entry.find('@');
            const auto second = first == std::string::npos ? std::string::npos
                                                           : entry.find('@', first + 1);
            if (second == std::string::npos)
                throw ConfigError("config: victim entry '" + entry +
                                  "' must be toy-shared[:seed], toy-independent[:seed], or "
                                  "<id>@<tag>@<endpoint>");
            pool.victims.push_back(std::make_shared<RemoteVictim>(
                make_transport(entry.substr(second + 1), rc.adapter_timeout_s),
                entry.substr(0, first), entry.substr(first + 1, second - first - 1)));
        }
        if (pool.victims.empty()) throw ConfigError("config: no victims configured");
    }
    if (need_scorer) {
        const std::string entry = trim(rc.scorer);
        if (entry == "toy" || entry.rfind("toy:", 0) == 0) {
            pool.scorer = pool.stack(toy_seed_of(entry, "toy")).scorer;
        } else {
            const auto at = entry.find('@');
            if (at == std::string::npos)
                throw ConfigError("config: scorer entry '" + entry +
                                  "' must be toy[:seed] or <id>@<endpoint>");
            pool.scorer = std::make_shared<RemoteScorer>(
                make_transport(entry.substr(at + 1), rc.adapter_timeout_s), entry.substr(0, at));
        }
    }
    return pool;
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

struct NamedImage {
    std::string id;    // filename stem
    fs::path path;
};

bool has_png_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext == ".png";
}

// Input images sorted by id, independent of enumeration order.
std::vector<NamedImage> list_images(const std::string& input) {
    if (input.empty()) throw ConfigError("config: input is required");
    std::vector<NamedImage> out;
    const auto add_file = [&](const fs::path& p) {
        if (!fs::exists(p)) throw ConfigError("config: input image " + p.string() + " not found");
        out.push_back({p.stem().string(), p});
    };
    if (fs::is_directory(input)) {
        for (const auto& entry : fs::directory_iterator(input))
            if (entry.is_regular_file() && has_png_extension(entry.path()))
                out.push_back({entry.path().stem().string(), entry.path()});
        if (out.empty()) throw ConfigError("config: no .png images in " + input);
    } else {
        for (const std::string& item : split_list(input)) add_file(item);
        if (out.empty()) throw ConfigError("config: input is required");
    }
    std::sort(out.begin(), out.end(),
              [](const NamedImage& a, const NamedImage& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].id == out[i - 1].id)
            throw ConfigError("config: duplicate image id '" + out[i].id + "'");
    return out;
}

void ensure_distinct_dirs(const std::string& input, const std::string& out) {
    if (input.empty() || out.empty() || !fs::exists(input) || !fs::exists(out)) return;
    std::error_code ec;
    if (fs::equivalent(fs::path(input), fs::path(out), ec))
        throw ConfigError("config: out must differ from the input directory (inputs are never "
                          "modified in place)");
}

fs::path require_out_dir(const RunConfig& rc) {
    if (rc.out.empty()) throw ConfigError("config: out is required");
    fs::create_directories(rc.out);
    return rc.out;
}

void require_path_exists(const std::string& key, const std::string& path) {
    if (!path.empty() && path != "toy" && !fs::exists(path))
        throw ConfigError("config: " + key + " path " + path + " does not exist");
}

AugmentationSpec build_augmentation(const RunConfig& rc, const std::string& method_name) {
    AugmentationSpec spec;
    spec.method = parse_aug_method(method_name);
    spec.dim_probability = rc.dim_probability;
    spec.dim_scale_min = rc.dim_scale_min;
    spec.dim_scale_max = rc.dim_scale_max;
    spec.sim_max_power = rc.sim_max_power;
    spec.bc_factor_min = rc.bc_factor_min;
    spec.bc_factor_max = rc.bc_factor_max;
    spec.tim_max_shift_frac = rc.tim_max_shift_frac;
    spec.sia_grid = rc.sia_grid;
    spec.sia_block_scale = rc.sia_block_scale;
    spec.sia_max_shift_frac = rc.sia_max_shift_frac;
    spec.admix_strength = rc.admix_strength;
    spec.aip_patch_scale = rc.aip_patch_scale;
    spec.aip_patch_count = rc.aip_patch_count;
    spec.tatm_amount = rc.tatm_amount;
    if (rc.tatm_pos == "any")
        spec.tatm_pos = std::nullopt;
    else
        spec.tatm_pos = parse_part_of_speech(rc.tatm_pos);

    if (spec.method == AugMethod::Tatm) {
        if (rc.word_set.empty())
            throw ConfigError("config: method tatm requires word_set (a path or 'toy')");
        if (rc.word_set == "toy")
            spec.words = toy_word_set();
        else
            spec.words = std::make_shared<WordSet>(load_word_set(rc.word_set));
    }
    if (spec.method == AugMethod::Admix || spec.method == AugMethod::Aip) {
        if (rc.patch_set.empty())
            throw ConfigError("config: method " + method_name +
                              " requires patch_set (a directory or 'toy')");
        if (rc.patch_set == "toy")
            spec.patches = toy_patch_set();
        else
            spec.patches = std::make_shared<PatchSet>(load_patch_set(rc.patch_set));
    }
    spec.validate();
    return spec;
}

DefenseSpec build_defense(const RunConfig& rc) {
    DefenseSpec spec;
    spec.kind = parse_defense_kind(rc.defense);
    spec.noise_mean = rc.defense_noise_mean;
    spec.noise_std = rc.defense_noise_std;
    spec.kernel_size = rc.defense_kernel_size;
    spec.sigma = rc.defense_sigma;
    spec.validate();
    return spec;
}

void write_json_atomic(const json& j, const fs::path& path) {
    const std::string text = j.dump(2) + "\n";
    write_file_atomic(path.string(), text.data(), text.size());
}

// Runs jobs [0, count) over `parallelism` workers when allowed; each job must
// be independent. Exceptions are captured per job and returned.
std::vector<std::string> run_jobs(int count, int parallelism, bool allow_parallel,
                                  const std::function<void(int)>& job) {
    std::vector<std::string> errors(static_cast<std::size_t>(count));
    const int workers = allow_parallel ? std::max(1, std::min(parallelism, count)) : 1;
    std::atomic<int> next{0};
    const auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                job(i);
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(i)] = e.what();
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    return errors;
}

// ---------------------------------------------------------------------------
// attack / ensemble-attack
// ---------------------------------------------------------------------------

int cmd_attack(const RunConfig& rc, bool ensemble) {
    if (rc.target.empty()) throw ConfigError("config: target is required");
    require_path_exists("word_set", rc.word_set);
    require_path_exists("patch_set", rc.patch_set);

    AttackConfig config;
    config.epsilon = rc.epsilon;
    config.alpha = rc.alpha;
    config.iterations = rc.iterations;
    config.target = rc.target;
    config.prompt = rc.prompt;
    config.augmentation = build_augmentation(rc, rc.method);
    config.seed = rc.seed;
    config.zero_init_delta = rc.zero_init_delta;
    if (rc.aggregation == "mean")
        config.aggregation = EnsembleAggregation::Mean;
    else if (rc.aggregation == "sum")
        config.aggregation = EnsembleAggregation::Sum;
    else
        throw ConfigError("config: aggregation must be mean or sum (got '" + rc.aggregation +
                          "')");
    try {
        config.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (rc.parallelism < 1) throw ConfigError("config: parallelism must be >= 1");

    ModelPool pool = build_models(rc, /*surrogates=*/true, /*victims=*/false, /*scorer=*/false);
    if (!ensemble && pool.surrogates.size() != 1)
        throw ConfigError("config: attack takes exactly one surrogate (ensemble-attack takes "
                          "several); got " +
                          std::to_string(pool.surrogates.size()));

    const std::vector<NamedImage> images = list_images(rc.input);
    const fs::path out = require_out_dir(rc);
    ensure_distinct_dirs(rc.input, rc.out);
    fs::create_directories(out / "adv");
    fs::create_directories(out / "manifests");

    bool parallel_ok = true;
    for (const auto& s : pool.surrogates) parallel_ok = parallel_ok && s->thread_safe();

    struct Outcome {
        std::string image_id;
        std::string error;
        int iteration = -1;
        std::string adapter_id;
        double final_objective = 0.0;
        bool ok = false;
    };
    std::vector<Outcome> outcomes(images.size());

    const std::string method_name = to_string(config.augmentation.method);
    const auto errors = run_jobs(
        static_cast<int>(images.size()), rc.parallelism, parallel_ok, [&](int i) {
            const NamedImage& item = images[static_cast<std::size_t>(i)];
            Outcome& outcome = outcomes[static_cast<std::size_t>(i)];
            outcome.image_id = item.id;
            const ImageBuffer image = load_image(item.path.string());
            Rng rng(mix_seed(config.seed, fnv1a64(item.id)));
            try {
                const AdversarialResult result =
                    ensemble ? ensemble_attack(pool.surrogates, image, config, rng)
                             : pgd_attack(*pool.surrogates.front(), image, config, rng);
                const std::string base = item.id + "." + method_name + "." + config.target;
                const fs::path png = out / "adv" / (base + ".png");
                save_image(result.adversarial_image, png.string());
                write_manifest(result, (out / "manifests" / (base + ".json")).string(),
                               png.string());
                outcome.final_objective = result.objective_trace.empty()
                                              ? 0.0
                                              : result.objective_trace.back();
                outcome.ok = true;
            } catch (const AttackError& e) {
                // An aborted run writes no artifacts, only its summary entry.
                outcome.error = e.what();
                outcome.iteration = e.iteration;
                outcome.adapter_id = e.adapter_id;
            }
        });
    for (std::size_t i = 0; i < outcomes.size(); ++i)
        if (!errors[i].empty() && outcomes[i].ok) {
            outcomes[i].ok = false;
            outcomes[i].error = errors[i];
        } else if (!errors[i].empty() && outcomes[i].error.empty()) {
            outcomes[i].error = errors[i];
        }

    json failures = json::array();
    int ok_count = 0;
    for (const Outcome& o : outcomes) {
        if (o.ok) {
            ++ok_count;
            continue;
        }
        json f = {{"image_id", o.image_id}, {"error", o.error}};
        if (o.iteration >= 0) f["iteration"] = o.iteration;
        if (!o.adapter_id.empty()) f["adapter_id"] = o.adapter_id;
        failures.push_back(std::move(f));
    }
    const json summary = {{"version", "xadv-1"},
                          {"command", ensemble ? "ensemble-attack" : "attack"},
                          {"method", method_name},
                          {"target", config.target},
                          {"runs", images.size()},
                          {"succeeded", ok_count},
                          {"failures", failures},
                          {"complete", failures.empty()}};
    write_json_atomic(summary, out / "attack_summary.json");

    for (const Outcome& o : outcomes) {
        if (o.ok)
            std::cout << o.image_id << ": final objective " << o.final_objective << "\n";
        else
            std::cout << o.image_id << ": FAILED (" << o.error << ")\n";
    }
    if (!failures.empty()) {
        std::cerr << json{{"error", std::to_string(failures.size()) + " of " +
                                        std::to_string(images.size()) + " attack runs failed"},
                          {"summary", (out / "attack_summary.json").string()}}
                         .dump()
                  << "\n";
        return 1;
    }
    std::cout << "wrote " << ok_count << " adversarial images under " << (out / "adv").string()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

std::vector<std::string> load_prompts(const RunConfig& rc) {
    if (rc.prompts.empty()) return {rc.prompt};
    std::ifstream in(rc.prompts);
    if (!in.good()) throw ConfigError("config: cannot open prompts file " + rc.prompts);
    std::vector<std::string> prompts;
    std::string line;
    while (std::getline(in, line)) {
        const std::string text = trim(line);
        if (!text.empty() && text[0] != '#') prompts.push_back(text);
    }
    if (prompts.empty()) throw ConfigError("config: prompts file " + rc.prompts + " is empty");
    return prompts;
}

std::map<std::string, std::string> load_captions(const std::string& path) {
    std::map<std::string, std::string> captions;
    if (path.empty()) return captions;
    std::ifstream in(path);
    if (!in.good()) throw ConfigError("config: cannot open captions file " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ConfigError("config: " + path + ":" + std::to_string(line_no) +
                              ": expected id<TAB>caption");
        captions[trim(line.substr(0, tab))] = trim(line.substr(tab + 1));
    }
    return captions;
}

// "<base>.<method>.<target>" -> base; plain "<base>" stays itself.
std::string base_id_of(const std::string& stem) {
    const auto dot = stem.find('.');
    return dot == std::string::npos ? stem : stem.substr(0, dot);
}

std::string method_of(const std::string& stem) {
    const auto first = stem.find('.');
    if (first == std::string::npos) return "none";
    const auto second = stem.find('.', first + 1);
    return stem.substr(first + 1,
                       second == std::string::npos ? std::string::npos : second - first - 1);
}

// Pulls the surrogate ids from the manifest written next to the attack
// output, when present.
std::string surrogate_of(const fs::path& adv_path) {
    const fs::path manifest =
        adv_path.parent_path().parent_path() / "manifests" / (adv_path.stem().string() + ".json");
    if (!fs::exists(manifest)) return "unknown";
    try {
        std::ifstream in(manifest);
        const json j = json::parse(in);
        const auto ids = j.at("surrogate_ids").get<std::vector<std::string>>();
        if (ids.empty()) return "unknown";
        std::string joined = ids.front();
        for (std::size_t i = 1; i < ids.size(); ++i) joined += "+" + ids[i];
        return joined;
    } catch (const std::exception&) {
        return "unknown";
    }
}

int cmd_evaluate(const RunConfig& rc) {
    if (rc.target.empty()) throw ConfigError("config: target is required");
    if (rc.clean_dir.empty()) throw ConfigError("config: clean_dir is required for evaluate");
    require_path_exists("clean_dir", rc.clean_dir);
    if (rc.parallelism < 1) throw ConfigError("config: parallelism must be >= 1");

    ModelPool pool = build_models(rc, /*surrogates=*/false, /*victims=*/true, /*scorer=*/true);

    const std::vector<NamedImage> adv_files = list_images(rc.input);
    const std::vector<NamedImage> clean_files = list_images(rc.clean_dir);
    std::map<std::string, ImageBuffer> clean_images;
    for (const NamedImage& c : clean_files) clean_images.emplace(c.id, load_image(c.path.string()));
    const std::map<std::string, std::string> captions = load_captions(rc.captions);

    const std::vector<std::string> prompts = load_prompts(rc);
    const fs::path out = require_out_dir(rc);

    // Reference descriptions: the captions file when given, otherwise the
    // first victim's description of the clean image.
    std::map<std::string, std::string> descriptions;
    const auto describe = [&](const std::string& base) -> const std::string& {
        auto it = descriptions.find(base);
        if (it == descriptions.end()) {
            const auto cap = captions.find(base);
            std::string text = cap != captions.end()
                                   ? cap->second
                                   : pool.victims.front()->generate(clean_images.at(base),
                                                                    prompts.front());
            it = descriptions.emplace(base, std::move(text)).first;
        }
        return it->second;
    };

    std::vector<AdversarialInput> inputs;
    std::map<std::string, CleanReference> refs;
    std::set<std::string> bases;
    for (const NamedImage& item : adv_files) {
        const std::string base = base_id_of(item.id);
        if (!clean_images.count(base))
            throw ConfigError("evaluate: no clean reference image for '" + base + "' in " +
                              rc.clean_dir);
        AdversarialInput input;
        input.id = item.id;
        input.image = load_image(item.path.string());
        input.method = method_of(item.id);
        input.surrogate_id = surrogate_of(item.path);
        refs.emplace(input.id, CleanReference{clean_images.at(base), describe(base)});
        inputs.push_back(std::move(input));
        bases.insert(base);
    }
    if (rc.include_clean) {
        for (const std::string& base : bases) {
            AdversarialInput input;
            input.id = base + ".clean";
            input.image = clean_images.at(base);
            input.method = "clean";
            input.surrogate_id = "none";
            refs.emplace(input.id, CleanReference{clean_images.at(base), describe(base)});
            inputs.push_back(std::move(input));
        }
    }
    std::sort(inputs.begin(), inputs.end(),
              [](const AdversarialInput& a, const AdversarialInput& b) { return a.id < b.id; });

    EvaluateOptions options;
    options.defense = build_defense(rc);
    options.whole_word_asr = rc.whole_word_asr;
    options.clip_weight = rc.clip_weight;
    options.seed = rc.seed;
    options.parallelism = rc.parallelism;

    const std::vector<EvaluationRecord> records = evaluate_matrix(
        inputs, pool.victims, prompts, rc.target, *pool.scorer, refs, options);
    write_records_csv(records, (out / "records.csv").string());
    write_summary_json(records, rc.target, (out / "summary.json").string());

    int failed = 0;
    for (const EvaluationRecord& r : records) failed += r.failed ? 1 : 0;
    for (const CellAggregate& agg : aggregate_records(records))
        std::cout << agg.victim_id << " / " << agg.method << ": asr " << agg.asr << " over "
                  << agg.cells << " cells (" << agg.failed << " failed)\n";
    std::cout << "wrote " << records.size() << " records to " << (out / "records.csv").string()
              << "\n";
    if (failed > 0) {
        std::cerr << json{{"error", std::to_string(failed) + " of " +
                                        std::to_string(records.size()) +
                                        " evaluation cells failed"},
                          {"summary", (out / "summary.json").string()}}
                         .dump()
                  << "\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// defend
// ---------------------------------------------------------------------------

int cmd_defend(const RunConfig& rc) {
    const DefenseSpec defense = build_defense(rc);
    const std::vector<NamedImage> images = list_images(rc.input);
    const fs::path out = require_out_dir(rc);
    ensure_distinct_dirs(rc.input, rc.out);
    if (rc.parallelism < 1) throw ConfigError("config: parallelism must be >= 1");

    const auto errors = run_jobs(
        static_cast<int>(images.size()), rc.parallelism, true, [&](int i) {
            const NamedImage& item = images[static_cast<std::size_t>(i)];
            const ImageBuffer image = load_image(item.path.string());
            Rng rng(mix_seed(rc.seed, fnv1a64(item.id)));
            save_image(apply_defense(image, defense, rng),
                       (out / item.path.filename()).string());
        });

    json failures = json::array();
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty())
            failures.push_back({{"image_id", images[i].id}, {"error", errors[i]}});
    if (!failures.empty()) {
        std::cerr << json{{"error", "defend failed on " + std::to_string(failures.size()) +
                                        " images"},
                          {"failures", failures}}
                         .dump()
                  << "\n";
        return 1;
    }
    std::cout << "wrote " << images.size() << " defended images (" << to_string(defense.kind)
              << ") to " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

int cmd_analyze(const RunConfig& rc) {
    if (rc.target.empty()) throw ConfigError("config: target is required");
    if (rc.views < 1) throw ConfigError("config: views must be >= 1");
    const std::vector<NamedImage> images = list_images(rc.input);
    if (images.size() != 1)
        throw ConfigError("analyze: input must be a single image (got " +
                          std::to_string(images.size()) + ")");
    const ImageBuffer clean = load_image(images.front().path.string());

    const std::vector<std::string> method_names = split_list(rc.analyze_methods);
    if (method_names.empty()) throw ConfigError("config: analyze_methods is empty");
    for (const std::string& name : method_names)
        if (parse_aug_method(name) == AugMethod::None)
            throw ConfigError("analyze: method none produces no views; remove it from "
                              "analyze_methods");

    ModelPool pool = build_models(rc, /*surrogates=*/false, /*victims=*/false, /*scorer=*/true);
    const fs::path out = require_out_dir(rc);
    fs::create_directories(out / "analysis");

    // One augmented-view cluster per method; every view is embedded and the
    // PCA plane is fitted on the union of all clusters plus the clean image.
    std::vector<std::vector<double>> embeddings;
    std::vector<std::pair<std::string, std::size_t>> cluster_sizes;
    std::vector<std::pair<std::string, ImageBuffer>> representative;
    representative.emplace_back("clean", clean);
    for (const std::string& name : method_names) {
        const AugmentationSpec spec = build_augmentation(rc, name);
        Rng rng(mix_seed(rc.seed, fnv1a64(name)));
        for (int v = 0; v < rc.views; ++v) {
            const ImageBuffer view = augment(clean, spec, rng);
            if (v == 0) representative.emplace_back(name, view);
            embeddings.push_back(pool.scorer->embed_image(view));
        }
        cluster_sizes.emplace_back(name, static_cast<std::size_t>(rc.views));
    }
    const std::vector<double> clean_embedding = pool.scorer->embed_image(clean);

    const PcaResult pca = pca_project(embeddings, clean_embedding);

    std::vector<ClusterProjection> clusters;
    std::size_t offset = 0;
    for (const auto& [name, size] : cluster_sizes) {
        ClusterProjection cluster;
        cluster.method = name;
        cluster.origin = pca.clean_projection;
        cluster.points.assign(pca.projections.begin() + static_cast<std::ptrdiff_t>(offset),
                              pca.projections.begin() + static_cast<std::ptrdiff_t>(offset + size));
        clusters.push_back(std::move(cluster));
        offset += size;
    }
    write_projection_csv(clusters, (out / "analysis" / "projections.csv").string());

    // A draw that leaves the image unchanged (e.g. dim's identity branch)
    // projects exactly onto the clean origin and has no direction; such
    // points stay in the scatter CSV but cannot contribute to the mean angle.
    std::vector<std::pair<std::string, double>> angles;
    std::map<std::string, double> angle_of;
    for (const ClusterProjection& cluster : clusters) {
        ClusterProjection directed = cluster;
        directed.points.clear();
        for (const auto& p : cluster.points)
            if (p[0] != cluster.origin[0] || p[1] != cluster.origin[1])
                directed.points.push_back(p);
        if (const std::size_t dropped = cluster.points.size() - directed.points.size())
            std::cout << cluster.method << ": " << dropped
                      << " identity views excluded from the mean angle\n";
        const double a = mean_angle(directed, rc.circular_mean);
        angles.emplace_back(cluster.method, a);
        angle_of[cluster.method] = a;
    }
    write_angles_csv(angles, (out / "analysis" / "angles.csv").string());

    // Semantic methods against the standard pixel-method reference sets.
    const std::vector<std::string> semantic{"admix", "aip", "tatm"};
    const std::vector<std::vector<std::string>> pixel_sets{
        {"bc", "sim", "tim"}, {"dim", "sim", "bc", "tim", "sia"}};
    std::vector<AngularDifferenceRow> rows;
    for (const std::string& sem : semantic) {
        if (!angle_of.count(sem)) continue;
        for (const auto& set : pixel_sets) {
            std::vector<double> pixel_angles;
            for (const std::string& p : set)
                if (angle_of.count(p)) pixel_angles.push_back(angle_of.at(p));
            if (pixel_angles.empty()) continue;
            rows.push_back({sem, static_cast<int>(pixel_angles.size()),
                            angular_difference(angle_of.at(sem), pixel_angles)});
        }
    }
    write_angular_difference_csv(rows, (out / "analysis" / "angular_difference.csv").string());

    std::vector<std::string> texts = split_list(rc.similarity_texts);
    if (texts.empty()) texts.push_back(rc.target);
    std::vector<std::string> image_labels;
    for (const auto& [label, image] : representative) image_labels.push_back(label);
    const auto table = similarity_table(*pool.scorer, representative, texts);
    write_similarity_csv(image_labels, texts, table,
                         (out / "analysis" / "similarity.csv").string());

    std::cout << "explained variance: " << pca.explained_fraction[0] << " + "
              << pca.explained_fraction[1] << "\n";
    for (const auto& [method, angle] : angles)
        std::cout << "mean angle " << method << ": " << angle << " rad\n";
    for (const AngularDifferenceRow& r : rows)
        std::cout << "angular difference " << r.semantic_method << " (k=" << r.k
                  << "): " << r.value << " rad\n";
    std::cout << "wrote analysis CSVs to " << (out / "analysis").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// render-aug
// ---------------------------------------------------------------------------

int cmd_render_aug(const RunConfig& rc) {
    const std::vector<NamedImage> images = list_images(rc.input);
    const AugmentationSpec spec = build_augmentation(rc, rc.method);
    const fs::path out = require_out_dir(rc);
    ensure_distinct_dirs(rc.input, rc.out);
    fs::create_directories(out / "render");
    for (const NamedImage& item : images) {
        const ImageBuffer image = load_image(item.path.string());
        Rng rng(mix_seed(rc.seed, fnv1a64(item.id)));
        const fs::path path = out / "render" / (item.id + "." + rc.method + ".png");
        save_image(augment(image, spec, rng), path.string());
        std::cout << "wrote " << path.string() << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

int usage(const ConfigSchema& schema, std::ostream& os, int status) {
    os << "usage: xadv <subcommand> [--config FILE] [--key value ...]\n\n"
          "subcommands:\n"
          "  attack           craft adversarial images with one surrogate\n"
          "  ensemble-attack  craft with several surrogates (mean/sum aggregation)\n"
          "  evaluate         run the image x victim x prompt matrix and score it\n"
          "  defend           apply a defense to a directory of images\n"
          "  analyze          embed augmented views, fit PCA, write angle CSVs\n"
          "  render-aug       apply one augmentation draw (debugging aid)\n\n"
          "Configuration precedence: defaults < --config file < XADV_* environment\n"
          "variables < flags. Config files hold 'key = value' lines ('#' comments).\n"
          "Every key below is also a flag (--key value, '-' and '_' interchangeable)\n"
          "and an environment variable (XADV_<KEY> upper-cased).\n\n"
          "keys:\n";
    for (const auto& k : schema.keys()) {
        os << "  " << k.name;
        for (std::size_t i = k.name.size(); i < 22; ++i) os << ' ';
        os << k.help << "\n";
    }
    os << "\nexamples:\n"
          "  xadv attack --input images/ --out run1 --target vitacease --method tatm \\\n"
          "       --word-set toy --iterations 200\n"
          "  xadv evaluate --input run1/adv --clean-dir images/ --out run1 \\\n"
          "       --target vitacease --victims 'toy-shared;toy-independent'\n"
          "  xadv analyze --input images/img_0.png --out run1 --target vitacease --views 50\n";
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    const ConfigSchema schema;
    if (argc < 2) return usage(schema, std::cerr, 2);
    const std::string subcommand = argv[1];
    if (subcommand == "--help" || subcommand == "-h" || subcommand == "help")
        return usage(schema, std::cout, 0);

    try {
        // Pass 1: find the config file (flag wins over environment).
        std::string config_path;
        if (const char* env = std::getenv("XADV_CONFIG"); env && *env) config_path = env;
        for (int i = 2; i < argc; ++i) {
            const std::string arg = argv[i];
            if (arg == "--config" && i + 1 < argc)
                config_path = argv[++i];
            else if (arg.rfind("--config=", 0) == 0)
                config_path = arg.substr(9);
        }

        RunConfig rc;
        if (!config_path.empty()) apply_config_file(schema, rc, config_path);
        apply_environment(schema, rc);

        // Pass 2: remaining flags override everything.
        for (int i = 2; i < argc; ++i) {
            std::string arg = argv[i];
            if (arg == "--help" || arg == "-h") return usage(schema, std::cout, 0);
            if (arg.rfind("--", 0) != 0)
                throw ConfigError("config: unexpected argument '" + arg +
                                  "' (flags look like --key value)");
            arg = arg.substr(2);
            std::string value;
            bool has_value = false;
            const auto eq = arg.find('=');
            if (eq != std::string::npos) {
                value = arg.substr(eq + 1);
                arg = arg.substr(0, eq);
                has_value = true;
            }
            const std::string key = normalize_flag(arg);
            if (key == "config") {
                if (!has_value) ++i;  // consumed in pass 1
                continue;
            }
            const KeyInfo* info = schema.find(key);
            if (!info) throw ConfigError("config: unknown key '" + key + "' (flag --" + arg + ")");
            if (!has_value) {
                if (info->is_bool && (i + 1 >= argc || std::string(argv[i + 1]).rfind("--", 0) == 0)) {
                    value = "true";  // bare boolean flag
                } else if (i + 1 < argc) {
                    value = argv[++i];
                } else {
                    throw ConfigError("config: flag --" + arg + " needs a value");
                }
            }
            info->set(rc, value);
        }

        if (subcommand == "attack") return cmd_attack(rc, /*ensemble=*/false);
        if (subcommand == "ensemble-attack") return cmd_attack(rc, /*ensemble=*/true);
        if (subcommand == "evaluate") return cmd_evaluate(rc);
        if (subcommand == "defend") return cmd_defend(rc);
        if (subcommand == "analyze") return cmd_analyze(rc);
        if (subcommand == "render-aug") return cmd_render_aug(rc);
        std::cerr << nlohmann::json{{"error", "unknown subcommand '" + subcommand + "'"}}.dump()
                  << "\n";
        return usage(schema, std::cerr, 2);
    } catch (const ConfigError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
}
