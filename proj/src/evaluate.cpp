#include "xadv/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "xadv/image_io.hpp"
#include "xadv/rng.hpp"

namespace xadv {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string format_metric(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::vector<EvaluationRecord> evaluate_matrix(
    const std::vector<AdversarialInput>& adversarial,
    const std::vector<std::shared_ptr<VictimModel>>& victims,
    const std::vector<std::string>& prompts, const std::string& target,
    EmbeddingScorer& scorer, const std::map<std::string, CleanReference>& clean_refs,
    const EvaluateOptions& options) {
    if (adversarial.empty()) throw Error("evaluate: no adversarial images");
    if (victims.empty()) throw Error("evaluate: no victims");
    if (prompts.empty()) throw Error("evaluate: no prompts");
    if (target.empty()) throw Error("evaluate: empty target");
    options.defense.validate();
    for (const auto& v : victims)
        if (!v) throw Error("evaluate: null victim");
    for (const auto& a : adversarial)
        if (!clean_refs.count(a.id))
            throw Error("evaluate: no clean reference for image \"" + a.id + "\"");
    {
        std::set<std::string> ids;
        for (const auto& a : adversarial)
            if (!ids.insert(a.id).second)
                throw Error("evaluate: duplicate image id \"" + a.id + "\"");
        ids.clear();
        for (const auto& v : victims)
            if (!ids.insert(v->id()).second)
                throw Error("evaluate: duplicate victim id \"" + v->id() + "\"");
    }

    const std::size_t n_victims = victims.size();
    const std::size_t n_prompts = prompts.size();
    const std::size_t total = adversarial.size() * n_victims * n_prompts;
    std::vector<EvaluationRecord> records(total);

    // Scoring goes through one scorer instance; serialize it when cells run
    // in parallel. Victims that do not declare thread safety get a mutex each.
    std::mutex scorer_mu;
    std::vector<std::unique_ptr<std::mutex>> victim_mus;
    for (std::size_t i = 0; i < n_victims; ++i)
        victim_mus.push_back(std::make_unique<std::mutex>());

    const auto run_cell = [&](std::size_t flat) {
        const std::size_t pi = flat % n_prompts;
        const std::size_t vi = (flat / n_prompts) % n_victims;
        const std::size_t ai = flat / (n_prompts * n_victims);
        const AdversarialInput& adv = adversarial[ai];
        VictimModel& victim = *victims[vi];
        const CleanReference& ref = clean_refs.at(adv.id);

        EvaluationRecord rec;
        rec.image_id = adv.id;
        rec.method = adv.method;
        rec.surrogate_id = adv.surrogate_id;
        rec.victim_id = victim.id();
        rec.prompt_id = "p" + std::to_string(pi);
        rec.defense = to_string(options.defense.kind);
        rec.target = target;
        try {
            // One rng per cell, derived from the run seed and the cell
            // coordinates, so parallel order cannot change the draws.
            Rng cell_rng(mix_seed(options.seed,
                                  mix_seed(fnv1a64(adv.id),
                                           mix_seed(fnv1a64(victim.id()),
                                                    static_cast<std::uint64_t>(pi)))));
            const ImageBuffer defended = apply_defense(adv.image, options.defense, cell_rng);
            {
                std::unique_lock<std::mutex> victim_lock;
                if (!victim.thread_safe())
                    victim_lock = std::unique_lock<std::mutex>(*victim_mus[vi]);
                rec.response = victim.generate(defended, prompts[pi]);
            }
            rec.hit = response_hits_target(rec.response, target, options.whole_word_asr);
            {
                std::lock_guard<std::mutex> lock(scorer_mu);
                rec.clip_score = clip_score(scorer, ref.image, rec.response, options.clip_weight);
            }
            rec.rouge_1_f1 = rouge1_f1(rec.response, ref.description);
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.hit = false;
            rec.clip_score = kNan;
            rec.rouge_1_f1 = kNan;
            rec.response = std::string("[adapter failure] ") + e.what();
        }
        records[flat] = std::move(rec);
    };

    const int workers = std::max(1, options.parallelism);
    if (workers == 1) {
        for (std::size_t i = 0; i < total; ++i) run_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1))
                    run_cell(i);
            });
        for (auto& t : pool) t.join();
    }
    return records;
}

std::vector<CellAggregate> aggregate_records(const std::vector<EvaluationRecord>& records) {
    std::map<std::pair<std::string, std::string>, CellAggregate> cells;
    for (const EvaluationRecord& r : records) {
        CellAggregate& agg = cells[{r.victim_id, r.method}];
        agg.victim_id = r.victim_id;
        agg.method = r.method;
        ++agg.cells;
        if (r.failed) {
            ++agg.failed;
            continue;
        }
        agg.asr += r.hit ? 1.0 : 0.0;
        agg.mean_clip_score += r.clip_score;
        agg.mean_rouge_1_f1 += r.rouge_1_f1;
    }
    std::vector<CellAggregate> out;
    for (auto& [key, agg] : cells) {
        const int ok = agg.cells - agg.failed;
        if (ok > 0) {
            agg.asr /= ok;
            agg.mean_clip_score /= ok;
            agg.mean_rouge_1_f1 /= ok;
        } else {
            agg.asr = kNan;
            agg.mean_clip_score = kNan;
            agg.mean_rouge_1_f1 = kNan;
        }
        out.push_back(agg);
    }
    return out;
}

std::string csv_quote(const std::string& field) {
    std::string out = "\"";
    for (char c : field) {
        out.push_back(c);
        if (c == '"') out.push_back('"');
    }
    out.push_back('"');
    return out;
}

void write_records_csv(const std::vector<EvaluationRecord>& records, const std::string& path) {
    std::ostringstream os;
    os << "image_id,method,surrogate_id,victim_id,prompt_id,defense,target,hit,clip_score,"
          "rouge_1_f1,response\n";
    for (const EvaluationRecord& r : records) {
        os << r.image_id << ',' << r.method << ',' << r.surrogate_id << ',' << r.victim_id << ','
           << r.prompt_id << ',' << r.defense << ',' << r.target << ',' << (r.hit ? 1 : 0) << ','
           << format_metric(r.clip_score) << ',' << format_metric(r.rouge_1_f1) << ','
           << csv_quote(r.response) << '\n';
    }
    const std::string text = os.str();
    write_file_atomic(path, text.data(), text.size());
}

void write_summary_json(const std::vector<EvaluationRecord>& records, const std::string& target,
                        const std::string& path) {
    int failed = 0;
    for (const EvaluationRecord& r : records) failed += r.failed ? 1 : 0;

    nlohmann::json j;
    j["version"] = "xadv-1";
    j["target"] = target;
    j["records"] = records.size();
    j["failed_cells"] = failed;
    j["complete"] = failed == 0;
    j["aggregates"] = nlohmann::json::array();
    for (const CellAggregate& agg : aggregate_records(records)) {
        nlohmann::json a = {{"victim_id", agg.victim_id},
                            {"method", agg.method},
                            {"cells", agg.cells},
                            {"failed", agg.failed}};
        if (agg.cells > agg.failed) {
            a["asr"] = agg.asr;
            a["mean_clip_score"] = agg.mean_clip_score;
            a["mean_rouge_1_f1"] = agg.mean_rouge_1_f1;
        } else {
            a["asr"] = nullptr;
            a["mean_clip_score"] = nullptr;
            a["mean_rouge_1_f1"] = nullptr;
        }
        j["aggregates"].push_back(std::move(a));
    }
    const std::string text = j.dump(2) + "\n";
    write_file_atomic(path, text.data(), text.size());
}

}  // namespace xadv
