#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xadv/defense.hpp"
#include "xadv/image.hpp"
#include "xadv/metrics.hpp"
#include "xadv/models.hpp"

namespace xadv {

// One adversarial image entering the evaluation matrix.
struct AdversarialInput {
    std::string id;
    ImageBuffer image;
    std::string method = "none";
    std::string surrogate_id = "unknown";
};

// Clean counterpart of an adversarial image: the original pixels plus a
// reference description for overlap scoring.
struct CleanReference {
    ImageBuffer image;
    std::string description;
};

struct EvaluationRecord {
    std::string image_id;
    std::string method;
    std::string surrogate_id;
    std::string victim_id;
    std::string prompt_id;    // "p<index>" into the prompt list
    std::string defense;
    std::string target;
    bool hit = false;
    double clip_score = 0.0;   // NaN when the cell failed
    double rouge_1_f1 = 0.0;   // NaN when the cell failed
    std::string response;      // victim output, or the failure message
    bool failed = false;
};

struct EvaluateOptions {
    DefenseSpec defense;            // kind None evaluates undefended
    bool whole_word_asr = false;
    double clip_weight = 1.0;
    std::uint64_t seed = 0;         // drives per-cell defense noise
    int parallelism = 1;
};

// Runs every (image, victim, prompt) cell: apply the defense, query the
// victim, and score the response against the clean reference. A cell whose
// adapter throws becomes a failed record (metrics NaN) instead of aborting
// the run. Record order is images x victims x prompts, in input order.
std::vector<EvaluationRecord> evaluate_matrix(
    const std::vector<AdversarialInput>& adversarial,
    const std::vector<std::shared_ptr<VictimModel>>& victims,
    const std::vector<std::string>& prompts, const std::string& target,
    EmbeddingScorer& scorer, const std::map<std::string, CleanReference>& clean_refs,
    const EvaluateOptions& options);

// Per (victim, method) aggregate recomputed from records; failed cells are
// counted but excluded from the metric means.
struct CellAggregate {
    std::string victim_id;
    std::string method;
    int cells = 0;
    int failed = 0;
    double asr = 0.0;
    double mean_clip_score = 0.0;
    double mean_rouge_1_f1 = 0.0;
};

std::vector<CellAggregate> aggregate_records(const std::vector<EvaluationRecord>& records);

void write_records_csv(const std::vector<EvaluationRecord>& records, const std::string& path);
// Summary JSON: target, completeness, failure count, and the aggregates.
void write_summary_json(const std::vector<EvaluationRecord>& records, const std::string& target,
                        const std::string& path);

// RFC-4180 field quoting (always quoted, inner quotes doubled).
std::string csv_quote(const std::string& field);

}  // namespace xadv
