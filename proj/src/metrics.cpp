#include "xadv/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace xadv {

namespace {

std::string lower_ascii(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::vector<std::string> tokenize_lower(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

bool response_hits_target(const std::string& response, const std::string& target,
                          bool whole_word) {
    if (target.empty()) throw Error("hit test: empty target");
    if (whole_word) {
        const std::string t = lower_ascii(target);
        const auto tokens = tokenize_lower(response);
        return std::find(tokens.begin(), tokens.end(), t) != tokens.end();
    }
    const std::string r = lower_ascii(response);
    const std::string t = lower_ascii(target);
    return r.find(t) != std::string::npos;
}

double attack_success_rate(const std::vector<std::string>& responses, const std::string& target,
                           bool whole_word) {
    if (responses.empty()) throw Error("attack success rate: no responses");
    std::size_t hits = 0;
    for (const std::string& r : responses)
        if (response_hits_target(r, target, whole_word)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(responses.size());
}

double clip_score(EmbeddingScorer& scorer, const ImageBuffer& image, const std::string& text,
                  double weight) {
    if (text.empty()) throw Error("clip score: empty text");
    const double c = cosine(scorer.embed_image(image), scorer.embed_text(text));
    return weight * std::max(0.0, c) * 100.0;
}

double rouge1_f1(const std::string& candidate, const std::string& reference) {
    const auto cand = tokenize_lower(candidate);
    const auto ref = tokenize_lower(reference);
    if (cand.empty() || ref.empty()) return 0.0;

    std::map<std::string, int> ref_counts;
    for (const std::string& t : ref) ++ref_counts[t];
    int overlap = 0;
    for (const std::string& t : cand) {
        auto it = ref_counts.find(t);
        if (it != ref_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / static_cast<double>(cand.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace xadv
