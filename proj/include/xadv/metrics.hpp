#pragma once

#include <string>
#include <vector>

#include "xadv/image.hpp"
#include "xadv/models.hpp"

namespace xadv {

// Lowercases and splits on every non-alphanumeric byte.
std::vector<std::string> tokenize_lower(const std::string& text);

// Case-insensitive containment of target in response. In whole-word mode the
// target must appear as a complete token instead of any substring.
bool response_hits_target(const std::string& response, const std::string& target,
                          bool whole_word = false);

// Fraction of responses that hit the target. Empty response list or empty
// target is an error.
double attack_success_rate(const std::vector<std::string>& responses, const std::string& target,
                           bool whole_word = false);

// weight * max(0, cos(image embedding, text embedding)) * 100.
double clip_score(EmbeddingScorer& scorer, const ImageBuffer& image, const std::string& text,
                  double weight = 1.0);

// Unigram F1 over tokenize_lower tokens with clipped match counts; 0 when
// either side has no tokens or there is no overlap.
double rouge1_f1(const std::string& candidate, const std::string& reference);

}  // namespace xadv
