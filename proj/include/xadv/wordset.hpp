#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xadv/image.hpp"
#include "xadv/rng.hpp"

namespace xadv {

enum class PartOfSpeech { Noun, Adjective, Verb, Unknown };

std::string to_string(PartOfSpeech pos);
// Parses "noun" / "adjective" / "verb"; anything else is an error.
PartOfSpeech parse_part_of_speech(const std::string& text);

struct WordEntry {
    std::string word;
    PartOfSpeech pos = PartOfSpeech::Unknown;
};

struct WordSet {
    std::vector<WordEntry> entries;
    std::string source;
};

// UTF-8 text file, one entry per line: "word<TAB>pos". A line without a tab
// stores the word with part of speech unknown. Blank lines are skipped;
// an empty word, control characters, or an unrecognized pos tag reject the
// whole file with the line number. An empty result is an error.
WordSet load_word_set(const std::string& path);

// Builds a set in memory (tests, built-in vocabularies).
WordSet make_word_set(const std::vector<WordEntry>& entries, const std::string& source);

// Draws `amount` words uniformly from the entries matching `pos` (all entries
// when pos is empty): without replacement while the pool lasts, with
// replacement otherwise. Empty pool or amount < 1 is an error.
std::vector<std::string> sample_words(const WordSet& words, std::optional<PartOfSpeech> pos,
                                      int amount, Rng& rng);

struct PatchSet {
    std::vector<ImageBuffer> entries;
    std::vector<std::string> names;
    std::string source;
};

// Loads every .png in the directory, sorted by filename. Empty directory is
// an error.
PatchSet load_patch_set(const std::string& dir);

}  // namespace xadv
