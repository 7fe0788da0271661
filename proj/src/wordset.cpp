#include "xadv/wordset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "xadv/image_io.hpp"

namespace xadv {

std::string to_string(PartOfSpeech pos) {
    switch (pos) {
        case PartOfSpeech::Noun: return "noun";
        case PartOfSpeech::Adjective: return "adjective";
        case PartOfSpeech::Verb: return "verb";
        case PartOfSpeech::Unknown: return "unknown";
    }
    return "unknown";
}

PartOfSpeech parse_part_of_speech(const std::string& text) {
    if (text == "noun") return PartOfSpeech::Noun;
    if (text == "adjective") return PartOfSpeech::Adjective;
    if (text == "verb") return PartOfSpeech::Verb;
    throw Error("unrecognized part of speech: \"" + text + "\"");
}

WordSet load_word_set(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open word file: " + path);

    WordSet set;
    set.source = path;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        const auto where = [&] { return path + ":" + std::to_string(line_no); };
        const auto tab = line.find('\t');
        WordEntry entry;
        entry.word = line.substr(0, tab == std::string::npos ? line.size() : tab);
        if (entry.word.empty()) throw Error("word file: empty word at " + where());
        for (unsigned char c : entry.word)
            if (c < 0x20) throw Error("word file: control character in word at " + where());
        if (tab != std::string::npos) {
            const std::string tag = line.substr(tab + 1);
            try {
                entry.pos = parse_part_of_speech(tag);
            } catch (const Error&) {
                throw Error("word file: unrecognized part of speech \"" + tag + "\" at " +
                            where());
            }
        }
        set.entries.push_back(std::move(entry));
    }
    if (set.entries.empty()) throw Error("word file has no entries: " + path);
    return set;
}

WordSet make_word_set(const std::vector<WordEntry>& entries, const std::string& source) {
    if (entries.empty()) throw Error("word set has no entries: " + source);
    WordSet set;
    set.entries = entries;
    set.source = source;
    return set;
}

std::vector<std::string> sample_words(const WordSet& words, std::optional<PartOfSpeech> pos,
                                      int amount, Rng& rng) {
    if (amount < 1) throw Error("sample_words: amount must be >= 1");
    std::vector<const std::string*> pool;
    for (const WordEntry& e : words.entries)
        if (!pos || e.pos == *pos) pool.push_back(&e.word);
    if (pool.empty())
        throw Error("sample_words: no entries" +
                    (pos ? " with part of speech " + to_string(*pos) : std::string()) + " in " +
                    words.source);

    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(amount));
    if (static_cast<std::size_t>(amount) <= pool.size()) {
        // Partial Fisher-Yates: without replacement.
        for (int i = 0; i < amount; ++i) {
            const auto j = static_cast<std::size_t>(
                rng.uniform_int(i, static_cast<std::int64_t>(pool.size()) - 1));
            std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
            out.push_back(*pool[static_cast<std::size_t>(i)]);
        }
    } else {
        for (int i = 0; i < amount; ++i)
            out.push_back(
                *pool[rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1)]);
    }
    return out;
}

PatchSet load_patch_set(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error("patch directory not found: " + dir);

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error("patch directory has no .png files: " + dir);

    PatchSet set;
    set.source = dir;
    for (const auto& p : files) {
        set.entries.push_back(load_image(p.string()));
        set.names.push_back(p.filename().string());
    }
    return set;
}

}  // namespace xadv
