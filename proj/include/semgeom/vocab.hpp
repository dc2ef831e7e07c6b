#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semgeom/types.hpp"

namespace semgeom {

// Case-fold (ASCII) and trim surrounding whitespace. No lemmatization.
std::string normalize_word(std::string_view raw);

// Ordered list of unique cue words; the index space of every matrix.
class Vocabulary {
public:
    // Normalizes each word; throws on duplicates, empty words or fewer than two words.
    static Vocabulary from_words(std::span<const std::string> words);

    std::size_t size() const noexcept { return words_.size(); }
    const std::string& word(WordId id) const { return words_.at(id); }
    std::span<const std::string> words() const noexcept { return words_; }

    std::optional<WordId> find(std::string_view word) const;
    // Throws Error(data, "UNKNOWN_WORD") when absent.
    WordId id(std::string_view word) const;

    // FNV-1a over the newline-joined word list.
    std::uint64_t fingerprint() const noexcept;

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, WordId> index_;
};

// One word per line, UTF-8. Blank lines are skipped; duplicates after
// normalization are reported with both line numbers.
Vocabulary load_vocabulary(const std::filesystem::path& path);
void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);

}  // namespace semgeom
