#include "semgeom/vocab.hpp"

#include <fstream>

#include "semgeom/error.hpp"
#include "semgeom/rng.hpp"

namespace semgeom {

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

}  // namespace

std::string normalize_word(std::string_view raw) {
    std::size_t b = 0, e = raw.size();
    while (b < e && is_space(static_cast<unsigned char>(raw[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(raw[e - 1]))) --e;
    std::string out(raw.substr(b, e - b));
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

Vocabulary Vocabulary::from_words(std::span<const std::string> words) {
    Vocabulary v;
    v.words_.reserve(words.size());
    for (const auto& raw : words) {
        std::string w = normalize_word(raw);
        if (w.empty()) throw Error(ErrorKind::data, "EMPTY_WORD", "vocabulary contains an empty word");
        const auto id = static_cast<WordId>(v.words_.size());
        if (!v.index_.emplace(w, id).second)
            throw Error(ErrorKind::data, "DUPLICATE_WORD",
                        "duplicate word '" + w + "' at positions " + std::to_string(v.index_.at(w)) + " and " +
                            std::to_string(id));
        v.words_.push_back(std::move(w));
    }
    if (v.words_.size() < 2)
        throw Error(ErrorKind::data, "VOCAB_TOO_SMALL", "vocabulary needs at least two words");
    return v;
}

std::optional<WordId> Vocabulary::find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

WordId Vocabulary::id(std::string_view word) const {
    if (auto found = find(word)) return *found;
    throw Error(ErrorKind::data, "UNKNOWN_WORD", "'" + std::string(word) + "' is not in the vocabulary");
}

std::uint64_t Vocabulary::fingerprint() const noexcept {
    std::uint64_t h = fnv1a("");
    for (const auto& w : words_) {
        h = fnv1a(w, h);
        h = fnv1a("\n", h);
    }
    return h;
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::data, "NOT_FOUND", "cannot open word list " + path.string());

    std::vector<std::string> words;
    std::unordered_map<std::string, std::size_t> first_line;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string w = normalize_word(line);
        if (w.empty()) continue;
        auto [it, fresh] = first_line.emplace(w, lineno);
        if (!fresh)
            throw Error(ErrorKind::data, "DUPLICATE_WORD",
                        "duplicate word '" + w + "' on lines " + std::to_string(it->second) + " and " +
                            std::to_string(lineno) + " of " + path.string());
        words.push_back(std::move(w));
    }
    if (words.empty()) throw Error(ErrorKind::data, "EMPTY_VOCAB", "word list " + path.string() + " is empty");
    return Vocabulary::from_words(words);
}

void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::data, "WRITE_FAILED", "cannot write " + path.string());
    for (const auto& w : vocab.words()) out << w << '\n';
}

}  // namespace semgeom
