#include "semgeom/trials.hpp"

#include <numeric>

#include <json.hpp>

#include "semgeom/error.hpp"
#include "semgeom/rng.hpp"

namespace semgeom {

namespace {

constexpr std::uint64_t kFaStreamTag = 0xFA;
constexpr std::uint64_t kFcAttemptTag = 0xFC;

// Verbatim forced-choice template. The example block keeps its original
// line wrap; only {n_picks}, {input_word} and {candidate_list} are substituted.
constexpr std::string_view kFcHead =
    "You will be given one input word and a list of candidate words.\n"
    "Your task is to select exactly {n_picks} words from the list that are most\n"
    "similar or closely related to the input word.\n"
    "\n"
    "Rules:\n"
    "- Select exactly {n_picks} words.\n"
    "- Both selected words must come from the provided candidate list.\n"
    "- Do not select the input word.\n"
    "- Output must contain only the {n_picks} chosen words.\n"
    "- Use the format: output: word1, word2\n"
    "- Do not add any explanation, reasoning, commentary, or extra text.\n"
    "- Do not change spelling or number of words.\n"
    "\n"
    "Example:\n"
    "input word: dog\n"
    "candidates: [banana, violin, therapy, beer, tango, paper, cat, kiwi, \n"
    "             jeans, car, vacation, note, leash, bath, ceiling, ivy]\n"
    "output: cat, leash\n"
    "\n"
    "Now follow the same format.\n"
    "\n"
    "input word: {input_word}\n";
constexpr std::string_view kFcCandidates = "candidates: [{candidate_list}]\n";
constexpr std::string_view kFcTail = "output:";

constexpr std::string_view kFaTemplate =
    "You will be given one input word.\n"
    "Produce exactly five different single-word associations.\n"
    "\n"
    "Rules:\n"
    "- Output only five associated words.\n"
    "- Each must be a single word (no spaces or punctuation inside a word).\n"
    "- All five words must be different from each other.\n"
    "- Do not repeat the input word.\n"
    "- Order the words by how quickly they come to mind (first = strongest).\n"
    "- Format your answer as a single line starting with 'output:'.\n"
    "- Separate the five words with commas and a space.\n"
    "- End the line with a period.\n"
    "- Do not add any explanations or extra text.\n"
    "Example:\n"
    "input: dog.\n"
    "output: bark, leash, pet, animal, cat.\n"
    "\n"
    "input: {input_word}";

constexpr std::string_view kMeaningTemplate = "What is the meaning of the word {input_word}?";

std::string substitute(std::string_view tmpl, std::string_view key, std::string_view value) {
    std::string out;
    out.reserve(tmpl.size() + value.size());
    std::size_t pos = 0;
    while (true) {
        auto hit = tmpl.find(key, pos);
        if (hit == std::string_view::npos) break;
        out.append(tmpl.substr(pos, hit - pos));
        out.append(value);
        pos = hit + key.size();
    }
    out.append(tmpl.substr(pos));
    return out;
}

std::string fc_head(std::string_view cue, int n_picks) {
    return substitute(substitute(kFcHead, "{n_picks}", std::to_string(n_picks)), "{input_word}", cue);
}

}  // namespace

std::size_t fc_trials_per_cue(std::size_t vocab_size, int candidate_set_size) {
    const auto others = vocab_size - 1;
    const auto size = static_cast<std::size_t>(candidate_set_size);
    return (others + size - 1) / size;
}

std::vector<FcTrial> generate_fc_trials_for_cue(WordId cue, std::size_t vocab_size, const RunConfig& cfg) {
    std::vector<WordId> others;
    others.reserve(vocab_size - 1);
    for (WordId w = 0; w < vocab_size; ++w)
        if (w != cue) others.push_back(w);

    const std::uint64_t seed = cue_seed(cfg.master_seed, cue);
    SplitMix64 rng(seed);
    rng.shuffle(std::span<WordId>(others));

    const auto size = static_cast<std::size_t>(cfg.paradigm.candidate_set_size);
    std::vector<FcTrial> trials;
    trials.reserve(fc_trials_per_cue(vocab_size, cfg.paradigm.candidate_set_size));
    for (std::size_t begin = 0, g = 0; begin < others.size(); begin += size, ++g) {
        const auto end = std::min(begin + size, others.size());
        trials.push_back(FcTrial{cue, static_cast<std::uint32_t>(g),
                                 std::vector<WordId>(others.begin() + static_cast<std::ptrdiff_t>(begin),
                                                     others.begin() + static_cast<std::ptrdiff_t>(end)),
                                 seed});
    }
    return trials;
}

std::vector<FcTrial> generate_fc_trials(const Vocabulary& vocab, const RunConfig& cfg) {
    cfg.validate();
    std::vector<FcTrial> all;
    all.reserve(vocab.size() * fc_trials_per_cue(vocab.size(), cfg.paradigm.candidate_set_size));
    for (WordId cue = 0; cue < vocab.size(); ++cue) {
        auto per_cue = generate_fc_trials_for_cue(cue, vocab.size(), cfg);
        std::move(per_cue.begin(), per_cue.end(), std::back_inserter(all));
    }
    return all;
}

std::uint64_t fa_sampling_seed(std::uint64_t master_seed, WordId cue, std::uint32_t run_index) {
    return derive_seed(derive_seed(cue_seed(master_seed, cue), kFaStreamTag), run_index);
}

std::vector<FaTrial> generate_fa_trials(const Vocabulary& vocab, const RunConfig& cfg) {
    cfg.validate();
    std::vector<FaTrial> trials;
    trials.reserve(vocab.size() * static_cast<std::size_t>(cfg.paradigm.fa_runs));
    for (WordId cue = 0; cue < vocab.size(); ++cue)
        for (std::uint32_t run = 0; run < static_cast<std::uint32_t>(cfg.paradigm.fa_runs); ++run)
            trials.push_back(FaTrial{cue, run, fa_sampling_seed(cfg.master_seed, cue, run)});
    return trials;
}

std::uint64_t fc_attempt_seed(std::uint64_t master_seed, WordId cue, std::uint32_t group_index, int attempt) {
    const auto stream = derive_seed(cue_seed(master_seed, cue), kFcAttemptTag);
    return derive_seed(derive_seed(stream, group_index), static_cast<std::uint64_t>(attempt));
}

std::string render_fc_prompt(std::string_view cue, std::span<const std::string> candidates, int n_picks) {
    std::string list;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (i) list += ", ";
        list += candidates[i];
    }
    return fc_head(cue, n_picks) + substitute(kFcCandidates, "{candidate_list}", list) + std::string(kFcTail);
}

std::string render_fc_prompt(const FcTrial& trial, const Vocabulary& vocab, const RunConfig& cfg) {
    std::vector<std::string> words;
    words.reserve(trial.candidates.size());
    for (auto id : trial.candidates) words.push_back(vocab.word(id));
    return render_fc_prompt(vocab.word(trial.cue), words, cfg.paradigm.n_picks);
}

std::string render_fa_prompt(std::string_view cue, const RunConfig&) {
    return substitute(kFaTemplate, "{input_word}", cue);
}

std::string render_extraction_prompt(Strategy strategy, std::string_view cue, const RunConfig& cfg) {
    switch (strategy) {
        case Strategy::meaning: return substitute(kMeaningTemplate, "{input_word}", cue);
        case Strategy::task_fc: return fc_head(cue, cfg.paradigm.n_picks) + std::string(kFcTail);
        case Strategy::task_fa: return render_fa_prompt(cue, cfg);
        case Strategy::averaged: break;
    }
    throw Error(ErrorKind::config, "NO_PROMPT", "the averaged strategy reads natural contexts, not a prompt");
}

void write_fc_manifest(std::ostream& out, std::span<const FcTrial> trials, const Vocabulary& vocab) {
    for (const auto& t : trials) {
        nlohmann::json j;
        j["paradigm"] = "FC";
        j["cue"] = vocab.word(t.cue);
        j["group_index"] = t.group_index;
        auto& cands = j["candidates"] = nlohmann::json::array();
        for (auto id : t.candidates) cands.push_back(vocab.word(id));
        j["seed"] = t.seed;
        out << j.dump() << '\n';
    }
}

void write_fa_manifest(std::ostream& out, std::span<const FaTrial> trials, const Vocabulary& vocab) {
    for (const auto& t : trials) {
        nlohmann::json j;
        j["paradigm"] = "FA";
        j["cue"] = vocab.word(t.cue);
        j["run_index"] = t.run_index;
        j["candidates"] = nlohmann::json::array();
        j["seed"] = t.sampling_seed;
        out << j.dump() << '\n';
    }
}

namespace {

template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            fn(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::data, "BAD_MANIFEST", "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

}  // namespace

std::vector<FcTrial> read_fc_manifest(std::istream& in, const Vocabulary& vocab) {
    std::vector<FcTrial> trials;
    for_each_json_line(in, [&](const nlohmann::json& j) {
        FcTrial t;
        t.cue = vocab.id(j.at("cue").get<std::string>());
        t.group_index = j.at("group_index").get<std::uint32_t>();
        for (const auto& w : j.at("candidates")) t.candidates.push_back(vocab.id(w.get<std::string>()));
        t.seed = j.at("seed").get<std::uint64_t>();
        trials.push_back(std::move(t));
    });
    return trials;
}

std::vector<FaTrial> read_fa_manifest(std::istream& in, const Vocabulary& vocab) {
    std::vector<FaTrial> trials;
    for_each_json_line(in, [&](const nlohmann::json& j) {
        trials.push_back(FaTrial{vocab.id(j.at("cue").get<std::string>()), j.at("run_index").get<std::uint32_t>(),
                                 j.at("seed").get<std::uint64_t>()});
    });
    return trials;
}

}  // namespace semgeom
