#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "semgeom/error.hpp"
#include "semgeom/trials.hpp"
#include "support.hpp"

using namespace semgeom;

TEST_CASE("fc trial count per cue is ceil((|V|-1)/set size)") {
    CHECK(fc_trials_per_cue(5000, 16) == 313);
    CHECK(fc_trials_per_cue(200, 16) == 13);
    CHECK(fc_trials_per_cue(50, 16) == 4);
    CHECK(fc_trials_per_cue(17, 16) == 1);
    CHECK(fc_trials_per_cue(18, 16) == 2);
    CHECK(fc_trials_per_cue(3, 16) == 1);
}

TEST_CASE("every cue's candidate sets partition the rest of the vocabulary") {
    RunConfig cfg;
    const std::size_t n = 200;
    for (WordId cue = 0; cue < n; ++cue) {
        const auto trials = generate_fc_trials_for_cue(cue, n, cfg);
        REQUIRE(trials.size() == 13);
        std::vector<int> seen(n, 0);
        for (std::size_t g = 0; g < trials.size(); ++g) {
            CHECK(trials[g].cue == cue);
            CHECK(trials[g].group_index == g);
            CHECK(trials[g].candidates.size() == (g + 1 < trials.size() ? 16u : 7u));
            for (auto w : trials[g].candidates) ++seen[w];
        }
        for (WordId w = 0; w < n; ++w) CHECK(seen[w] == (w == cue ? 0 : 1));
    }
}

TEST_CASE("toy and tiny vocabularies") {
    RunConfig cfg;
    CHECK(generate_fc_trials(testing::numbered_vocab(50), cfg).size() == 200);
    const auto tiny = generate_fc_trials(testing::numbered_vocab(3), cfg);
    REQUIRE(tiny.size() == 3);
    for (const auto& t : tiny) CHECK(t.candidates.size() == 2);
}

TEST_CASE("fa trial stream: runs per cue and distinct sampling seeds") {
    RunConfig cfg;
    const auto vocab = testing::numbered_vocab(5000);
    const auto trials = generate_fa_trials(vocab, cfg);
    CHECK(trials.size() == 630000);
    std::vector<std::uint64_t> seeds;
    seeds.reserve(trials.size());
    for (const auto& t : trials) seeds.push_back(t.sampling_seed);
    std::sort(seeds.begin(), seeds.end());
    CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
    CHECK(trials[127].cue == 1);
    CHECK(trials[127].run_index == 1);
}

TEST_CASE("cue seeds are collision-free within a vocabulary") {
    for (std::uint64_t master : {0ULL, 1ULL, 42ULL, 0xFFFFFFFFFFFFFFFFULL, 123456789ULL, 7ULL, 8ULL, 99ULL, 1000ULL,
                                 0x8000000000000000ULL}) {
        std::unordered_set<std::uint64_t> seen;
        for (std::uint64_t cue = 0; cue < 5000; ++cue) seen.insert(cue_seed(master, cue));
        CHECK(seen.size() == 5000);
    }
    SplitMix64 pick(99);
    int compared = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto a = pick(), b = pick();
        if (a == b) continue;
        ++compared;
        CHECK(cue_seed(a, 7) != cue_seed(b, 7));
    }
    CHECK(compared == 1000);
}

TEST_CASE("generation is a pure function of the master seed") {
    RunConfig a, b;
    const auto vocab = testing::numbered_vocab(120);
    CHECK(generate_fc_trials(vocab, a)[37].candidates == generate_fc_trials(vocab, b)[37].candidates);
    b.master_seed = 43;
    CHECK(generate_fc_trials(vocab, a)[37].candidates != generate_fc_trials(vocab, b)[37].candidates);
}

TEST_CASE("fc attempt seeds differ per attempt, group and cue") {
    std::set<std::uint64_t> seeds;
    for (WordId cue = 0; cue < 20; ++cue)
        for (std::uint32_t g = 0; g < 13; ++g)
            for (int a = 0; a < 7; ++a) seeds.insert(fc_attempt_seed(42, cue, g, a));
    CHECK(seeds.size() == 20 * 13 * 7);
}

TEST_CASE("fc prompt bytes") {
    const std::vector<std::string> cands{"apple", "river", "stone"};
    const std::string expected =
        "You will be given one input word and a list of candidate words.\n"
        "Your task is to select exactly 2 words from the list that are most\n"
        "similar or closely related to the input word.\n"
        "\n"
        "Rules:\n"
        "- Select exactly 2 words.\n"
        "- Both selected words must come from the provided candidate list.\n"
        "- Do not select the input word.\n"
        "- Output must contain only the 2 chosen words.\n"
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
        "input word: tree\n"
        "candidates: [apple, river, stone]\n"
        "output:";
    CHECK(render_fc_prompt("tree", cands, 2) == expected);
}

TEST_CASE("fa prompt bytes") {
    RunConfig cfg;
    const std::string expected =
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
        "input: tree";
    CHECK(render_fa_prompt("tree", cfg) == expected);
}

TEST_CASE("extraction prompts") {
    RunConfig cfg;
    CHECK(render_extraction_prompt(Strategy::meaning, "tree", cfg) == "What is the meaning of the word tree?");
    CHECK(render_extraction_prompt(Strategy::task_fa, "tree", cfg) == render_fa_prompt("tree", cfg));
    const auto fc = render_extraction_prompt(Strategy::task_fc, "tree", cfg);
    CHECK(fc.find("input word: tree\noutput:") != std::string::npos);
    CHECK(fc.find("candidates: [banana") != std::string::npos);  // worked example stays
    CHECK(fc.find("candidates: [{") == std::string::npos);
    CHECK(fc.size() > 0);
    CHECK(fc.substr(fc.size() - 7) == "output:");
    CHECK_THROWS_AS(render_extraction_prompt(Strategy::averaged, "tree", cfg), Error);
}

TEST_CASE("trial manifests round-trip") {
    RunConfig cfg;
    const auto vocab = testing::numbered_vocab(40);
    const auto fc = generate_fc_trials(vocab, cfg);
    const auto fa = generate_fa_trials(vocab, cfg);
    std::stringstream s1, s2;
    write_fc_manifest(s1, fc, vocab);
    write_fa_manifest(s2, fa, vocab);
    const auto fc2 = read_fc_manifest(s1, vocab);
    const auto fa2 = read_fa_manifest(s2, vocab);
    REQUIRE(fc2.size() == fc.size());
    REQUIRE(fa2.size() == fa.size());
    for (std::size_t i = 0; i < fc.size(); ++i) {
        CHECK(fc2[i].candidates == fc[i].candidates);
        CHECK(fc2[i].seed == fc[i].seed);
    }
    for (std::size_t i = 0; i < fa.size(); ++i) CHECK(fa2[i].sampling_seed == fa[i].sampling_seed);
    std::stringstream bad("{\"cue\": \"nope\", \"group_index\": 0, \"candidates\": [], \"seed\": 1}\n");
    CHECK_THROWS_AS(read_fc_manifest(bad, vocab), Error);
}
