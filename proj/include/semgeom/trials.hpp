#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semgeom/config.hpp"
#include "semgeom/types.hpp"
#include "semgeom/vocab.hpp"

namespace semgeom {

struct FcTrial {
    WordId cue = 0;
    std::uint32_t group_index = 0;
    std::vector<WordId> candidates;
    std::uint64_t seed = 0;  // the cue's shuffle seed
};

struct FaTrial {
    WordId cue = 0;
    std::uint32_t run_index = 0;
    std::uint64_t sampling_seed = 0;
};

// ceil((|V| - 1) / candidate_set_size)
std::size_t fc_trials_per_cue(std::size_t vocab_size, int candidate_set_size);

// One Fisher-Yates shuffle of V \ {cue} per cue, seeded by cue_seed(master, cue),
// then cut into consecutive groups of candidate_set_size; the short remainder
// is kept as the final group.
std::vector<FcTrial> generate_fc_trials_for_cue(WordId cue, std::size_t vocab_size, const RunConfig& cfg);
std::vector<FcTrial> generate_fc_trials(const Vocabulary& vocab, const RunConfig& cfg);

std::uint64_t fa_sampling_seed(std::uint64_t master_seed, WordId cue, std::uint32_t run_index);
std::vector<FaTrial> generate_fa_trials(const Vocabulary& vocab, const RunConfig& cfg);

// Seed for FC attempt `attempt` (0-based) of a trial.
std::uint64_t fc_attempt_seed(std::uint64_t master_seed, WordId cue, std::uint32_t group_index, int attempt);

std::string render_fc_prompt(const FcTrial& trial, const Vocabulary& vocab, const RunConfig& cfg);
std::string render_fc_prompt(std::string_view cue, std::span<const std::string> candidates, int n_picks);
std::string render_fa_prompt(std::string_view cue, const RunConfig& cfg);
// `averaged` has no prompt (it reads natural contexts) and is rejected.
std::string render_extraction_prompt(Strategy strategy, std::string_view cue, const RunConfig& cfg);

// JSON-lines manifest: {"paradigm","cue","group_index"|"run_index","candidates","seed"}.
void write_fc_manifest(std::ostream& out, std::span<const FcTrial> trials, const Vocabulary& vocab);
void write_fa_manifest(std::ostream& out, std::span<const FaTrial> trials, const Vocabulary& vocab);
std::vector<FcTrial> read_fc_manifest(std::istream& in, const Vocabulary& vocab);
std::vector<FaTrial> read_fa_manifest(std::istream& in, const Vocabulary& vocab);

}  // namespace semgeom
