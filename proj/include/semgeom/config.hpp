#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "semgeom/types.hpp"

namespace semgeom {

struct ParadigmParams {
    int candidate_set_size = 16;
    int n_picks = 2;
    int fa_words_per_run = 5;
    int fa_runs = 126;
};

// FC repair/retry protocol and decoding settings for both paradigms.
struct CollectionParams {
    int max_repairs = 1;
    int max_retries = 5;
    int fc_max_new_tokens = 10;
    double fc_retry_temperature = 0.5;
    double fc_retry_top_p = 0.9;
    int fa_max_new_tokens = 25;
    double fa_temperature = 0.7;
    double fa_top_p = 0.95;
    int batch_size = 128;  // in-flight bound, not a semantic unit
    int transport_retries = 3;
    int transport_backoff_ms = 200;
};

struct RidgeParams {
    double train_fraction = 0.8;
    int n_train_pairs = 100000;
    double alpha_grid_lo = 1e-2;
    double alpha_grid_hi = 1e6;
    int alpha_grid_n = 15;
    int cv_folds = 5;
    bool refit_standardization_per_fold = true;
};

struct RunConfig {
    ParadigmParams paradigm;
    CollectionParams collection;
    std::uint64_t master_seed = 42;
    int rsa_sample_pairs = 500000;
    std::vector<int> nn_k_list{5, 10, 20, 50, 100, 200};
    std::vector<int> svd_ranks{100, 300, 600};
    RidgeParams ridge;
    CenteringMode centering_mode = CenteringMode::centered;

    // Structural checks that do not depend on the vocabulary.
    void validate() const;
    // Adds the checks tied to |V| (k < |V|, |V| >= 2).
    void validate(std::size_t vocab_size) const;
};

void to_json(nlohmann::json& j, const RunConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, RunConfig& cfg);

RunConfig load_config(const std::filesystem::path& path);
// Stable text form, used for the config hash in the pipeline manifest.
std::string canonical_config_text(const RunConfig& cfg);

}  // namespace semgeom
