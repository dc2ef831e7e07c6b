#include "semgeom/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>

#include "semgeom/error.hpp"

namespace semgeom {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorKind::config, "BAD_CONFIG", message); }

void reject_unknown(const json& j, std::string_view section, std::initializer_list<std::string_view> known) {
    if (!j.is_object()) config_error(std::string(section) + " must be an object");
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            config_error("unknown key '" + key + "' in " + std::string(section));
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        config_error(std::string("bad value for '") + key + "': " + e.what());
    }
}

}  // namespace

void RunConfig::validate() const {
    const auto& p = paradigm;
    if (p.n_picks < 1) config_error("paradigm.n_picks must be >= 1");
    if (p.candidate_set_size < p.n_picks + 1) config_error("paradigm.candidate_set_size must be >= n_picks + 1");
    if (p.fa_words_per_run < 1) config_error("paradigm.fa_words_per_run must be >= 1");
    if (p.fa_runs < 1) config_error("paradigm.fa_runs must be >= 1");
    if (collection.max_repairs < 0 || collection.max_retries < 0) config_error("collection repair/retry counts must be >= 0");
    if (collection.batch_size < 1) config_error("collection.batch_size must be >= 1");
    if (collection.transport_retries < 0 || collection.transport_backoff_ms < 0)
        config_error("collection transport settings must be >= 0");
    if (!(collection.fc_retry_temperature > 0) || !(collection.fc_retry_top_p > 0) || collection.fc_retry_top_p > 1 ||
        !(collection.fa_temperature > 0) || !(collection.fa_top_p > 0) || collection.fa_top_p > 1)
        config_error("nucleus decoding needs temperature > 0 and 0 < top_p <= 1");
    if (rsa_sample_pairs < 1) config_error("rsa.sample_pairs must be >= 1");
    for (std::size_t i = 0; i < nn_k_list.size(); ++i) {
        if (nn_k_list[i] < 1) config_error("nn.k values must be >= 1");
        if (i > 0 && nn_k_list[i] <= nn_k_list[i - 1]) config_error("nn.k must be strictly increasing");
    }
    for (int k : svd_ranks)
        if (k < 1) config_error("svd.ranks must be >= 1");
    const auto& r = ridge;
    if (!(r.train_fraction > 0.0 && r.train_fraction < 1.0)) config_error("ridge.train_fraction must be in (0, 1)");
    if (r.cv_folds < 2) config_error("ridge.cv_folds must be >= 2");
    if (r.alpha_grid_n < 2) config_error("ridge.alpha_grid_n must be >= 2");
    if (!(r.alpha_grid_lo > 0) || !(r.alpha_grid_hi > r.alpha_grid_lo)) config_error("ridge alpha grid needs 0 < lo < hi");
    if (r.n_train_pairs < 1) config_error("ridge.n_train_pairs must be >= 1");
}

void RunConfig::validate(std::size_t vocab_size) const {
    validate();
    if (vocab_size < 2) config_error("vocabulary must contain at least two words");
    for (int k : nn_k_list)
        if (static_cast<std::size_t>(k) >= vocab_size)
            config_error("nn.k value " + std::to_string(k) + " must be < |V| = " + std::to_string(vocab_size));
}

void to_json(json& j, const RunConfig& c) {
    j = json{
        {"seed", c.master_seed},
        {"centering", std::string(to_string(c.centering_mode))},
        {"paradigm",
         {{"candidate_set_size", c.paradigm.candidate_set_size},
          {"n_picks", c.paradigm.n_picks},
          {"fa_words_per_run", c.paradigm.fa_words_per_run},
          {"fa_runs", c.paradigm.fa_runs}}},
        {"collection",
         {{"max_repairs", c.collection.max_repairs},
          {"max_retries", c.collection.max_retries},
          {"fc_max_new_tokens", c.collection.fc_max_new_tokens},
          {"fc_retry_temperature", c.collection.fc_retry_temperature},
          {"fc_retry_top_p", c.collection.fc_retry_top_p},
          {"fa_max_new_tokens", c.collection.fa_max_new_tokens},
          {"fa_temperature", c.collection.fa_temperature},
          {"fa_top_p", c.collection.fa_top_p},
          {"batch_size", c.collection.batch_size},
          {"transport_retries", c.collection.transport_retries},
          {"transport_backoff_ms", c.collection.transport_backoff_ms}}},
        {"rsa", {{"sample_pairs", c.rsa_sample_pairs}}},
        {"nn", {{"k", c.nn_k_list}}},
        {"svd", {{"ranks", c.svd_ranks}}},
        {"ridge",
         {{"train_fraction", c.ridge.train_fraction},
          {"n_train_pairs", c.ridge.n_train_pairs},
          {"alpha_grid_lo", c.ridge.alpha_grid_lo},
          {"alpha_grid_hi", c.ridge.alpha_grid_hi},
          {"alpha_grid_n", c.ridge.alpha_grid_n},
          {"cv_folds", c.ridge.cv_folds},
          {"refit_standardization_per_fold", c.ridge.refit_standardization_per_fold}}},
    };
}

void from_json(const json& j, RunConfig& c) {
    // "pipeline" belongs to the CLI and is parsed there.
    reject_unknown(j, "config", {"seed", "centering", "paradigm", "collection", "rsa", "nn", "svd", "ridge", "pipeline"});
    read(j, "seed", c.master_seed);
    if (j.contains("centering")) {
        if (!j["centering"].is_string()) config_error("centering must be a string");
        c.centering_mode = parse_centering(j["centering"].get<std::string>());
    }
    if (j.contains("paradigm")) {
        const auto& p = j["paradigm"];
        reject_unknown(p, "paradigm", {"candidate_set_size", "n_picks", "fa_words_per_run", "fa_runs"});
        read(p, "candidate_set_size", c.paradigm.candidate_set_size);
        read(p, "n_picks", c.paradigm.n_picks);
        read(p, "fa_words_per_run", c.paradigm.fa_words_per_run);
        read(p, "fa_runs", c.paradigm.fa_runs);
    }
    if (j.contains("collection")) {
        const auto& p = j["collection"];
        reject_unknown(p, "collection",
                       {"max_repairs", "max_retries", "fc_max_new_tokens", "fc_retry_temperature", "fc_retry_top_p",
                        "fa_max_new_tokens", "fa_temperature", "fa_top_p", "batch_size", "transport_retries",
                        "transport_backoff_ms"});
        auto& o = c.collection;
        read(p, "max_repairs", o.max_repairs);
        read(p, "max_retries", o.max_retries);
        read(p, "fc_max_new_tokens", o.fc_max_new_tokens);
        read(p, "fc_retry_temperature", o.fc_retry_temperature);
        read(p, "fc_retry_top_p", o.fc_retry_top_p);
        read(p, "fa_max_new_tokens", o.fa_max_new_tokens);
        read(p, "fa_temperature", o.fa_temperature);
        read(p, "fa_top_p", o.fa_top_p);
        read(p, "batch_size", o.batch_size);
        read(p, "transport_retries", o.transport_retries);
        read(p, "transport_backoff_ms", o.transport_backoff_ms);
    }
    if (j.contains("rsa")) {
        reject_unknown(j["rsa"], "rsa", {"sample_pairs"});
        read(j["rsa"], "sample_pairs", c.rsa_sample_pairs);
    }
    if (j.contains("nn")) {
        reject_unknown(j["nn"], "nn", {"k"});
        read(j["nn"], "k", c.nn_k_list);
    }
    if (j.contains("svd")) {
        reject_unknown(j["svd"], "svd", {"ranks"});
        read(j["svd"], "ranks", c.svd_ranks);
    }
    if (j.contains("ridge")) {
        const auto& p = j["ridge"];
        reject_unknown(p, "ridge",
                       {"train_fraction", "n_train_pairs", "alpha_grid_lo", "alpha_grid_hi", "alpha_grid_n", "cv_folds",
                        "refit_standardization_per_fold"});
        auto& r = c.ridge;
        read(p, "train_fraction", r.train_fraction);
        read(p, "n_train_pairs", r.n_train_pairs);
        read(p, "alpha_grid_lo", r.alpha_grid_lo);
        read(p, "alpha_grid_hi", r.alpha_grid_hi);
        read(p, "alpha_grid_n", r.alpha_grid_n);
        read(p, "cv_folds", r.cv_folds);
        read(p, "refit_standardization_per_fold", r.refit_standardization_per_fold);
    }
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, "NOT_FOUND", "cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        config_error(path.string() + ": " + e.what());
    }
    RunConfig cfg = j.get<RunConfig>();
    cfg.validate();
    return cfg;
}

std::string canonical_config_text(const RunConfig& cfg) { return json(cfg).dump(); }

}  // namespace semgeom
