#include <doctest.h>

#include "semgeom/config.hpp"
#include "semgeom/error.hpp"
#include "semgeom/vocab.hpp"
#include "support.hpp"

using namespace semgeom;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::config;
}

std::string code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

}  // namespace

TEST_CASE("words are trimmed and case-folded") {
    CHECK(normalize_word("  Dog\t") == "dog");
    CHECK(normalize_word("ICE-cream") == "ice-cream");
}

TEST_CASE("vocabulary file loading") {
    testing::TempDir dir("vocab");
    testing::write_file(dir / "v.txt", "dog\n\nCat\n  tree \n");
    const auto v = load_vocabulary(dir / "v.txt");
    REQUIRE(v.size() == 3);
    CHECK(v.word(1) == "cat");
    CHECK(v.id("tree") == 2);
    CHECK_FALSE(v.find("bird"));
    CHECK(code_of([&] { v.id("bird"); }) == "UNKNOWN_WORD");

    testing::write_file(dir / "dup.txt", "dog\ncat\nDOG\n");
    try {
        load_vocabulary(dir / "dup.txt");
        FAIL("duplicate accepted");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("dog") != std::string::npos);
        CHECK(msg.find('1') != std::string::npos);
        CHECK(msg.find('3') != std::string::npos);
    }
    testing::write_file(dir / "empty.txt", "\n\n");
    CHECK(code_of([&] { load_vocabulary(dir / "empty.txt"); }) == "EMPTY_VOCAB");

    save_vocabulary(v, dir / "out.txt");
    CHECK(load_vocabulary(dir / "out.txt") == v);
    CHECK(load_vocabulary(dir / "out.txt").fingerprint() == v.fingerprint());
}

TEST_CASE("config defaults") {
    RunConfig c;
    CHECK(c.paradigm.candidate_set_size == 16);
    CHECK(c.paradigm.n_picks == 2);
    CHECK(c.paradigm.fa_words_per_run == 5);
    CHECK(c.paradigm.fa_runs == 126);
    CHECK(c.collection.max_repairs == 1);
    CHECK(c.collection.max_retries == 5);
    CHECK(c.collection.fc_retry_temperature == 0.5);
    CHECK(c.collection.fc_retry_top_p == 0.9);
    CHECK(c.collection.fa_temperature == 0.7);
    CHECK(c.collection.fa_top_p == 0.95);
    CHECK(c.collection.fc_max_new_tokens == 10);
    CHECK(c.collection.fa_max_new_tokens == 25);
    CHECK(c.collection.batch_size == 128);
    CHECK(c.rsa_sample_pairs == 500000);
    CHECK(c.nn_k_list == std::vector<int>{5, 10, 20, 50, 100, 200});
    CHECK(c.svd_ranks == std::vector<int>{100, 300, 600});
    CHECK(c.ridge.train_fraction == 0.8);
    CHECK(c.ridge.n_train_pairs == 100000);
    CHECK(c.ridge.alpha_grid_n == 15);
    CHECK(c.ridge.cv_folds == 5);
    CHECK(c.centering_mode == CenteringMode::centered);
    // Table 2 style budgets.
    CHECK(c.paradigm.fa_runs * c.paradigm.fa_words_per_run == 630);
}

TEST_CASE("config json round-trip and validation") {
    RunConfig c;
    c.master_seed = 7;
    c.nn_k_list = {3, 9};
    c.centering_mode = CenteringMode::raw;
    nlohmann::json j = c;
    RunConfig back = j.get<RunConfig>();
    CHECK(canonical_config_text(back) == canonical_config_text(c));

    CHECK(kind_of([] { nlohmann::json{{"bogus", 1}}.get<RunConfig>(); }) == ErrorKind::config);
    CHECK(kind_of([] { nlohmann::json{{"paradigm", {{"n_pick", 2}}}}.get<RunConfig>(); }) == ErrorKind::config);
    CHECK(kind_of([] {
              RunConfig r;
              r.paradigm.candidate_set_size = 2;
              r.validate();
          }) == ErrorKind::config);
    CHECK(kind_of([] {
              RunConfig r;
              r.validate(200);
          }) == ErrorKind::config);  // k = 200 is not < |V|
    CHECK_NOTHROW(RunConfig{}.validate(5000));

    testing::TempDir dir("cfg");
    testing::write_file(dir / "c.json", R"({"seed": 9, "paradigm": {"fa_runs": 20}})");
    const auto loaded = load_config(dir / "c.json");
    CHECK(loaded.master_seed == 9);
    CHECK(loaded.paradigm.fa_runs == 20);
    CHECK(loaded.paradigm.candidate_set_size == 16);
    testing::write_file(dir / "bad.json", "{not json");
    CHECK(kind_of([&] { load_config(dir / "bad.json"); }) == ErrorKind::config);
}

TEST_CASE("exit codes are distinct per error kind") {
    CHECK(exit_code_for(ErrorKind::config) == 2);
    CHECK(exit_code_for(ErrorKind::data) == 3);
    CHECK(exit_code_for(ErrorKind::transport) == 4);
    CHECK(exit_code_for(ErrorKind::numerical) == 5);
    CHECK(exit_code_for(ErrorKind::leakage) == 6);
}
