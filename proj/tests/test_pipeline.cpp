#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "semgeom/behavior.hpp"
#include "semgeom/error.hpp"
#include "semgeom/pipeline.hpp"
#include "semgeom/toy.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace semgeom;

namespace {

ToyWorldSpec small_spec() {
    ToyWorldSpec s;
    s.vocab_size = 60;
    s.n_models = 2;
    s.layers = 2;
    s.planted_dim = 12;
    s.hidden_dim = 16;
    s.strategies = {Strategy::meaning};
    return s;
}

fs::path write_small_world(const fs::path& dir) {
    const auto spec = small_spec();
    auto cfg = toy_run_config(spec);
    cfg.paradigm.fa_runs = 5;
    return write_toy_world(make_toy_world(spec), cfg, dir);
}

Pipeline open(const fs::path& config, const fs::path& out, CenteringMode mode = CenteringMode::centered) {
    auto cfg = load_pipeline_config(config);
    cfg.run.centering_mode = mode;
    StageOptions opt;
    opt.out_dir = out;
    opt.workers = 2;
    opt.quiet = true;
    return Pipeline(std::move(cfg), opt);
}

// Every file under root except the manifest, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename() != "manifest.json")
            out[fs::relative(e.path(), root).string()] = testing::read_file(e.path());
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SEMGEOM_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("pipeline end to end is deterministic") {
    testing::TempDir dir("pipe");
    const auto config = write_small_world(dir / "world");

    auto p1 = open(config, dir / "out1");
    const auto summary = p1.run_all();
    auto p2 = open(config, dir / "out2");
    p2.run_all();

    const auto a = snapshot(dir / "out1");
    const auto b = snapshot(dir / "out2");
    CHECK(a.size() == b.size());
    for (const auto& [name, bytes] : a) {
        INFO(name);
        CHECK((b.count(name) && b.at(name) == bytes));
    }
    for (const char* f : {"trials/fc_trials.jsonl", "records/toy-a__FC.jsonl", "records/toy-b__FA.jsonl",
                          "counts/toy-a__FC.bcoo", "counts/toy-a__aggregated.csv", "geometry/toy-a__FC_PPMI.ssim",
                          "geometry/centered/FT.ssim", "embeddings/index.json", "reports/centered/rsa_nn.csv",
                          "reports/centered/rsa_nn_summary.csv", "reports/centered/ridge.csv",
                          "reports/centered/ridge_summary.csv", "reports/centered/summary.json"})
        CHECK_MESSAGE(a.count(f), f);
    CHECK(summary["centering"] == "centered");
    CHECK(summary["vocab_size"] == 60);
    CHECK(summary["rsa"].size() > 0);
    CHECK(summary["ridge"].size() > 0);
}

TEST_CASE("manifest skips finished stages and reruns changed ones") {
    testing::TempDir dir("manifest");
    const auto config = write_small_world(dir / "world");
    open(config, dir / "out").run_all();
    const auto manifest = testing::read_file(dir / "out" / "manifest.json");
    const auto before = snapshot(dir / "out");
    const auto m = nlohmann::json::parse(manifest);
    CHECK(m["stages"].contains("collect:toy-a"));
    CHECK(m["stages"]["collect:toy-a"].contains("config_hash"));
    CHECK(m["stages"].contains("regress[centered]"));

    open(config, dir / "out").run_all();
    CHECK(testing::read_file(dir / "out" / "manifest.json") == manifest);
    CHECK(snapshot(dir / "out") == before);

    // Deleting an output forces its stage to run again.
    fs::remove(dir / "out" / "reports" / "centered" / "ridge.csv");
    open(config, dir / "out").run_all();
    CHECK(snapshot(dir / "out") == before);
}

TEST_CASE("collection resumes after an interruption") {
    testing::TempDir dir("resume_pipe");
    const auto config = write_small_world(dir / "world");
    auto full = open(config, dir / "full");
    full.generate();
    full.collect();
    const auto records = dir / "full" / "records" / "toy-a__FC.jsonl";
    const auto text = testing::read_file(records);

    fs::create_directories(dir / "part" / "records");
    auto part = open(config, dir / "part");
    part.generate();
    testing::write_file(dir / "part" / "records" / "toy-a__FC.jsonl", text.substr(0, text.size() / 3 + 7));
    auto cfg = load_pipeline_config(config);
    StageOptions opt;
    opt.out_dir = dir / "part";
    opt.quiet = true;
    opt.resume = true;
    opt.force = true;
    Pipeline(std::move(cfg), opt).collect();
    CHECK(testing::read_file(dir / "part" / "records" / "toy-a__FC.jsonl") == text);
}

TEST_CASE("raw centering writes a separate report tree") {
    testing::TempDir dir("raw");
    const auto config = write_small_world(dir / "world");
    open(config, dir / "out").run_all();
    const auto s = open(config, dir / "out", CenteringMode::raw).run_all();
    CHECK(s["centering"] == "raw");
    CHECK(fs::exists(dir / "out" / "reports" / "raw" / "ridge.csv"));
    CHECK(fs::exists(dir / "out" / "reports" / "centered" / "ridge.csv"));
    CHECK(testing::read_file(dir / "out" / "reports" / "raw" / "rsa_nn.csv") !=
          testing::read_file(dir / "out" / "reports" / "centered" / "rsa_nn.csv"));
}

TEST_CASE("missing embeddings name the expected layout") {
    testing::TempDir dir("noemb");
    const auto config = write_small_world(dir / "world");
    fs::remove_all(dir / "world" / "embeddings");
    auto p = open(config, dir / "out");
    try {
        p.ingest_embeddings();
        FAIL("expected MISSING_EMBEDDINGS");
    } catch (const Error& e) {
        CHECK(e.code() == "MISSING_EMBEDDINGS");
        CHECK(std::string(e.what()).find("<model>__<strategy>__L<layer>.lemb") != std::string::npos);
    }
    fs::create_directories(dir / "world" / "embeddings");
    CHECK_THROWS_AS(p.ingest_embeddings(), Error);
}

TEST_CASE("ingest-dataset reads released associations") {
    testing::TempDir dir("ingest");
    const auto config = write_small_world(dir / "world");
    auto cfg = load_pipeline_config(config);
    const auto vocab = load_vocabulary(cfg.pipeline.vocab);
    const auto w0 = vocab.word(0), w1 = vocab.word(1), w2 = vocab.word(2);
    testing::write_file(dir / "data.csv", "model,paradigm,cue,responses,count\n"
                                          "human,FC," + w0 + ",\"" + w1 + ";" + w2 + "\",3\n"
                                          "human,FA," + w1 + ",sun;moon,1\n");
    StageOptions opt;
    opt.out_dir = dir / "out";
    opt.quiet = true;
    opt.dataset_from = dir / "data.csv";
    Pipeline(cfg, opt).ingest_dataset();
    const auto fc = load_counts_binary(dir / "out" / "counts" / "ingested" / "human__FC.bcoo");
    CHECK(fc.count(0, w1) == 3);
    CHECK(fc.count(0, w2) == 3);
    const auto fa = load_counts_binary(dir / "out" / "counts" / "ingested" / "human__FA.bcoo");
    CHECK(fa.count(1, "moon") == 1);

    testing::write_file(dir / "bad.jsonl", R"({"model":"human","paradigm":"FC","cue":"notaword","response":"x"})"
                                           "\n");
    opt.dataset_from = dir / "bad.jsonl";
    try {
        Pipeline(cfg, opt).ingest_dataset();
        FAIL("expected UNKNOWN_CUE");
    } catch (const Error& e) {
        CHECK(e.code() == "UNKNOWN_CUE");
    }
}

TEST_CASE("pipeline config validation") {
    testing::TempDir dir("pcfg");
    const auto config = write_small_world(dir / "world");
    auto j = nlohmann::json::parse(testing::read_file(config));
    j["pipeline"]["surprise"] = 1;
    CHECK_THROWS_AS(parse_pipeline_config(j, dir / "world"), Error);
    j = nlohmann::json::parse(testing::read_file(config));
    const auto cfg = parse_pipeline_config(j, dir / "world");
    CHECK(cfg.pipeline.vocab == dir / "world" / "vocab.txt");
    CHECK(cfg.pipeline.models.size() == 2);
}

TEST_CASE("command line exit codes") {
    testing::TempDir dir("cli");
    const auto world = dir / "world";
    REQUIRE(run_cli("make-toy --vocab-size 40 --models 2 --layers 2 --strategies meaning -o " + world.string()) == 0);
    const auto config = (world / "config.json").string();
    const auto out = (dir / "out").string();

    CHECK(run_cli("") == 2);
    CHECK(run_cli("evaluate -c " + (dir / "nope.json").string()) == 2);
    CHECK(run_cli("collect -c " + config + " --centering sideways") == 2);
    CHECK(run_cli("pipeline -q -c " + config + " -o " + out) == 0);
    CHECK(fs::exists(dir / "out" / "reports" / "centered" / "summary.json"));
    CHECK(run_cli("evaluate -q --centering raw -c " + config + " -o " + out) == 3);
    CHECK(run_cli("consensus -q --centering raw -c " + config + " -o " + out) == 0);
    CHECK(run_cli("evaluate -q --centering raw -c " + config + " -o " + out) == 0);
    CHECK(fs::exists(dir / "out" / "reports" / "raw" / "summary.json"));
    CHECK(run_cli("ingest-embeddings -q -c " + config + " -o " + out + " --from " + (dir / "empty").string()) == 3);
    REQUIRE(run_cli("generate -q -c " + config + " -o " + (dir / "out2").string()) == 0);
    CHECK(run_cli("collect -q --force -c " + config + " -o " + (dir / "out2").string() +
                  " --participant http:url=http://127.0.0.1:1/v1,model=m,timeout=1") == 4);

    auto j = nlohmann::json::parse(testing::read_file(config));
    j["seed"] = "forty-two";
    testing::write_file(dir / "bad.json", j.dump());
    CHECK(run_cli("generate -q -c " + (dir / "bad.json").string() + " -o " + out) == 2);
}
