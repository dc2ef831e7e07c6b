#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "semgeom/error.hpp"
#include "semgeom/pipeline.hpp"
#include "semgeom/toy.hpp"

namespace fs = std::filesystem;
using namespace semgeom;

namespace {

struct CommonArgs {
    std::string config;
    std::string out_dir = "out";
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> centering;
    std::optional<std::string> participant;
    bool resume = false;
    bool force = false;
    bool quiet = false;
    std::string from;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_from) {
    cmd->add_option("-c,--config", a.config, "config file (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("-o,--out-dir", a.out_dir, "output directory")->capture_default_str();
    cmd->add_option("-w,--workers", a.workers, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--seed-override", a.seed_override, "replace the config's master seed");
    cmd->add_option("--centering", a.centering, "centered or raw (ablation)")->check(CLI::IsMember({"centered", "raw"}));
    cmd->add_option("--participant", a.participant, "participant spec applied to every model");
    cmd->add_flag("--resume", a.resume, "continue collection after the last persisted trial");
    cmd->add_flag("--force", a.force, "rerun stages even when the manifest says they are current");
    cmd->add_flag("-q,--quiet", a.quiet, "no progress log");
    if (with_from) cmd->add_option("--from", a.from, "input file or directory")->required();
}

Pipeline open_pipeline(const CommonArgs& a) {
    auto cfg = load_pipeline_config(a.config);
    if (a.seed_override) cfg.run.master_seed = *a.seed_override;
    if (a.centering) cfg.run.centering_mode = parse_centering(*a.centering);
    StageOptions opt;
    opt.out_dir = a.out_dir;
    opt.workers = a.workers;
    opt.resume = a.resume;
    opt.force = a.force;
    opt.quiet = a.quiet;
    opt.participant_override = a.participant;
    if (!a.from.empty()) {
        opt.embeddings_from = a.from;
        opt.dataset_from = a.from;
    }
    return Pipeline(std::move(cfg), std::move(opt));
}

void ensure_index(Pipeline& p) {
    if (!fs::is_regular_file(p.out_dir() / "embeddings" / "index.json")) p.ingest_embeddings();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Behavioral and hidden-state semantic geometry toolkit"};
    app.require_subcommand(1);
    CommonArgs a;

    struct Cmd {
        const char* name;
        const char* help;
        bool from;
        void (*run)(Pipeline&);
    };
    const Cmd commands[] = {
        {"generate", "write FC and FA trial manifests", false, [](Pipeline& p) { p.generate(); }},
        {"collect", "run trials against each model's participant", false, [](Pipeline& p) { p.collect(); }},
        {"aggregate", "build cue-response count matrices", false, [](Pipeline& p) { p.aggregate(); }},
        {"geometry", "behavioral similarity matrices (PPMI, counts, SVD)", false, [](Pipeline& p) { p.geometry(); }},
        {"consensus", "cross-model consensus and static references", false,
         [](Pipeline& p) {
             ensure_index(p);
             p.consensus();
         }},
        {"evaluate", "layerwise RSA and NN@k reports", false,
         [](Pipeline& p) {
             ensure_index(p);
             p.evaluate();
             p.write_summary();
         }},
        {"regress", "held-out-words ridge regression reports", false,
         [](Pipeline& p) {
             ensure_index(p);
             p.regress();
             p.write_summary();
         }},
        {"pipeline", "all stages plus summary.json", false, [](Pipeline& p) { p.run_all(); }},
        {"ingest-dataset", "import released association data (CSV or JSON lines)", true,
         [](Pipeline& p) { p.ingest_dataset(); }},
        {"ingest-embeddings", "validate and index a directory of LEMB files", true,
         [](Pipeline& p) { p.ingest_embeddings(); }},
    };
    std::vector<std::pair<CLI::App*, const Cmd*>> subs;
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        add_common(sub, a, c.from);
        subs.emplace_back(sub, &c);
    }

    ToyWorldSpec toy;
    std::string toy_out = "toy";
    std::vector<std::string> toy_strategies;
    auto* make_toy = app.add_subcommand("make-toy", "write a synthetic world (vocab, embeddings, config) for demos");
    make_toy->add_option("-o,--out", toy_out, "directory to create")->capture_default_str();
    make_toy->add_option("--vocab-size", toy.vocab_size)->capture_default_str();
    make_toy->add_option("--models", toy.n_models)->capture_default_str();
    make_toy->add_option("--layers", toy.layers)->capture_default_str();
    make_toy->add_option("--dim", toy.planted_dim, "planted geometry dimension")->capture_default_str();
    make_toy->add_option("--hidden-dim", toy.hidden_dim)->capture_default_str();
    make_toy->add_option("--tau", toy.tau)->capture_default_str();
    make_toy->add_option("--shared", toy.shared, "weight of the cross-model component")->capture_default_str();
    make_toy->add_option("--layer-noise", toy.layer_noise, "hidden-state noise at the cleanest layer")->capture_default_str();
    make_toy->add_option("--seed", toy.seed)->capture_default_str();
    make_toy->add_option("--strategies", toy_strategies, "subset of averaged,meaning,task_fc,task_fa")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_code_for(ErrorKind::config);
    }

    try {
        if (make_toy->parsed()) {
            if (!toy_strategies.empty()) {
                toy.strategies.clear();
                for (const auto& s : toy_strategies) toy.strategies.push_back(parse_strategy(s));
            }
            const auto world = make_toy_world(toy);
            const auto path = write_toy_world(world, toy_run_config(toy), toy_out);
            std::cout << path.string() << '\n';
            return 0;
        }
        for (const auto& [sub, cmd] : subs) {
            if (!sub->parsed()) continue;
            auto pipeline = open_pipeline(a);
            cmd->run(pipeline);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
