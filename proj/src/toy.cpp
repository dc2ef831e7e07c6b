#include "semgeom/toy.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

#include "semgeom/error.hpp"
#include "semgeom/rng.hpp"

namespace semgeom {

namespace fs = std::filesystem;

std::vector<std::string> toy_words(std::size_t n, std::uint64_t seed) {
    static constexpr std::string_view consonants = "bdfgklmnprstvz";
    static constexpr std::string_view vowels = "aeiou";
    SplitMix64 rng(derive_seed(seed, 0x70C));
    std::unordered_set<std::string> seen;
    std::vector<std::string> out;
    out.reserve(n);
    while (out.size() < n) {
        const auto syllables = 2 + rng.uniform_below(2);
        std::string w;
        for (std::uint64_t s = 0; s < syllables; ++s) {
            w += consonants[rng.uniform_below(consonants.size())];
            w += vowels[rng.uniform_below(vowels.size())];
        }
        if (rng.uniform_below(2) == 0) w += consonants[rng.uniform_below(consonants.size())];
        if (seen.insert(w).second) out.push_back(std::move(w));
    }
    return out;
}

std::string toy_participant(const PlantedGeometrySpec& p) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "simulated:tau=%.17g,dim=%zu,seed=%llu,shared=%.17g,shared_seed=%llu", p.tau, p.dim,
                  static_cast<unsigned long long>(p.seed), p.shared, static_cast<unsigned long long>(p.shared_seed));
    return buf;
}

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale) {
    SplitMix64 rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
    return m;
}

// Noisy projection of a geometry into hidden_dim, shifted by a fixed offset.
Eigen::MatrixXd project(const Eigen::MatrixXd& planted, std::size_t hidden_dim, double noise, const Eigen::RowVectorXd& offset,
                        std::uint64_t seed) {
    const auto d = planted.cols();
    const auto h = static_cast<Eigen::Index>(hidden_dim);
    const Eigen::MatrixXd r = gaussian(d, h, derive_seed(seed, 1), 1.0 / std::sqrt(static_cast<double>(h)));
    Eigen::MatrixXd out = planted * r * std::sqrt(static_cast<double>(h) / static_cast<double>(d));
    out += gaussian(planted.rows(), h, derive_seed(seed, 2), noise / std::sqrt(static_cast<double>(h)));
    out.rowwise() += offset;
    return out;
}

}  // namespace

ToyWorld make_toy_world(const ToyWorldSpec& spec) {
    if (spec.vocab_size < 3 || spec.n_models < 2 || spec.layers < 1 || spec.planted_dim < 1 || spec.hidden_dim < 1)
        throw Error(ErrorKind::config, "BAD_TOY", "toy world needs |V| >= 3, >= 2 models, >= 1 layer");
    ToyWorld w;
    w.spec = spec;
    const auto words = toy_words(spec.vocab_size, spec.seed);
    w.vocab = Vocabulary::from_words(words);
    const auto n = spec.vocab_size;
    const auto h = static_cast<Eigen::Index>(spec.hidden_dim);
    const std::uint64_t shared_seed = derive_seed(spec.seed, 0x5EED);

    for (std::size_t m = 0; m < spec.n_models; ++m) {
        PlantedGeometrySpec p{spec.planted_dim, spec.tau, derive_seed(spec.seed, 100 + m), spec.shared, shared_seed};
        w.planted.push_back(p);
        w.models.push_back({"toy-" + std::string(1, static_cast<char>('a' + m % 26)) +
                                (m >= 26 ? std::to_string(m / 26) : std::string{}),
                            toy_participant(p)});
        const Eigen::MatrixXd planted = planted_embeddings(n, p);
        const std::uint64_t model_seed = derive_seed(spec.seed, 200 + m);
        const Eigen::RowVectorXd offset =
            gaussian(1, h, derive_seed(model_seed, 3), spec.offset_norm / std::sqrt(static_cast<double>(h)));
        for (auto strategy : spec.strategies) {
            for (std::size_t l = 1; l <= spec.layers; ++l) {
                // Middle layers carry the geometry most cleanly.
                const double mid = (static_cast<double>(spec.layers) + 1.0) / 2.0;
                const double spread = spec.layers > 1 ? (static_cast<double>(spec.layers) - 1.0) / 2.0 : 1.0;
                const double noise = spec.layer_noise * (1.0 + std::abs(static_cast<double>(l) - mid) / spread);
                const auto seed = derive_seed(derive_seed(model_seed, static_cast<std::uint64_t>(strategy)), l);
                w.embeddings.push_back({w.models.back().id, strategy, static_cast<std::uint32_t>(l),
                                        project(planted, spec.hidden_dim, noise, offset, seed)});
            }
        }
    }
    PlantedGeometrySpec shared_only{spec.planted_dim, spec.tau, shared_seed, 1.0, shared_seed};
    const Eigen::MatrixXd common = planted_embeddings(n, shared_only);
    const Eigen::RowVectorXd none = Eigen::RowVectorXd::Zero(h);
    w.fasttext = {"fasttext", Strategy::averaged, 1, project(common, spec.hidden_dim, 1.5, none, derive_seed(spec.seed, 0xF7))};
    w.bert = {"bert", Strategy::averaged, 1, project(common, spec.hidden_dim, 2.0, none, derive_seed(spec.seed, 0xBE))};
    return w;
}

RunConfig toy_run_config(const ToyWorldSpec& spec) {
    RunConfig cfg;
    cfg.paradigm.fa_runs = 20;
    cfg.nn_k_list.clear();
    for (int k : {5, 10, 20, 50, 100, 200, 500, 1000})
        if (static_cast<std::size_t>(k) < spec.vocab_size) cfg.nn_k_list.push_back(k);
    return cfg;
}

fs::path write_toy_world(const ToyWorld& world, const RunConfig& cfg, const fs::path& dir) {
    fs::create_directories(dir / "embeddings");
    fs::create_directories(dir / "static");
    save_vocabulary(world.vocab, dir / "vocab.txt");
    for (const auto& e : world.embeddings)
        save_embeddings(e, dir / "embeddings" / embedding_file_name(e.model_id, e.strategy, e.layer));
    save_embeddings(world.fasttext, dir / "static" / "fasttext.lemb");
    save_embeddings(world.bert, dir / "static" / "bert.lemb");

    nlohmann::json j = cfg;
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : world.models) models.push_back({{"id", m.id}, {"participant", m.participant}});
    j["pipeline"] = {{"vocab", "vocab.txt"},
                     {"models", models},
                     {"embeddings_dir", "embeddings"},
                     {"fasttext", "static/fasttext.lemb"},
                     {"bert", "static/bert.lemb"}};
    const auto path = dir / "config.json";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::data, "IO", "cannot write " + path.string());
    out << j.dump(2) << '\n';
    return path;
}

}  // namespace semgeom
