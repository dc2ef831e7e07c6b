#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semgeom/config.hpp"
#include "semgeom/embeddings.hpp"
#include "semgeom/harness.hpp"
#include "semgeom/pipeline.hpp"
#include "semgeom/vocab.hpp"

namespace semgeom {

// Synthetic study with a known ground truth. Each toy model answers from a
// planted geometry that mixes a component shared by all models with a
// private one. Its hidden layers are noisy random projections of that
// geometry plus a constant offset (anisotropy). The static FT/BERT references
// see only the shared component, through heavier noise.
struct ToyWorldSpec {
    std::size_t vocab_size = 200;
    std::size_t n_models = 3;
    std::size_t layers = 4;
    std::size_t planted_dim = 32;
    std::size_t hidden_dim = 48;
    double tau = 0.2;
    double shared = 0.3;
    double offset_norm = 2.0;
    double layer_noise = 0.3;  // noise at the cleanest layer; outer layers get twice this
    std::uint64_t seed = 1;
    std::vector<Strategy> strategies{Strategy::averaged, Strategy::meaning, Strategy::task_fc, Strategy::task_fa};
};

struct ToyWorld {
    ToyWorldSpec spec;
    Vocabulary vocab;
    std::vector<ModelSpec> models;
    std::vector<PlantedGeometrySpec> planted;  // one per model
    std::vector<LayerEmbeddings> embeddings;   // model-major, then strategy, then layer
    LayerEmbeddings fasttext;
    LayerEmbeddings bert;
};

// Distinct lowercase pseudo-words built from consonant-vowel syllables.
std::vector<std::string> toy_words(std::size_t n, std::uint64_t seed);

// Participant spec string for model m.
std::string toy_participant(const PlantedGeometrySpec& p);

ToyWorld make_toy_world(const ToyWorldSpec& spec);

// A config sized for the toy world: FA runs scaled to 20, k list below |V|.
RunConfig toy_run_config(const ToyWorldSpec& spec);

// Writes vocab.txt, embeddings/*.lemb, static/{fasttext,bert}.lemb and
// config.json (run settings plus the pipeline section) into dir.
std::filesystem::path write_toy_world(const ToyWorld& world, const RunConfig& cfg, const std::filesystem::path& dir);

}  // namespace semgeom
