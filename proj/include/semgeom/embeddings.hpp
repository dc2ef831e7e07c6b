#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "semgeom/similarity.hpp"
#include "semgeom/types.hpp"

namespace semgeom {

// Word vectors for one (model, strategy, layer). Stored on disk as float32;
// held in double so centering and similarity accumulate in 64-bit.
struct LayerEmbeddings {
    std::string model_id;
    Strategy strategy = Strategy::meaning;
    std::uint32_t layer = 1;  // >= 1; layer 0 is never stored
    Eigen::MatrixXd vectors;  // |V| x d, vocabulary order

    std::size_t vocab_size() const noexcept { return static_cast<std::size_t>(vectors.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors.cols()); }
};

// "LEMB" v1, little-endian: magic, u32 version, u32 |V|, u32 d, u32 layer,
// u8 strategy code, u32-length-prefixed UTF-8 model id, |V| rows of d float32.
void save_embeddings(const LayerEmbeddings& e, const std::filesystem::path& path);
// Errors: BAD_MAGIC, BAD_VERSION, TRUNCATED, NON_FINITE, BAD_LAYER,
// TRAILING_BYTES, and VOCAB_MISMATCH when expected_vocab_size is given.
LayerEmbeddings load_embeddings(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_vocab_size = std::nullopt);

struct EmbeddingHeader {
    std::string model_id;
    Strategy strategy;
    std::uint32_t layer;
    std::uint32_t vocab_size;
    std::uint32_t dim;
};
EmbeddingHeader read_embedding_header(const std::filesystem::path& path);

// Canonical file name: <model>__<strategy>__L<layer, 3 digits>.lemb
std::string embedding_file_name(std::string_view model_id, Strategy strategy, std::uint32_t layer);

enum class FitScope : std::uint8_t { full_vocab, train_words_only };

struct CenteringStats {
    Eigen::VectorXd mean;  // length d; all zeros in raw mode
    FitScope fit_scope = FitScope::full_vocab;
};

// Mean over all words, or over `fit_words` when given (train-only scope).
CenteringStats fit_centering(const LayerEmbeddings& e, std::span<const WordId> fit_words = {});
// Identity statistics for the non-centered ablation.
CenteringStats no_centering(std::size_t dim);
LayerEmbeddings center(const LayerEmbeddings& e, const CenteringStats& stats);
// Fits and applies according to mode; raw mode returns the input unchanged.
LayerEmbeddings apply_centering(const LayerEmbeddings& e, CenteringMode mode, std::span<const WordId> fit_words = {});

std::string hidden_tag(std::string_view model_id, Strategy strategy, std::uint32_t layer);
SimilarityMatrix hidden_similarity(const LayerEmbeddings& e);

// Mean of per-(model, layer) cosine matrices over every model except the
// target, each centered per `mode` (fit on `fit_words` when given). Throws
// Error(leakage, "LEAKAGE") if any input belongs to the target model.
SimilarityMatrix consensus(std::span<const LayerEmbeddings> others, std::string_view target_model, CenteringMode mode,
                           std::span<const WordId> fit_words = {});

}  // namespace semgeom
