#include "semgeom/embeddings.hpp"

#include <cmath>
#include <cstdio>

#include "semgeom/binary_io.hpp"
#include "semgeom/error.hpp"

namespace semgeom {

namespace {

constexpr std::uint32_t kLembVersion = 1;

Strategy strategy_from_code(std::uint8_t code, const std::filesystem::path& path) {
    if (code > 3) throw Error(ErrorKind::data, "BAD_STRATEGY", path.string() + ": unknown strategy code " + std::to_string(code));
    return static_cast<Strategy>(code);
}

EmbeddingHeader read_header(BinaryReader& r, const std::filesystem::path& path) {
    r.expect_magic("LEMB");
    const auto version = r.u32();
    if (version != kLembVersion)
        throw Error(ErrorKind::data, "BAD_VERSION", path.string() + ": unsupported LEMB version " + std::to_string(version));
    EmbeddingHeader h;
    h.vocab_size = r.u32();
    h.dim = r.u32();
    h.layer = r.u32();
    h.strategy = strategy_from_code(r.u8(), path);
    h.model_id = r.string();
    if (h.layer == 0) throw Error(ErrorKind::data, "BAD_LAYER", path.string() + ": layer 0 is not accepted");
    return h;
}

}  // namespace

void save_embeddings(const LayerEmbeddings& e, const std::filesystem::path& path) {
    if (e.layer == 0) throw Error(ErrorKind::data, "BAD_LAYER", "layer 0 is not stored");
    BinaryWriter w(path);
    w.magic("LEMB");
    w.u32(kLembVersion);
    w.u32(static_cast<std::uint32_t>(e.vocab_size()));
    w.u32(static_cast<std::uint32_t>(e.dim()));
    w.u32(e.layer);
    w.u8(static_cast<std::uint8_t>(e.strategy));
    w.string(e.model_id);
    for (Eigen::Index i = 0; i < e.vectors.rows(); ++i)
        for (Eigen::Index k = 0; k < e.vectors.cols(); ++k) w.f32(static_cast<float>(e.vectors(i, k)));
    w.close();
}

EmbeddingHeader read_embedding_header(const std::filesystem::path& path) {
    BinaryReader r(path);
    return read_header(r, path);
}

LayerEmbeddings load_embeddings(const std::filesystem::path& path, std::optional<std::size_t> expected_vocab_size) {
    BinaryReader r(path);
    const auto h = read_header(r, path);
    if (expected_vocab_size && *expected_vocab_size != h.vocab_size)
        throw Error(ErrorKind::data, "VOCAB_MISMATCH",
                    path.string() + ": header |V| = " + std::to_string(h.vocab_size) + ", vocabulary has " +
                        std::to_string(*expected_vocab_size));
    const std::uint64_t n = static_cast<std::uint64_t>(h.vocab_size) * h.dim;
    if (r.remaining() < n * 4)
        throw Error(ErrorKind::data, "TRUNCATED",
                    path.string() + ": header promises " + std::to_string(h.vocab_size) + " x " + std::to_string(h.dim) +
                        " floats, payload is shorter");
    if (r.remaining() > n * 4) throw Error(ErrorKind::data, "TRAILING_BYTES", path.string() + ": unexpected trailing data");

    std::vector<float> buf(n);
    r.f32_block(buf.data(), n);
    LayerEmbeddings e{h.model_id, h.strategy, h.layer, Eigen::MatrixXd(h.vocab_size, h.dim)};
    for (std::uint64_t i = 0; i < h.vocab_size; ++i)
        for (std::uint64_t k = 0; k < h.dim; ++k) {
            const float x = buf[i * h.dim + k];
            if (!std::isfinite(x))
                throw Error(ErrorKind::data, "NON_FINITE", path.string() + ": NaN/Inf in row " + std::to_string(i));
            e.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = x;
        }
    return e;
}

std::string embedding_file_name(std::string_view model_id, Strategy strategy, std::uint32_t layer) {
    char num[16];
    std::snprintf(num, sizeof num, "%03u", layer);
    return std::string(model_id) + "__" + std::string(to_string(strategy)) + "__L" + num + ".lemb";
}

CenteringStats fit_centering(const LayerEmbeddings& e, std::span<const WordId> fit_words) {
    CenteringStats s;
    if (fit_words.empty()) {
        s.mean = e.vectors.colwise().mean().transpose();
        s.fit_scope = FitScope::full_vocab;
        return s;
    }
    s.mean = Eigen::VectorXd::Zero(e.vectors.cols());
    for (auto w : fit_words) s.mean += e.vectors.row(w).transpose();
    s.mean /= static_cast<double>(fit_words.size());
    s.fit_scope = FitScope::train_words_only;
    return s;
}

CenteringStats no_centering(std::size_t dim) {
    return CenteringStats{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)), FitScope::full_vocab};
}

LayerEmbeddings center(const LayerEmbeddings& e, const CenteringStats& stats) {
    if (static_cast<std::size_t>(stats.mean.size()) != e.dim())
        throw Error(ErrorKind::data, "SIZE_MISMATCH", "centering mean does not match embedding dimension");
    LayerEmbeddings out = e;
    out.vectors.rowwise() -= stats.mean.transpose();
    return out;
}

LayerEmbeddings apply_centering(const LayerEmbeddings& e, CenteringMode mode, std::span<const WordId> fit_words) {
    if (mode == CenteringMode::raw) return e;
    return center(e, fit_centering(e, fit_words));
}

std::string hidden_tag(std::string_view model_id, Strategy strategy, std::uint32_t layer) {
    return "hidden(" + std::string(model_id) + "," + std::string(to_string(strategy)) + "," + std::to_string(layer) + ")";
}

SimilarityMatrix hidden_similarity(const LayerEmbeddings& e) {
    return cosine_similarity(e.vectors, hidden_tag(e.model_id, e.strategy, e.layer));
}

SimilarityMatrix consensus(std::span<const LayerEmbeddings> others, std::string_view target_model, CenteringMode mode,
                           std::span<const WordId> fit_words) {
    if (others.empty()) throw Error(ErrorKind::data, "EMPTY_INPUT", "consensus needs at least one other model");
    for (const auto& e : others)
        if (e.model_id == target_model)
            throw Error(ErrorKind::leakage, "LEAKAGE",
                        "consensus for '" + std::string(target_model) + "' received its own layer " +
                            std::to_string(e.layer));
    const auto n = static_cast<Eigen::Index>(others.front().vocab_size());
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 0);
    for (const auto& e : others) {
        if (static_cast<Eigen::Index>(e.vocab_size()) != n)
            throw Error(ErrorKind::data, "VOCAB_MISMATCH", "consensus inputs do not share the vocabulary");
        const auto s = hidden_similarity(apply_centering(e, mode, fit_words));
        sum += s.values();
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] |= s.zero_mask()[i];
    }
    sum /= static_cast<double>(others.size());
    return SimilarityMatrix("consensus(" + std::string(target_model) + ")", std::move(sum), std::move(mask));
}

}  // namespace semgeom
