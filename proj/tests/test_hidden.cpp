#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "semgeom/embeddings.hpp"
#include "semgeom/error.hpp"
#include "semgeom/similarity.hpp"
#include "support.hpp"

using namespace semgeom;

namespace {

LayerEmbeddings layer(std::string model, std::uint32_t l, std::size_t n, std::size_t d, std::uint64_t seed) {
    LayerEmbeddings e;
    e.model_id = std::move(model);
    e.strategy = Strategy::meaning;
    e.layer = l;
    e.vectors = testing::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d), seed);
    return e;
}

std::string error_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "none";
}

double cos_oracle(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
    return a.dot(b) / (a.norm() * b.norm());
}

}  // namespace

TEST_CASE("LEMB round trip stores float32") {
    testing::TempDir dir("lemb");
    auto e = layer("toy-model", 3, 12, 5, 1);
    e.strategy = Strategy::task_fa;
    const auto path = dir / embedding_file_name(e.model_id, e.strategy, e.layer);
    CHECK(path.filename() == "toy-model__task_fa__L003.lemb");
    save_embeddings(e, path);
    CHECK(std::filesystem::file_size(path) == 4 + 4 * 4 + 1 + 4 + 9 + 12 * 5 * 4);
    const auto back = load_embeddings(path, 12);
    CHECK(back.model_id == "toy-model");
    CHECK(back.strategy == Strategy::task_fa);
    CHECK(back.layer == 3);
    CHECK((back.vectors - e.vectors.cast<float>().cast<double>()).cwiseAbs().maxCoeff() == 0.0);
    const auto h = read_embedding_header(path);
    CHECK(h.vocab_size == 12);
    CHECK(h.dim == 5);
}

TEST_CASE("LEMB reader rejects malformed files") {
    testing::TempDir dir("lemb_bad");
    const auto e = layer("m", 1, 4, 3, 2);
    const auto good = dir / "good.lemb";
    save_embeddings(e, good);
    const auto bytes = testing::read_file(good);
    const std::size_t header = 4 + 4 * 4 + 1 + 4 + 1;

    auto variant = [&](const std::string& name, std::string data) {
        testing::write_file(dir / name, data);
        return dir / name;
    };
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    std::string bad_version = bytes;
    bad_version[4] = 9;
    std::string layer0 = bytes;
    std::memset(&layer0[16], 0, 4);
    std::string nan = bytes;
    const float q = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(&nan[header + 4], &q, 4);

    CHECK(error_code([&] { load_embeddings(variant("a", bad_magic)); }) == "BAD_MAGIC");
    CHECK(error_code([&] { load_embeddings(variant("b", bad_version)); }) == "BAD_VERSION");
    CHECK(error_code([&] { load_embeddings(variant("c", layer0)); }) == "BAD_LAYER");
    CHECK(error_code([&] { load_embeddings(variant("d", bytes.substr(0, bytes.size() - 3))); }) == "TRUNCATED");
    CHECK(error_code([&] { load_embeddings(variant("e", bytes + "xxxx")); }) == "TRAILING_BYTES");
    CHECK(error_code([&] { load_embeddings(variant("f", nan)); }) == "NON_FINITE");
    CHECK(error_code([&] { load_embeddings(good, 5); }) == "VOCAB_MISMATCH");
    CHECK(error_code([&] { save_embeddings(layer("m", 0, 2, 2, 1), dir / "z.lemb"); }) == "BAD_LAYER");
}

TEST_CASE("SSIM round trip keeps the mask and symmetry") {
    testing::TempDir dir("ssim");
    auto e = layer("m", 1, 9, 4, 5);
    e.vectors.row(6).setZero();
    const auto s = hidden_similarity(e);
    CHECK(s.masked(6));
    save_similarity(s, dir / "s.ssim");
    const auto back = load_similarity(dir / "s.ssim");
    CHECK(back.tag() == s.tag());
    CHECK(back.masked(6));
    CHECK(back.masked_count() == 1);
    CHECK((back.values() - back.values().transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.values() - s.values()).cwiseAbs().maxCoeff() < 1e-7);
    const auto bytes = testing::read_file(dir / "s.ssim");
    testing::write_file(dir / "t.ssim", bytes.substr(0, bytes.size() - 1));
    CHECK(error_code([&] { load_similarity(dir / "t.ssim"); }) == "TRUNCATED");
}

TEST_CASE("centering subtracts the fitted mean") {
    const auto e = layer("m", 1, 20, 6, 8);
    const auto c = apply_centering(e, CenteringMode::centered);
    CHECK(c.vectors.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);

    const std::vector<WordId> fit{0, 3, 5, 7, 11};
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(6);
    for (auto w : fit) mean += e.vectors.row(w);
    mean /= static_cast<double>(fit.size());
    const auto t = apply_centering(e, CenteringMode::centered, fit);
    CHECK(((e.vectors.rowwise() - mean) - t.vectors).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(fit_centering(e, fit).fit_scope == FitScope::train_words_only);
    CHECK(fit_centering(e).fit_scope == FitScope::full_vocab);

    const auto raw = apply_centering(e, CenteringMode::raw);
    CHECK((raw.vectors - e.vectors).cwiseAbs().maxCoeff() == 0.0);
    CHECK(no_centering(6).mean.isZero());
}

TEST_CASE("hidden similarity is cosine between rows") {
    const auto e = layer("m", 2, 15, 7, 4);
    const auto s = hidden_similarity(e);
    CHECK(s.tag() == hidden_tag("m", Strategy::meaning, 2));
    for (Eigen::Index i = 0; i < 15; ++i)
        for (Eigen::Index j = 0; j < 15; ++j)
            CHECK(s(i, j) == doctest::Approx(cos_oracle(e.vectors.row(i), e.vectors.row(j))).epsilon(1e-12));
    CHECK(s(4, 4) == 1.0);
}

TEST_CASE("consensus averages the other models' centered cosines") {
    std::vector<LayerEmbeddings> others{layer("b", 1, 10, 5, 21), layer("b", 2, 10, 5, 22), layer("c", 1, 10, 8, 23)};
    const auto s = consensus(others, "a", CenteringMode::centered);
    Eigen::MatrixXd want = Eigen::MatrixXd::Zero(10, 10);
    for (const auto& o : others) {
        const Eigen::MatrixXd x = o.vectors.rowwise() - o.vectors.colwise().mean();
        for (Eigen::Index i = 0; i < 10; ++i)
            for (Eigen::Index j = 0; j < 10; ++j) want(i, j) += cos_oracle(x.row(i), x.row(j)) / 3.0;
    }
    CHECK((s.values() - want).cwiseAbs().maxCoeff() < 1e-12);

    const auto r = consensus(others, "a", CenteringMode::raw);
    CHECK(r(0, 1) == doctest::Approx((cos_oracle(others[0].vectors.row(0), others[0].vectors.row(1)) +
                                      cos_oracle(others[1].vectors.row(0), others[1].vectors.row(1)) +
                                      cos_oracle(others[2].vectors.row(0), others[2].vectors.row(1))) /
                                     3.0)
                        .epsilon(1e-12));
}

TEST_CASE("consensus refuses the target model's own layers") {
    std::vector<LayerEmbeddings> others{layer("b", 1, 6, 3, 1), layer("a", 4, 6, 3, 2)};
    try {
        consensus(others, "a", CenteringMode::centered);
        FAIL("expected LEAKAGE");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::leakage);
        CHECK(e.code() == "LEAKAGE");
    }
    CHECK(error_code([] { consensus(std::span<const LayerEmbeddings>{}, "a", CenteringMode::raw); }) == "EMPTY_INPUT");
}

TEST_CASE("mean similarity and mask union") {
    auto e1 = layer("m", 1, 5, 3, 1);
    auto e2 = layer("m", 2, 5, 3, 2);
    e1.vectors.row(1).setZero();
    e2.vectors.row(3).setZero();
    const std::vector<SimilarityMatrix> parts{hidden_similarity(e1), hidden_similarity(e2)};
    const auto m = mean_similarity(parts, "mean");
    CHECK(m.masked(1));
    CHECK(m.masked(3));
    CHECK(m(0, 2) == doctest::Approx((parts[0](0, 2) + parts[1](0, 2)) / 2).epsilon(1e-15));
    const SimilarityMatrix* ptrs[] = {&parts[0], &parts[1]};
    const auto u = union_mask(ptrs);
    CHECK(u == std::vector<std::uint8_t>{0, 1, 0, 1, 0});
}
