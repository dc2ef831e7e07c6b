#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "semgeom/behavior.hpp"
#include "semgeom/error.hpp"
#include "support.hpp"

using namespace semgeom;

namespace {

Eigen::MatrixXd dense(const WeightedMatrix& m) { return Eigen::MatrixXd(m.values); }

CueResponseMatrix from_dense(const Eigen::MatrixXi& c) {
    CueResponseMatrix m(static_cast<std::size_t>(c.rows()));
    for (Eigen::Index j = 0; j < c.cols(); ++j) m.column("r" + std::to_string(j));
    for (Eigen::Index i = 0; i < c.rows(); ++i)
        for (Eigen::Index j = 0; j < c.cols(); ++j)
            if (c(i, j) > 0) m.add(static_cast<WordId>(i), "r" + std::to_string(j), static_cast<std::uint64_t>(c(i, j)));
    return m;
}

// Textbook PPMI on a dense count table, written independently of the library.
Eigen::MatrixXd ppmi_oracle(const Eigen::MatrixXi& c) {
    const Eigen::MatrixXd p = c.cast<double>() / static_cast<double>(c.sum());
    const Eigen::VectorXd pr = p.rowwise().sum();
    const Eigen::RowVectorXd pc = p.colwise().sum();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(c.rows(), c.cols());
    for (Eigen::Index i = 0; i < c.rows(); ++i)
        for (Eigen::Index j = 0; j < c.cols(); ++j)
            if (p(i, j) > 0) out(i, j) = std::max(0.0, std::log(p(i, j) / (pr(i) * pc(j))));
    return out;
}

double brute_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double ab = 0, aa = 0, bb = 0;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        ab += a(k) * b(k);
        aa += a(k) * a(k);
        bb += b(k) * b(k);
    }
    return ab / std::sqrt(aa * bb);
}

TrialRecord fc_record(WordId cue, std::vector<std::string> words, bool compliant = true) {
    TrialRecord r;
    r.paradigm = Paradigm::fc;
    r.cue = cue;
    r.parsed_responses = std::move(words);
    r.compliant = compliant;
    r.attempts = 1;
    return r;
}

}  // namespace

TEST_CASE("ppmi on a hand-worked table") {
    // a: x=1, y=1; b: y=2. N=4.
    CueResponseMatrix m(2);
    m.add(0, "x");
    m.add(0, "y");
    m.add(1, "y", 2);
    const auto w = dense(ppmi(m));
    CHECK(w(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(w(0, 1) == 0.0);  // ln(2/3) clipped
    CHECK(w(1, 0) == 0.0);
    CHECK(w(1, 1) == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("ppmi of an independent table is zero") {
    Eigen::MatrixXi c = Eigen::MatrixXi::Constant(5, 7, 3);
    CHECK(dense(ppmi(from_dense(c))).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ppmi matches a dense oracle on random tables") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> val(0, 6);
    std::uniform_int_distribution<int> dim(2, 12);
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::MatrixXi c(dim(rng), dim(rng));
        for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = val(rng) < 3 ? 0 : val(rng);
        c(0, 0) += 1;
        const auto m = from_dense(c);
        const auto got = dense(ppmi(m));
        const auto want = ppmi_oracle(c);
        REQUIRE(got.rows() == want.rows());
        REQUIRE(got.cols() == want.cols());
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);

        const auto jm = joint_marginals(m);
        CHECK(jm.row.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(jm.col.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(jm.total == static_cast<double>(c.sum()));
    }
}

TEST_CASE("ppmi of an empty table is an error") {
    CueResponseMatrix m(3);
    try {
        ppmi(m);
        FAIL("expected EMPTY_MATRIX");
    } catch (const Error& e) {
        CHECK(e.code() == "EMPTY_MATRIX");
    }
}

TEST_CASE("cosine between rows") {
    CueResponseMatrix m(3);
    m.add(0, "a");
    m.add(0, "b");
    m.add(1, "b");
    m.add(1, "c");
    const auto s = cosine_rows(raw_weights(m), "counts");
    CHECK(s(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s(1, 0) == s(0, 1));
    CHECK(s(0, 0) == 1.0);
    CHECK(s.masked(2));
    CHECK_FALSE(s.masked(0));
    CHECK(s(2, 2) == 0.0);
    CHECK(s(2, 0) == 0.0);
    CHECK(s.masked_count() == 1);
}

TEST_CASE("count cosine is invariant to scaling a row") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> val(0, 4);
    Eigen::MatrixXi ci(6, 9);
    for (Eigen::Index i = 0; i < ci.size(); ++i) ci.data()[i] = val(rng);
    for (Eigen::Index i = 0; i < ci.rows(); ++i) ci(i, i) += 1;
    Eigen::MatrixXi scaled = ci;
    scaled.row(2) *= 5;
    const auto a = cosine_rows(raw_weights(from_dense(ci)), "a");
    const auto b = cosine_rows(raw_weights(from_dense(scaled)), "b");
    CHECK((a.values() - b.values()).cwiseAbs().maxCoeff() < 1e-12);
    for (Eigen::Index i = 0; i < ci.rows(); ++i)
        for (Eigen::Index j = 0; j < ci.rows(); ++j)
            CHECK(a(i, j) == doctest::Approx(brute_cosine(ci.row(i).cast<double>().transpose(),
                                                          ci.row(j).cast<double>().transpose()))
                                 .epsilon(1e-12));
}

TEST_CASE("svd at full rank preserves the cosine geometry") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> val(0, 5);
    Eigen::MatrixXi c(10, 15);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = val(rng);
    for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, i) += 1;
    const auto w = ppmi(from_dense(c));
    const auto full = cosine_rows(w, "ppmi");
    const auto e = svd_embed(w, 10, "svd");
    CHECK(e.cue_embedding.cols() == 10);
    CHECK((e.similarity.values() - full.values()).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((e.reconstruct() - dense(w)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("svd recovers a rank-one matrix") {
    CueResponseMatrix m(4);
    const int u[] = {1, 2, 3, 4};
    const int v[] = {2, 1, 3};
    for (WordId i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) m.add(i, "c" + std::to_string(j), static_cast<std::uint64_t>(u[i] * v[j]));
    const auto w = raw_weights(m);
    const auto e = svd_embed(w, 1, "svd1");
    CHECK(e.singular_values(0) == doctest::Approx(std::sqrt(30.0) * std::sqrt(14.0)).epsilon(1e-12));
    CHECK((e.reconstruct() - dense(w)).cwiseAbs().maxCoeff() < 1e-9);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(e.similarity(i, j)) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("truncated svd leaves exactly the tail energy") {
    const Eigen::MatrixXd b = testing::random_matrix(50, 80, 11).cwiseAbs();
    WeightedMatrix w;
    w.values = b.sparseView();
    for (int j = 0; j < 80; ++j) w.column_words.push_back("c" + std::to_string(j));
    const Eigen::JacobiSVD<Eigen::MatrixXd> ref(b);
    const auto sv = ref.singularValues();
    for (int k : {1, 5, 20}) {
        const auto e = svd_embed(w, k, "svd");
        CHECK((e.singular_values - sv.head(k)).cwiseAbs().maxCoeff() < 1e-8);
        const double tail = sv.tail(sv.size() - k).squaredNorm();
        CHECK((b - e.reconstruct()).squaredNorm() == doctest::Approx(tail).epsilon(1e-8));
        for (int i = 1; i < k; ++i) CHECK(e.singular_values(i) <= e.singular_values(i - 1));
    }
    CHECK_THROWS_AS(svd_embed(w, 0, "bad"), Error);
    CHECK_THROWS_AS(svd_embed(w, 51, "bad"), Error);
}

TEST_CASE("aggregation counts compliant responses only") {
    const auto v = Vocabulary::from_words(std::vector<std::string>{"dog", "cat", "leash", "bone"});
    const std::vector<TrialRecord> records{
        fc_record(0, {"cat", "leash"}),
        fc_record(0, {"cat", "bone"}),
        fc_record(0, {"leash", "bone"}, false),
        fc_record(1, {"dog", "leash"}),
    };
    const auto m = aggregate_counts(records, v, Paradigm::fc);
    CHECK(m.count(0, "cat") == 2);
    CHECK(m.count(0, "leash") == 1);
    CHECK(m.count(0, "bone") == 1);
    CHECK(m.row_total(0) == 4);
    CHECK(m.count(1, "dog") == 1);
    CHECK(m.total() == 6);
    CHECK(m.rows() == 4);

    std::ostringstream csv;
    write_aggregated_csv(csv, "toy", Paradigm::fc, m, v, true);
    CHECK(csv.str() ==
          "model,paradigm,cue,response,count\n"
          "toy,FC,dog,cat,2\n"
          "toy,FC,dog,leash,1\n"
          "toy,FC,dog,bone,1\n"
          "toy,FC,cat,leash,1\n"
          "toy,FC,cat,dog,1\n");

    auto bad = records;
    bad[0].cue = 99;
    CHECK_THROWS_AS(aggregate_counts(bad, v, Paradigm::fc), Error);
}

TEST_CASE("merge matches columns by word") {
    CueResponseMatrix a(2), b(2);
    a.add(0, "x", 2);
    b.add(1, "y");
    b.add(0, "x", 3);
    a.merge(b);
    CHECK(a.count(0, "x") == 5);
    CHECK(a.count(1, "y") == 1);
    CHECK(a.cols() == 2);
}

TEST_CASE("count files round-trip") {
    testing::TempDir dir("counts");
    const auto v = testing::numbered_vocab(5);
    CueResponseMatrix m(5);
    m.add(0, "w1", 3);
    m.add(4, "zebra", 7);
    m.add(2, "w0", (1ull << 33) + 5);
    save_coo(m, v, dir / "m.coo");
    save_counts_binary(m, dir / "m.bcoo");
    for (const auto& r : {load_coo(dir / "m.coo", v), load_counts_binary(dir / "m.bcoo")}) {
        CHECK(r.rows() == 5);
        CHECK(r.count(0, "w1") == 3);
        CHECK(r.count(4, "zebra") == 7);
        CHECK(r.count(2, "w0") == (1ull << 33) + 5);
        CHECK(r.nonzeros() == 3);
    }
    testing::write_file(dir / "bad.bcoo", "NOPE");
    CHECK_THROWS_AS(load_counts_binary(dir / "bad.bcoo"), Error);
}
