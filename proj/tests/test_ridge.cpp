#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "semgeom/error.hpp"
#include "semgeom/ridge.hpp"
#include "semgeom/rng.hpp"
#include "support.hpp"

using namespace semgeom;

namespace {

// Plain Gaussian elimination with partial pivoting.
Eigen::VectorXd solve_oracle(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x(static_cast<Eigen::Index>(k));
        x(static_cast<Eigen::Index>(i)) = s / a[i][i];
    }
    return x;
}

struct World {
    std::size_t n;
    std::vector<SimilarityMatrix> preds;
    LayerEmbeddings target;
};

World make_world(std::size_t n, std::uint64_t seed) {
    World w{n, {}, {}};
    const Eigen::MatrixXd base = testing::random_matrix(static_cast<Eigen::Index>(n), 6, seed);
    for (int p = 0; p < 5; ++p) {
        LayerEmbeddings e;
        e.vectors = base + (1.0 + p) * testing::random_matrix(static_cast<Eigen::Index>(n), 6, seed + 10 + p);
        auto s = hidden_similarity(e);
        s.set_tag(std::string(kPredictorNames[p]));
        w.preds.push_back(std::move(s));
    }
    w.target.model_id = "target";
    w.target.vectors = base + 0.5 * testing::random_matrix(static_cast<Eigen::Index>(n), 6, seed + 99);
    return w;
}

Predictors predictors_of(const World& w) {
    return {&w.preds[0], &w.preds[1], &w.preds[2], &w.preds[3], &w.preds[4]};
}

}  // namespace

TEST_CASE("fixed-alpha ridge solves the normal equations") {
    SplitMix64 rng(5);
    const Eigen::Index rows = 200, p = 5;
    Eigen::MatrixXd x(rows, p);
    Eigen::VectorXd y(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) x(i, j) = (j + 1) * rng.normal() + j;
        y(i) = 0.3 * x(i, 0) - 0.2 * x(i, 3) + rng.normal();
    }
    for (double alpha : {0.01, 1.0, 37.0, 1e4}) {
        const auto fit = fit_ridge_fixed(x, y, alpha);
        // Standardize by hand with the population standard deviation.
        std::vector<double> mean(p, 0), sd(p, 0);
        for (Eigen::Index j = 0; j < p; ++j) {
            for (Eigen::Index i = 0; i < rows; ++i) mean[j] += x(i, j) / rows;
            for (Eigen::Index i = 0; i < rows; ++i) sd[j] += (x(i, j) - mean[j]) * (x(i, j) - mean[j]) / rows;
            sd[j] = std::sqrt(sd[j]);
        }
        double ybar = 0;
        for (Eigen::Index i = 0; i < rows; ++i) ybar += y(i) / rows;
        std::vector<std::vector<double>> a(p, std::vector<double>(p, 0));
        std::vector<double> b(p, 0);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < p; ++j) {
                const double zj = (x(i, j) - mean[j]) / sd[j];
                b[j] += zj * (y(i) - ybar);
                for (Eigen::Index k = 0; k < p; ++k) a[j][k] += zj * (x(i, k) - mean[k]) / sd[k];
            }
        for (Eigen::Index j = 0; j < p; ++j) a[j][j] += alpha;
        const auto beta = solve_oracle(a, b);
        CHECK((fit.coefficients - beta).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(fit.intercept == doctest::Approx(ybar).epsilon(1e-12));
    }
}

TEST_CASE("shrinkage grows with alpha") {
    const Eigen::MatrixXd x = testing::random_matrix(100, 4, 8);
    const Eigen::VectorXd y = x.col(0) - 2 * x.col(2) + 0.1 * testing::random_matrix(100, 1, 9).col(0);
    double prev = std::numeric_limits<double>::infinity();
    for (double a : alpha_grid(1e-2, 1e6, 15)) {
        const double norm = fit_ridge_fixed(x, y, a).coefficients.norm();
        CHECK(norm < prev);
        prev = norm;
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("identity feature gives perfect fit") {
    const Eigen::MatrixXd x = testing::random_matrix(50, 1, 3);
    const Eigen::VectorXd y = 2.0 * x.col(0).array() + 1.0;
    const auto fit = fit_ridge_fixed(x, y, 1e-10);
    CHECK(r_squared(y, fit.predict(x)) == doctest::Approx(1.0).epsilon(1e-9));
    try {
        r_squared(Eigen::VectorXd::Constant(5, 2.0), Eigen::VectorXd::Zero(5));
        FAIL("expected DEGENERATE_TEST");
    } catch (const Error& e) {
        CHECK(e.code() == "DEGENERATE_TEST");
    }
}

TEST_CASE("constant columns are tolerated") {
    Eigen::MatrixXd x = testing::random_matrix(40, 3, 4);
    x.col(1).setConstant(7.0);
    const Eigen::VectorXd y = x.col(0);
    const auto fit = fit_ridge_fixed(x, y, 1.0);
    CHECK(fit.constant_columns == std::vector<std::size_t>{1});
    CHECK(fit.coefficients(1) == 0.0);
    CHECK(fit.coefficients.allFinite());
}

TEST_CASE("alpha grid has 15 log-spaced values with exact ends") {
    RunConfig cfg;
    const auto g = alpha_grid(cfg.ridge.alpha_grid_lo, cfg.ridge.alpha_grid_hi, cfg.ridge.alpha_grid_n);
    REQUIRE(g.size() == 15);
    CHECK(g.front() == 1e-2);
    CHECK(g.back() == 1e6);
    for (std::size_t i = 1; i < g.size(); ++i)
        CHECK(std::log10(g[i]) - std::log10(g[i - 1]) == doctest::Approx(8.0 / 14.0).epsilon(1e-12));
}

TEST_CASE("cross-validation picks the alpha with the least error") {
    const Eigen::MatrixXd x = testing::random_matrix(300, 5, 12);
    const Eigen::VectorXd y = x.col(0) + 0.5 * testing::random_matrix(300, 1, 13).col(0);
    RidgeOptions opt;
    opt.alphas = alpha_grid(1e-2, 1e6, 15);
    opt.seed = 3;
    const auto fit = fit_ridge(x, y, opt);
    REQUIRE(fit.cv_mse.size() == 15);
    const auto best = std::min_element(fit.cv_mse.begin(), fit.cv_mse.end()) - fit.cv_mse.begin();
    CHECK(fit.alpha == opt.alphas[static_cast<std::size_t>(best)]);
    CHECK(fit.alpha < 1e3);
    const auto refit = fit_ridge_fixed(x, y, fit.alpha);
    CHECK((refit.coefficients - fit.coefficients).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(fit_ridge(x, y, opt).cv_mse == fit.cv_mse);
}

TEST_CASE("vocabulary split sizes") {
    const auto s = split_vocab(5000, 0.8, 42);
    CHECK(s.train.size() == 4000);
    CHECK(s.test.size() == 1000);
    CHECK(s.test.size() * (s.test.size() - 1) / 2 == 499500);
    std::set<WordId> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 5000);
    CHECK(split_vocab(5000, 0.8, 42).test == s.test);
    CHECK(split_vocab(5000, 0.8, 43).test != s.test);

    const auto small = split_vocab(10, 0.8, 1);
    CHECK(small.train.size() == 8);
    CHECK(small.test.size() == 2);
    CHECK_THROWS_AS(split_vocab(3, 0.8, 1), Error);
    CHECK_THROWS_AS(split_vocab(100, 1.0, 1), Error);
}

TEST_CASE("features use every test pair and only train pairs for fitting") {
    const auto w = make_world(100, 1);
    const auto split = split_vocab(100, 0.8, 7);
    const auto f = build_features(split, predictors_of(w), w.target, 1000, 11);
    CHECK(f.test_pairs.size() == 20 * 19 / 2);
    CHECK(f.x_test.rows() == 190);
    CHECK(f.train_pairs.size() == 1000);
    CHECK(f.x_train.cols() == 5);
    const std::set<WordId> test(split.test.begin(), split.test.end());
    for (const auto& [i, j] : f.train_pairs) CHECK((!test.count(i) && !test.count(j)));
    for (const auto& [i, j] : f.test_pairs) CHECK((test.count(i) && test.count(j)));
    CHECK(f.centering.fit_scope == FitScope::train_words_only);
    // Column order is FT, BERT, consensus, FC, FA.
    const auto [a, b] = f.test_pairs[3];
    for (int p = 0; p < 5; ++p) CHECK(f.x_test(3, p) == w.preds[p](a, b));

    const auto tiny = make_world(10, 2);
    const auto ts = split_vocab(10, 0.8, 3);
    CHECK(build_features(ts, predictors_of(tiny), tiny.target, 100, 1).test_pairs.size() == 1);
}

TEST_CASE("leakage check") {
    VocabSplit s{{0, 1, 2}, {3, 4}, 0};
    CHECK_NOTHROW(check_no_leakage(s, {{0, 1}, {1, 2}}, {{3, 4}}));
    for (const auto& [train, test] : std::vector<std::pair<PairList, PairList>>{
             {{{0, 3}}, {{3, 4}}}, {{{0, 1}}, {{2, 4}}}, {{{4, 3}}, {}}}) {
        try {
            check_no_leakage(s, train, test);
            FAIL("expected LEAKAGE");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::leakage);
        }
    }
}

TEST_CASE("test-word data cannot reach the fitted model") {
    const auto w = make_world(80, 4);
    const auto split = split_vocab(80, 0.8, 9);
    RunConfig cfg;
    const auto f = build_features(split, predictors_of(w), w.target, 800, 5);
    const auto res = ridge_layer(1, f, cfg, 17);

    // Scramble everything that touches a test word.
    auto w2 = w;
    SplitMix64 rng(123);
    for (auto t : split.test) {
        w2.target.vectors.row(t) = 10 * testing::random_matrix(1, 6, 500 + t);
        for (auto& s : w2.preds) {
            Eigen::MatrixXd v = s.values();
            for (Eigen::Index j = 0; j < v.cols(); ++j) v(t, j) = v(j, t) = rng.uniform01() * 2 - 1;
            s = SimilarityMatrix(s.tag(), v, std::vector<std::uint8_t>(s.zero_mask().begin(), s.zero_mask().end()));
        }
    }
    const auto f2 = build_features(split, predictors_of(w2), w2.target, 800, 5);
    CHECK((f2.x_train.array() == f.x_train.array()).all());
    CHECK((f2.y_train.array() == f.y_train.array()).all());
    CHECK((f2.centering.mean.array() == f.centering.mean.array()).all());
    CHECK_FALSE((f2.y_test.array() == f.y_test.array()).all());
    const auto res2 = ridge_layer(1, f2, cfg, 17);
    for (std::size_t s = 0; s < 4; ++s) {
        CHECK(res2.subsets[s].fit.alpha == res.subsets[s].fit.alpha);
        CHECK((res2.subsets[s].fit.coefficients.array() == res.subsets[s].fit.coefficients.array()).all());
        CHECK(res2.subsets[s].r2_train == res.subsets[s].r2_train);
    }
}

TEST_CASE("each subset is an independent refit") {
    const auto w = make_world(90, 6);
    const auto split = split_vocab(90, 0.8, 2);
    RunConfig cfg;
    const auto f = build_features(split, predictors_of(w), w.target, 1500, 3);
    const auto res = ridge_layer(2, f, cfg, 21);
    RidgeOptions opt;
    opt.alphas = alpha_grid(1e-2, 1e6, 15);
    opt.seed = 21;
    for (auto s : {PredictorSubset::baseline, PredictorSubset::baseline_fc, PredictorSubset::baseline_fa,
                   PredictorSubset::full}) {
        const auto cols = subset_columns(s);
        const auto fit = fit_ridge(select_columns(f.x_train, cols), f.y_train, opt);
        const auto& got = res.get(s);
        CHECK(got.fit.alpha == fit.alpha);
        CHECK((got.fit.coefficients - fit.coefficients).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(got.r2_test ==
              doctest::Approx(r_squared(f.y_test, fit.predict(select_columns(f.x_test, cols)))).epsilon(1e-10));
    }
    CHECK(res.delta_fc() == doctest::Approx(res.get(PredictorSubset::baseline_fc).r2_test - res.r2_baseline()));
    CHECK(subset_columns(PredictorSubset::baseline) == std::vector<std::size_t>{0, 1, 2});
    CHECK(subset_columns(PredictorSubset::full) == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK(to_string(PredictorSubset::baseline_fa) == "baseline+fa");

    std::ostringstream csv, summary;
    const RidgeLayerResult layers[] = {res};
    write_ridge_csv(csv, "m", "meaning", layers);
    write_ridge_summary_csv(summary, "m", "meaning", layers);
    CHECK(csv.str().rfind("model,strategy,layer,subset,alpha,r2_train,r2_test\n", 0) == 0);
    const auto text = csv.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
    CHECK(summary.str().find("m,meaning,delta_fc,") != std::string::npos);
}
