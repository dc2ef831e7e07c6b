#include "semgeom/ridge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semgeom/error.hpp"
#include "semgeom/evaluation.hpp"
#include "semgeom/rng.hpp"

namespace semgeom {

VocabSplit split_vocab(std::size_t vocab_size, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error(ErrorKind::config, "BAD_SPLIT", "train fraction must be in (0, 1)");
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(vocab_size)));
    if (n_train < 2 || vocab_size - n_train < 2)
        throw Error(ErrorKind::config, "BAD_SPLIT", "both splits need at least two words to form pairs");
    std::vector<WordId> ids(vocab_size);
    std::iota(ids.begin(), ids.end(), WordId{0});
    SplitMix64 rng(seed);
    rng.shuffle(std::span<WordId>(ids));
    VocabSplit s;
    s.seed = seed;
    s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

void check_no_leakage(const VocabSplit& split, const PairList& train_pairs, const PairList& test_pairs) {
    const auto n = split.train.size() + split.test.size();
    std::vector<std::int8_t> side(n, -1);
    for (auto w : split.train) side.at(w) = 0;
    for (auto w : split.test) {
        if (side.at(w) != -1) throw Error(ErrorKind::leakage, "LEAKAGE", "word in both splits");
        side[w] = 1;
    }
    auto check = [&](const PairList& pairs, std::int8_t want, const char* what) {
        for (auto [i, j] : pairs)
            if (side.at(i) != want || side.at(j) != want)
                throw Error(ErrorKind::leakage, "LEAKAGE",
                            std::string(what) + " pair (" + std::to_string(i) + "," + std::to_string(j) +
                                ") crosses the split");
    };
    check(train_pairs, 0, "training");
    check(test_pairs, 1, "test");
}

namespace {

double pair_cosine(const Eigen::MatrixXd& v, WordId i, WordId j) {
    const double ni = v.row(i).norm(), nj = v.row(j).norm();
    if (ni == 0.0 || nj == 0.0) return 0.0;
    return v.row(i).dot(v.row(j)) / (ni * nj);
}

void fill_rows(const PairList& pairs, const Predictors& p, const Eigen::MatrixXd& centered, Eigen::MatrixXd& x,
               Eigen::VectorXd& y) {
    const auto cols = p.columns();
    x.resize(static_cast<Eigen::Index>(pairs.size()), kNumPredictors);
    y.resize(static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t r = 0; r < pairs.size(); ++r) {
        const auto [i, j] = pairs[r];
        for (std::size_t c = 0; c < kNumPredictors; ++c)
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = (*cols[c])(i, j);
        y(static_cast<Eigen::Index>(r)) = pair_cosine(centered, i, j);
    }
}

}  // namespace

FeatureSet build_features(const VocabSplit& split, const Predictors& predictors, const LayerEmbeddings& target,
                          std::size_t n_train_pairs, std::uint64_t seed, CenteringMode mode) {
    const auto n = target.vocab_size();
    for (const auto* m : predictors.columns()) {
        if (!m) throw Error(ErrorKind::data, "MISSING_PREDICTOR", "all five predictor matrices are required");
        if (m->size() != n)
            throw Error(ErrorKind::data, "VOCAB_MISMATCH", "predictor '" + m->tag() + "' does not match the vocabulary");
    }
    if (split.train.size() + split.test.size() != n)
        throw Error(ErrorKind::data, "VOCAB_MISMATCH", "split does not cover the target vocabulary");

    FeatureSet f;
    f.centering = mode == CenteringMode::centered ? fit_centering(target, split.train) : no_centering(target.dim());
    const Eigen::MatrixXd centered = center(target, f.centering).vectors;

    const auto sample = sample_pairs(split.train.size(), n_train_pairs, seed);
    f.train_pairs.reserve(sample.pairs.size());
    for (auto [a, b] : sample.pairs) f.train_pairs.emplace_back(split.train[a], split.train[b]);
    for (std::size_t a = 0; a < split.test.size(); ++a)
        for (std::size_t b = a + 1; b < split.test.size(); ++b) f.test_pairs.emplace_back(split.test[a], split.test[b]);

    check_no_leakage(split, f.train_pairs, f.test_pairs);
    fill_rows(f.train_pairs, predictors, centered, f.x_train, f.y_train);
    fill_rows(f.test_pairs, predictors, centered, f.x_test, f.y_test);
    return f;
}

std::vector<double> alpha_grid(double lo, double hi, int n) {
    if (!(lo > 0.0 && hi > lo) || n < 2) throw Error(ErrorKind::config, "BAD_GRID", "alpha grid needs 0 < lo < hi and n >= 2");
    std::vector<double> grid(static_cast<std::size_t>(n));
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (n - 1));
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

namespace {

struct Standardizer {
    Eigen::VectorXd mean, scale;
    std::vector<std::size_t> constant;
};

Standardizer fit_standardizer(const Eigen::MatrixXd& x) {
    Standardizer s;
    const double n = static_cast<double>(x.rows());
    s.mean = x.colwise().mean().transpose();
    s.scale.resize(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double var = (x.col(c).array() - s.mean(c)).square().sum() / n;
        const double sd = std::sqrt(var);
        if (sd > 0.0 && std::isfinite(sd)) {
            s.scale(c) = sd;
        } else {
            s.scale(c) = 1.0;
            s.constant.push_back(static_cast<std::size_t>(c));
        }
    }
    return s;
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& x, const Standardizer& s) {
    Eigen::MatrixXd z = x.rowwise() - s.mean.transpose();
    z.array().rowwise() /= s.scale.transpose().array();
    for (auto c : s.constant) z.col(static_cast<Eigen::Index>(c)).setZero();
    return z;
}

Eigen::VectorXd solve_ridge(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs, double alpha) {
    Eigen::MatrixXd a = gram;
    a.diagonal().array() += alpha;
    return a.ldlt().solve(rhs);
}

}  // namespace

Eigen::VectorXd RidgeFit::predict(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd z = x.rowwise() - x_mean.transpose();
    z.array().rowwise() /= x_scale.transpose().array();
    for (auto c : constant_columns) z.col(static_cast<Eigen::Index>(c)).setZero();
    return (z * coefficients).array() + intercept;
}

RidgeFit fit_ridge_fixed(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha) {
    if (x.rows() != y.size() || x.rows() < 2)
        throw Error(ErrorKind::numerical, "BAD_DESIGN", "ridge needs at least two rows and matching y");
    const auto st = fit_standardizer(x);
    const Eigen::MatrixXd z = standardize(x, st);
    RidgeFit fit;
    fit.intercept = y.mean();
    const Eigen::VectorXd yc = y.array() - fit.intercept;
    fit.coefficients = solve_ridge(z.transpose() * z, z.transpose() * yc, alpha);
    fit.alpha = alpha;
    fit.alphas = {alpha};
    fit.x_mean = st.mean;
    fit.x_scale = st.scale;
    fit.constant_columns = st.constant;
    return fit;
}

RidgeFit fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RidgeOptions& options) {
    if (options.alphas.empty()) throw Error(ErrorKind::config, "BAD_GRID", "empty alpha grid");
    if (options.folds < 2 || x.rows() < options.folds)
        throw Error(ErrorKind::numerical, "BAD_DESIGN", "need at least as many rows as CV folds (>= 2)");
    const auto n = static_cast<std::size_t>(x.rows());

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(options.seed);
    rng.shuffle(std::span<std::size_t>(order));

    const auto folds = static_cast<std::size_t>(options.folds);
    std::vector<double> mse(options.alphas.size(), 0.0);
    const Standardizer global = fit_standardizer(x);
    for (std::size_t f = 0; f < folds; ++f) {
        const auto lo = f * n / folds, hi = (f + 1) * n / folds;
        std::vector<Eigen::Index> train_idx, val_idx;
        train_idx.reserve(n - (hi - lo));
        val_idx.reserve(hi - lo);
        for (std::size_t r = 0; r < n; ++r) (r >= lo && r < hi ? val_idx : train_idx).push_back(static_cast<Eigen::Index>(order[r]));

        const Eigen::MatrixXd xt = x(train_idx, Eigen::all);
        const Eigen::VectorXd yt = y(train_idx);
        const Eigen::MatrixXd xv = x(val_idx, Eigen::all);
        const Eigen::VectorXd yv = y(val_idx);

        const Standardizer st = options.refit_standardization_per_fold ? fit_standardizer(xt) : global;
        const Eigen::MatrixXd zt = standardize(xt, st);
        const Eigen::MatrixXd zv = standardize(xv, st);
        const double y_mean = yt.mean();
        const Eigen::MatrixXd gram = zt.transpose() * zt;
        const Eigen::VectorXd rhs = zt.transpose() * (yt.array() - y_mean).matrix();
        for (std::size_t a = 0; a < options.alphas.size(); ++a) {
            const Eigen::VectorXd beta = solve_ridge(gram, rhs, options.alphas[a]);
            const Eigen::VectorXd resid = (zv * beta).array() + y_mean - yv.array();
            mse[a] += resid.squaredNorm() / static_cast<double>(val_idx.size());
        }
    }
    for (auto& m : mse) m /= static_cast<double>(folds);

    const auto best = static_cast<std::size_t>(std::min_element(mse.begin(), mse.end()) - mse.begin());
    RidgeFit fit = fit_ridge_fixed(x, y, options.alphas[best]);
    fit.alphas = options.alphas;
    fit.cv_mse = std::move(mse);
    return fit;
}

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& predicted) {
    if (y.size() != predicted.size() || y.size() == 0)
        throw Error(ErrorKind::numerical, "DEGENERATE_TEST", "empty or mismatched test set");
    const double ss_tot = (y.array() - y.mean()).square().sum();
    if (!(ss_tot > 0.0)) throw Error(ErrorKind::numerical, "DEGENERATE_TEST", "test targets are constant (SS_tot = 0)");
    return 1.0 - (y - predicted).squaredNorm() / ss_tot;
}

double evaluate(const RidgeFit& fit, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    return r_squared(y, fit.predict(x));
}

std::string_view to_string(PredictorSubset s) {
    switch (s) {
        case PredictorSubset::baseline: return "baseline";
        case PredictorSubset::baseline_fc: return "baseline+fc";
        case PredictorSubset::baseline_fa: return "baseline+fa";
        case PredictorSubset::full: return "full";
    }
    return "?";
}

std::vector<std::size_t> subset_columns(PredictorSubset s) {
    switch (s) {
        case PredictorSubset::baseline: return {0, 1, 2};
        case PredictorSubset::baseline_fc: return {0, 1, 2, 3};
        case PredictorSubset::baseline_fa: return {0, 1, 2, 4};
        case PredictorSubset::full: return {0, 1, 2, 3, 4};
    }
    return {};
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, std::span<const std::size_t> cols) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = x.col(static_cast<Eigen::Index>(cols[c]));
    return out;
}

RidgeLayerResult ridge_layer(std::uint32_t layer, const FeatureSet& features, const RunConfig& cfg, std::uint64_t seed) {
    RidgeOptions opt;
    opt.alphas = alpha_grid(cfg.ridge.alpha_grid_lo, cfg.ridge.alpha_grid_hi, cfg.ridge.alpha_grid_n);
    opt.folds = cfg.ridge.cv_folds;
    opt.seed = seed;
    opt.refit_standardization_per_fold = cfg.ridge.refit_standardization_per_fold;

    RidgeLayerResult out;
    out.layer = layer;
    for (auto s : {PredictorSubset::baseline, PredictorSubset::baseline_fc, PredictorSubset::baseline_fa,
                   PredictorSubset::full}) {
        const auto cols = subset_columns(s);
        const Eigen::MatrixXd xt = select_columns(features.x_train, cols);
        const Eigen::MatrixXd xv = select_columns(features.x_test, cols);
        auto& r = out.subsets[static_cast<std::size_t>(s)];
        r.subset = s;
        r.fit = fit_ridge(xt, features.y_train, opt);
        r.r2_train = evaluate(r.fit, xt, features.y_train);
        r.r2_test = evaluate(r.fit, xv, features.y_test);
    }
    return out;
}

void write_ridge_csv(std::ostream& out, std::string_view model, std::string_view strategy,
                     std::span<const RidgeLayerResult> layers, bool header) {
    if (header) out << "model,strategy,layer,subset,alpha,r2_train,r2_test\n";
    for (const auto& l : layers)
        for (const auto& s : l.subsets)
            out << model << ',' << strategy << ',' << l.layer << ',' << to_string(s.subset) << ','
                << format_double(s.fit.alpha) << ',' << format_double(s.r2_train) << ',' << format_double(s.r2_test)
                << '\n';
}

void write_ridge_summary_csv(std::ostream& out, std::string_view model, std::string_view strategy,
                             std::span<const RidgeLayerResult> layers, bool header) {
    if (header) out << "model,strategy,quantity,min,max,mean,n_layers\n";
    if (layers.empty()) return;
    using Getter = double (RidgeLayerResult::*)() const;
    const std::pair<const char*, Getter> quantities[] = {
        {"r2_full", &RidgeLayerResult::r2_full},   {"r2_baseline", &RidgeLayerResult::r2_baseline},
        {"delta_fc", &RidgeLayerResult::delta_fc}, {"delta_fa", &RidgeLayerResult::delta_fa},
        {"delta_fc_fa", &RidgeLayerResult::delta_fc_fa}};
    for (const auto& [name, get] : quantities) {
        double lo = (layers.front().*get)(), hi = lo, sum = 0.0;
        for (const auto& l : layers) {
            const double v = (l.*get)();
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            sum += v;
        }
        out << model << ',' << strategy << ',' << name << ',' << format_double(lo) << ',' << format_double(hi) << ','
            << format_double(sum / static_cast<double>(layers.size())) << ',' << layers.size() << '\n';
    }
}

}  // namespace semgeom
