#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "semgeom/config.hpp"
#include "semgeom/embeddings.hpp"
#include "semgeom/similarity.hpp"

namespace semgeom {

struct VocabSplit {
    std::vector<WordId> train;  // ascending
    std::vector<WordId> test;   // ascending
    std::uint64_t seed = 0;
};

// round(fraction * |V|) training words chosen by a seeded shuffle.
VocabSplit split_vocab(std::size_t vocab_size, double train_fraction, std::uint64_t seed);

inline constexpr std::size_t kNumPredictors = 5;
inline constexpr std::array<std::string_view, kNumPredictors> kPredictorNames{"fasttext", "bert", "consensus",
                                                                              "fc_counts", "fa_counts"};

// Predictor similarity matrices in fixed column order [FT, BERT, X, FC, FA].
struct Predictors {
    const SimilarityMatrix* fasttext = nullptr;
    const SimilarityMatrix* bert = nullptr;
    const SimilarityMatrix* consensus = nullptr;  // built without the target model
    const SimilarityMatrix* fc_counts = nullptr;  // raw-count cosine, not PPMI
    const SimilarityMatrix* fa_counts = nullptr;

    std::array<const SimilarityMatrix*, kNumPredictors> columns() const {
        return {fasttext, bert, consensus, fc_counts, fa_counts};
    }
};

using PairList = std::vector<std::pair<WordId, WordId>>;

struct FeatureSet {
    Eigen::MatrixXd x_train;  // rows x 5
    Eigen::VectorXd y_train;
    PairList train_pairs;
    Eigen::MatrixXd x_test;
    Eigen::VectorXd y_test;
    PairList test_pairs;
    CenteringStats centering;  // fit on training words only
};

// Target y = cosine of the target's vectors after centering fit on training
// words (identity in raw mode). Training rows: n_train_pairs sampled from
// within-train pairs; test rows: every within-test pair. Any cross-split pair
// raises Error(leakage, "LEAKAGE").
FeatureSet build_features(const VocabSplit& split, const Predictors& predictors, const LayerEmbeddings& target,
                          std::size_t n_train_pairs, std::uint64_t seed, CenteringMode mode = CenteringMode::centered);

// Throws LEAKAGE if a pair mixes splits or a training pair touches a test word.
void check_no_leakage(const VocabSplit& split, const PairList& train_pairs, const PairList& test_pairs);

// n log-spaced values from lo to hi; endpoints are exact.
std::vector<double> alpha_grid(double lo, double hi, int n);

struct RidgeOptions {
    std::vector<double> alphas;
    int folds = 5;
    std::uint64_t seed = 0;                    // fold assignment
    bool refit_standardization_per_fold = true;
};

struct RidgeFit {
    Eigen::VectorXd coefficients;  // on standardized predictors
    double intercept = 0.0;        // mean of training y
    double alpha = 0.0;
    std::vector<double> alphas;
    std::vector<double> cv_mse;  // mean validation MSE per alpha
    Eigen::VectorXd x_mean;
    Eigen::VectorXd x_scale;              // population std; 1 for constant columns
    std::vector<std::size_t> constant_columns;

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

// Closed-form solve of (Z'Z + alpha I) beta = Z'(y - mean(y)) on standardized Z.
RidgeFit fit_ridge_fixed(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha);
// Alpha chosen by k-fold CV on mean squared error (contiguous folds after a
// seeded shuffle), then refit on all rows.
RidgeFit fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RidgeOptions& options);

// 1 - SS_res / SS_tot; throws Error(numerical, "DEGENERATE_TEST") when SS_tot = 0.
double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& predicted);
double evaluate(const RidgeFit& fit, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

enum class PredictorSubset : std::uint8_t { baseline, baseline_fc, baseline_fa, full };
std::string_view to_string(PredictorSubset s);
std::vector<std::size_t> subset_columns(PredictorSubset s);
Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, std::span<const std::size_t> cols);

struct SubsetResult {
    PredictorSubset subset = PredictorSubset::full;
    RidgeFit fit;
    double r2_train = 0.0;
    double r2_test = 0.0;
};

struct RidgeLayerResult {
    std::uint32_t layer = 0;
    std::array<SubsetResult, 4> subsets;  // baseline, +FC, +FA, full

    const SubsetResult& get(PredictorSubset s) const { return subsets[static_cast<std::size_t>(s)]; }
    double r2_full() const { return get(PredictorSubset::full).r2_test; }
    double r2_baseline() const { return get(PredictorSubset::baseline).r2_test; }
    double delta_fc() const { return get(PredictorSubset::baseline_fc).r2_test - r2_baseline(); }
    double delta_fa() const { return get(PredictorSubset::baseline_fa).r2_test - r2_baseline(); }
    double delta_fc_fa() const { return r2_full() - r2_baseline(); }
};

// Fits every predictor subset with its own alpha selection.
RidgeLayerResult ridge_layer(std::uint32_t layer, const FeatureSet& features, const RunConfig& cfg, std::uint64_t seed);

// CSV: model,strategy,layer,subset,alpha,r2_train,r2_test
void write_ridge_csv(std::ostream& out, std::string_view model, std::string_view strategy,
                     std::span<const RidgeLayerResult> layers, bool header = true);
// CSV: model,strategy,quantity,min,max,mean,n_layers with quantity in
// r2_full, r2_baseline, delta_fc, delta_fa, delta_fc_fa.
void write_ridge_summary_csv(std::ostream& out, std::string_view model, std::string_view strategy,
                             std::span<const RidgeLayerResult> layers, bool header = true);

}  // namespace semgeom
