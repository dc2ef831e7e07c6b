#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semgeom/config.hpp"
#include "semgeom/similarity.hpp"

namespace semgeom {

struct PairSample {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // i < j, sorted
    std::uint64_t seed = 0;
    std::size_t requested = 0;
    bool exhaustive = false;  // every unmasked pair is present
};

// Uniform sample without replacement of upper-triangular pairs over words not
// flagged in `mask`. Returns every pair when n >= the number available.
PairSample sample_pairs(std::size_t vocab_size, std::size_t n, std::uint64_t seed,
                        std::span<const std::uint8_t> mask = {});

struct RsaResult {
    std::uint32_t layer = 0;
    std::string reference;
    double r = 0.0;
    std::size_t n_pairs = 0;
};

// Two-pass Pearson correlation; throws Error(numerical, "ZERO_VARIANCE")
// when either side is constant.
double pearson(std::span<const double> x, std::span<const double> y);
RsaResult rsa(const SimilarityMatrix& hidden, const SimilarityMatrix& ref, const PairSample& pairs);

struct NnResult {
    std::uint32_t layer = 0;
    std::string reference;
    int k = 0;
    double mean_overlap = 0.0;
    std::size_t n_words = 0;       // query words used
    std::size_t n_masked = 0;      // words excluded by the zero-row masks
    std::vector<double> per_word;  // overlap per vocabulary word; masked words hold NaN
};

// Top-k neighbours of word i under S: the k indices j != i with the largest
// S(i, j), ties broken by ascending index. Words masked in either matrix are
// excluded as queries and as neighbours.
std::vector<std::uint32_t> top_k_neighbors(const SimilarityMatrix& s, std::uint32_t i, int k,
                                           std::span<const std::uint8_t> exclude);
NnResult nn_overlap(const SimilarityMatrix& hidden, const SimilarityMatrix& ref, int k);
// Same as calling nn_overlap per k, sharing one selection per word.
std::vector<NnResult> nn_overlap(const SimilarityMatrix& hidden, const SimilarityMatrix& ref, std::span<const int> ks);

// One layer of a model/strategy, with its similarity matrix.
struct LayerInput {
    std::uint32_t layer = 0;
    const SimilarityMatrix* similarity = nullptr;
};

struct ReportRow {
    std::string model;
    std::string strategy;
    std::uint32_t layer = 0;
    std::string reference;
    std::string metric;  // "rsa" or "nn"
    std::optional<int> k;
    double value = 0.0;
    std::size_t n = 0;
};

struct SummaryRow {
    std::string model;
    std::string strategy;
    std::string reference;
    std::string metric;
    std::optional<int> k;
    double min = 0.0, max = 0.0, mean = 0.0;
    std::size_t n_layers = 0;
};

struct Exclusion {
    std::uint32_t layer = 0;
    std::string reference;
    std::string reason;
};

struct LayerProfile {
    std::vector<ReportRow> rows;
    std::vector<SummaryRow> summary;
    std::vector<Exclusion> excluded;
};

struct ProfileOptions {
    bool nearest_neighbors = true;
    std::size_t workers = 1;
};

// RSA (on the shared pair sample) and NN@k for every layer against every
// reference, plus min/max/mean across layers. Layers that fail with
// ZERO_VARIANCE are dropped from that reference's summary and listed in
// `excluded`.
LayerProfile layer_profile(const std::string& model, const std::string& strategy, std::span<const LayerInput> layers,
                           std::span<const SimilarityMatrix* const> references, const RunConfig& cfg,
                           const PairSample& pairs, const ProfileOptions& options = {});

std::vector<SummaryRow> summarize_rows(std::span<const ReportRow> rows);

// CSV: model,strategy,layer,reference,metric,k_or_null,value,n
void write_report_csv(std::ostream& out, std::span<const ReportRow> rows, bool header = true);
// CSV: model,strategy,reference,metric,k_or_null,min,max,mean,n_layers
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows, bool header = true);

// Shortest round-trip decimal form, locale independent.
std::string format_double(double v);

}  // namespace semgeom
