#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "semgeom/config.hpp"
#include "semgeom/harness.hpp"
#include "semgeom/similarity.hpp"
#include "semgeom/vocab.hpp"

namespace semgeom {

// Sparse cue x response-type counts. Rows follow the vocabulary; columns are
// response words (case-folded) in order of first appearance.
class CueResponseMatrix {
public:
    explicit CueResponseMatrix(std::size_t n_cues = 0) : rows_(n_cues) {}

    std::size_t rows() const noexcept { return rows_.size(); }
    std::size_t cols() const noexcept { return columns_.size(); }
    std::span<const std::string> column_words() const noexcept { return columns_; }

    std::uint32_t column(std::string_view response);  // adds the column if new
    void add(WordId cue, std::string_view response, std::uint64_t count = 1);
    std::uint64_t count(WordId cue, std::string_view response) const;
    std::uint64_t row_total(WordId cue) const;
    std::uint64_t total() const;
    std::size_t nonzeros() const;
    // (column id -> count) for one cue, ordered by column id.
    const std::map<std::uint32_t, std::uint64_t>& row(WordId cue) const { return rows_.at(cue); }

    // Adds another matrix over the same cues, matching columns by word.
    void merge(const CueResponseMatrix& other);

    SparseRows to_sparse() const;

private:
    std::vector<std::map<std::uint32_t, std::uint64_t>> rows_;
    std::vector<std::string> columns_;
    std::unordered_map<std::string, std::uint32_t> column_index_;
};

// Nonnegative real weights with the same shape and column space as the counts.
struct WeightedMatrix {
    SparseRows values;
    std::vector<std::string> column_words;
};

// Counts from compliant records only; non-compliant records are skipped.
// A record whose cue is outside the vocabulary is an error.
CueResponseMatrix aggregate_counts(std::span<const TrialRecord> records, const Vocabulary& vocab, Paradigm paradigm);

struct JointMarginals {
    double total = 0.0;
    Eigen::VectorXd row;  // P(i)
    Eigen::VectorXd col;  // P(j)
};
JointMarginals joint_marginals(const CueResponseMatrix& counts);

// PPMI(i,j) = max(0, ln(P(i,j) / (P(i) P(j)))), natural log. Only observed
// cells are materialized. Throws Error(numerical, "EMPTY_MATRIX") when N = 0.
WeightedMatrix ppmi(const CueResponseMatrix& counts);
WeightedMatrix raw_weights(const CueResponseMatrix& counts);

SimilarityMatrix cosine_rows(const WeightedMatrix& m, std::string tag);

struct LowRankEmbedding {
    Eigen::MatrixXd cue_embedding;    // Z = U_K Sigma_K, |V| x K
    Eigen::VectorXd singular_values;  // nonincreasing, length K
    Eigen::MatrixXd right_vectors;    // V_K, #columns x K
    SimilarityMatrix similarity;      // cosine over rows of Z

    Eigen::MatrixXd reconstruct() const { return cue_embedding * right_vectors.transpose(); }
};

// Rank-K truncated SVD through the eigendecomposition of B B^T.
// Requires 1 <= K <= min(|V|, #columns).
LowRankEmbedding svd_embed(const WeightedMatrix& m, int k, std::string tag);

// Coordinate text format, one "row_word<TAB>col_word<TAB>value" per line.
void save_coo(const CueResponseMatrix& counts, const Vocabulary& vocab, const std::filesystem::path& path);
CueResponseMatrix load_coo(const std::filesystem::path& path, const Vocabulary& vocab);

// Aggregated interchange CSV: model,paradigm,cue,response,count.
void write_aggregated_csv(std::ostream& out, std::string_view model, Paradigm paradigm, const CueResponseMatrix& counts,
                          const Vocabulary& vocab, bool header);

}  // namespace semgeom

namespace semgeom {

// Binary cache of a count matrix ("BCOO": magic, u32 rows, u32 cols, column
// words as u32-length-prefixed strings, u32 nnz, then (u32 row, u32 col,
// u64-as-two-u32 count) triples). Faster to reload than the text form.
void save_counts_binary(const CueResponseMatrix& counts, const std::filesystem::path& path);
CueResponseMatrix load_counts_binary(const std::filesystem::path& path);

}  // namespace semgeom
