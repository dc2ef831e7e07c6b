#include "semgeom/behavior.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "semgeom/binary_io.hpp"
#include "semgeom/error.hpp"

namespace semgeom {

std::uint32_t CueResponseMatrix::column(std::string_view response) {
    std::string key(response);
    auto it = column_index_.find(key);
    if (it != column_index_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(columns_.size());
    column_index_.emplace(key, id);
    columns_.push_back(std::move(key));
    return id;
}

void CueResponseMatrix::add(WordId cue, std::string_view response, std::uint64_t count) {
    if (cue >= rows_.size())
        throw Error(ErrorKind::data, "UNKNOWN_CUE", "cue id " + std::to_string(cue) + " outside the vocabulary");
    if (count == 0) return;
    rows_[cue][column(response)] += count;
}

std::uint64_t CueResponseMatrix::count(WordId cue, std::string_view response) const {
    auto col = column_index_.find(std::string(response));
    if (col == column_index_.end()) return 0;
    const auto& r = rows_.at(cue);
    auto it = r.find(col->second);
    return it == r.end() ? 0 : it->second;
}

std::uint64_t CueResponseMatrix::row_total(WordId cue) const {
    std::uint64_t t = 0;
    for (const auto& [_, c] : rows_.at(cue)) t += c;
    return t;
}

std::uint64_t CueResponseMatrix::total() const {
    std::uint64_t t = 0;
    for (WordId i = 0; i < rows_.size(); ++i) t += row_total(i);
    return t;
}

std::size_t CueResponseMatrix::nonzeros() const {
    std::size_t n = 0;
    for (const auto& r : rows_) n += r.size();
    return n;
}

void CueResponseMatrix::merge(const CueResponseMatrix& other) {
    if (other.rows() != rows())
        throw Error(ErrorKind::data, "SIZE_MISMATCH", "cannot merge count matrices over different vocabularies");
    for (WordId i = 0; i < other.rows_.size(); ++i)
        for (const auto& [col, c] : other.rows_[i]) add(i, other.columns_[col], c);
}

SparseRows CueResponseMatrix::to_sparse() const {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(nonzeros());
    for (std::size_t i = 0; i < rows_.size(); ++i)
        for (const auto& [col, c] : rows_[i])
            triplets.emplace_back(static_cast<int>(i), static_cast<int>(col), static_cast<double>(c));
    SparseRows m(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
}

CueResponseMatrix aggregate_counts(std::span<const TrialRecord> records, const Vocabulary& vocab, Paradigm paradigm) {
    CueResponseMatrix m(vocab.size());
    for (const auto& r : records) {
        if (r.cue >= vocab.size())
            throw Error(ErrorKind::data, "UNKNOWN_CUE", "record cue id " + std::to_string(r.cue) + " not in vocabulary");
        if (r.paradigm != paradigm || !r.compliant) continue;
        for (const auto& w : r.parsed_responses) m.add(r.cue, normalize_word(w));
    }
    return m;
}

JointMarginals joint_marginals(const CueResponseMatrix& counts) {
    JointMarginals out;
    out.row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(counts.rows()));
    out.col = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(counts.cols()));
    out.total = static_cast<double>(counts.total());
    if (out.total <= 0.0) throw Error(ErrorKind::numerical, "EMPTY_MATRIX", "count matrix has no observations");
    for (WordId i = 0; i < counts.rows(); ++i)
        for (const auto& [col, c] : counts.row(i)) {
            const double p = static_cast<double>(c) / out.total;
            out.row(i) += p;
            out.col(col) += p;
        }
    return out;
}

WeightedMatrix ppmi(const CueResponseMatrix& counts) {
    const double n = static_cast<double>(counts.total());
    if (n <= 0.0) throw Error(ErrorKind::numerical, "EMPTY_MATRIX", "count matrix has no observations");
    std::vector<double> row_sum(counts.rows(), 0.0), col_sum(counts.cols(), 0.0);
    for (WordId i = 0; i < counts.rows(); ++i)
        for (const auto& [col, c] : counts.row(i)) {
            row_sum[i] += static_cast<double>(c);
            col_sum[col] += static_cast<double>(c);
        }

    std::vector<Eigen::Triplet<double>> triplets;
    for (WordId i = 0; i < counts.rows(); ++i)
        for (const auto& [col, c] : counts.row(i)) {
            // P(i,j) / (P(i) P(j)) = B_ij N / (r_i c_j)
            const double pmi = std::log(static_cast<double>(c) * n / (row_sum[i] * col_sum[col]));
            if (pmi > 0.0) triplets.emplace_back(static_cast<int>(i), static_cast<int>(col), pmi);
        }
    WeightedMatrix out;
    out.values.resize(static_cast<Eigen::Index>(counts.rows()), static_cast<Eigen::Index>(counts.cols()));
    out.values.setFromTriplets(triplets.begin(), triplets.end());
    out.column_words.assign(counts.column_words().begin(), counts.column_words().end());
    return out;
}

WeightedMatrix raw_weights(const CueResponseMatrix& counts) {
    return WeightedMatrix{counts.to_sparse(), {counts.column_words().begin(), counts.column_words().end()}};
}

SimilarityMatrix cosine_rows(const WeightedMatrix& m, std::string tag) { return cosine_similarity(m.values, std::move(tag)); }

LowRankEmbedding svd_embed(const WeightedMatrix& m, int k, std::string tag) {
    const auto rows = m.values.rows(), cols = m.values.cols();
    if (k < 1 || k > std::min(rows, cols))
        throw Error(ErrorKind::config, "BAD_RANK",
                    "K = " + std::to_string(k) + " outside [1, " + std::to_string(std::min(rows, cols)) + "]");

    const SparseRows transposed = m.values.transpose();
    const Eigen::MatrixXd gram = Eigen::MatrixXd(m.values * transposed);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success)
        throw Error(ErrorKind::numerical, "SVD_FAILED", "eigendecomposition of the cue Gram matrix failed");

    const Eigen::Index kk = k;
    Eigen::MatrixXd u(rows, kk);
    Eigen::VectorXd sigma(kk);
    for (Eigen::Index c = 0; c < kk; ++c) {
        const Eigen::Index src = rows - 1 - c;  // eigenvalues ascend
        sigma(c) = std::sqrt(std::max(eig.eigenvalues()(src), 0.0));
        u.col(c) = eig.eigenvectors().col(src);
        // Fix the sign so the largest-magnitude entry is positive.
        Eigen::Index at = 0;
        u.col(c).cwiseAbs().maxCoeff(&at);
        if (u(at, c) < 0) u.col(c) = -u.col(c);
    }

    const double cutoff = (sigma.size() ? sigma(0) : 0.0) * static_cast<double>(std::max(rows, cols)) *
                          std::numeric_limits<double>::epsilon();
    Eigen::MatrixXd z = u * sigma.asDiagonal();
    for (Eigen::Index i = 0; i < rows; ++i)
        if (m.values.row(i).nonZeros() == 0) z.row(i).setZero();

    Eigen::VectorXd inv = sigma.unaryExpr([cutoff](double s) { return s > cutoff ? 1.0 / s : 0.0; });
    Eigen::MatrixXd v = Eigen::MatrixXd(transposed * u) * inv.asDiagonal();

    SimilarityMatrix sim = cosine_similarity(z, std::move(tag));
    return LowRankEmbedding{std::move(z), std::move(sigma), std::move(v), std::move(sim)};
}

void save_coo(const CueResponseMatrix& counts, const Vocabulary& vocab, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::data, "WRITE_FAILED", "cannot write " + path.string());
    for (WordId i = 0; i < counts.rows(); ++i)
        for (const auto& [col, c] : counts.row(i))
            out << vocab.word(i) << '\t' << counts.column_words()[col] << '\t' << c << '\n';
}

CueResponseMatrix load_coo(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::data, "NOT_FOUND", "cannot open " + path.string());
    CueResponseMatrix m(vocab.size());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos)
            throw Error(ErrorKind::data, "BAD_COO", path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
        std::uint64_t value = 0;
        try {
            value = std::stoull(line.substr(t2 + 1));
        } catch (const std::exception&) {
            throw Error(ErrorKind::data, "BAD_COO", path.string() + ":" + std::to_string(lineno) + ": bad count");
        }
        m.add(vocab.id(line.substr(0, t1)), line.substr(t1 + 1, t2 - t1 - 1), value);
    }
    return m;
}

void write_aggregated_csv(std::ostream& out, std::string_view model, Paradigm paradigm, const CueResponseMatrix& counts,
                          const Vocabulary& vocab, bool header) {
    if (header) out << "model,paradigm,cue,response,count\n";
    for (WordId i = 0; i < counts.rows(); ++i)
        for (const auto& [col, c] : counts.row(i))
            out << model << ',' << to_string(paradigm) << ',' << vocab.word(i) << ',' << counts.column_words()[col] << ','
                << c << '\n';
}

void save_counts_binary(const CueResponseMatrix& counts, const std::filesystem::path& path) {
    BinaryWriter w(path);
    w.magic("BCOO");
    w.u32(static_cast<std::uint32_t>(counts.rows()));
    w.u32(static_cast<std::uint32_t>(counts.cols()));
    for (const auto& word : counts.column_words()) w.string(word);
    w.u32(static_cast<std::uint32_t>(counts.nonzeros()));
    for (WordId i = 0; i < counts.rows(); ++i)
        for (const auto& [col, c] : counts.row(i)) {
            w.u32(i);
            w.u32(col);
            w.u32(static_cast<std::uint32_t>(c & 0xffffffffu));
            w.u32(static_cast<std::uint32_t>(c >> 32));
        }
    w.close();
}

CueResponseMatrix load_counts_binary(const std::filesystem::path& path) {
    BinaryReader r(path);
    r.expect_magic("BCOO");
    const auto rows = r.u32();
    const auto cols = r.u32();
    CueResponseMatrix m(rows);
    std::vector<std::string> words;
    words.reserve(cols);
    for (std::uint32_t c = 0; c < cols; ++c) words.push_back(r.string());
    for (const auto& w : words) m.column(w);
    const auto nnz = r.u32();
    for (std::uint32_t k = 0; k < nnz; ++k) {
        const auto i = r.u32();
        const auto col = r.u32();
        const std::uint64_t lo = r.u32(), hi = r.u32();
        if (col >= cols) throw Error(ErrorKind::data, "BAD_COO", path.string() + ": column out of range");
        m.add(i, words[col], lo | (hi << 32));
    }
    return m;
}

}  // namespace semgeom
