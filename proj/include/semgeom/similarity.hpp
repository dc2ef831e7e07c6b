#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace semgeom {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Symmetric |V| x |V| similarity over the vocabulary. Words whose source row
// was all zero are flagged in the mask; their row and column are zero,
// including the diagonal.
class SimilarityMatrix {
public:
    SimilarityMatrix() = default;
    SimilarityMatrix(std::string tag, Eigen::MatrixXd values, std::vector<std::uint8_t> zero_mask);

    std::size_t size() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    double operator()(std::size_t i, std::size_t j) const {
        return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    const std::string& tag() const noexcept { return tag_; }
    void set_tag(std::string tag) { tag_ = std::move(tag); }

    std::span<const std::uint8_t> zero_mask() const noexcept { return mask_; }
    bool masked(std::size_t i) const { return mask_[i] != 0; }
    std::size_t masked_count() const noexcept;

private:
    std::string tag_;
    Eigen::MatrixXd values_;
    std::vector<std::uint8_t> mask_;
};

// Cosine between rows. Computes the upper triangle and mirrors it, so the
// result is exactly symmetric; nonzero rows get a diagonal of exactly 1.
SimilarityMatrix cosine_similarity(const Eigen::MatrixXd& rows, std::string tag);
SimilarityMatrix cosine_similarity(const SparseRows& rows, std::string tag);

// Entrywise mean; all inputs must share the vocabulary size. The mask is the
// union of the input masks.
SimilarityMatrix mean_similarity(std::span<const SimilarityMatrix> parts, std::string tag);

// Union of zero-row masks.
std::vector<std::uint8_t> union_mask(std::span<const SimilarityMatrix* const> parts);

// "SSIM" binary: magic, u32 |V|, u32-length-prefixed tag, then the upper
// triangle including the diagonal as little-endian float32, row-major.
void save_similarity(const SimilarityMatrix& s, const std::filesystem::path& path);
SimilarityMatrix load_similarity(const std::filesystem::path& path);

}  // namespace semgeom
