#include "semgeom/similarity.hpp"

#include <cmath>

#include "semgeom/binary_io.hpp"
#include "semgeom/error.hpp"

namespace semgeom {

SimilarityMatrix::SimilarityMatrix(std::string tag, Eigen::MatrixXd values, std::vector<std::uint8_t> zero_mask)
    : tag_(std::move(tag)), values_(std::move(values)), mask_(std::move(zero_mask)) {
    if (values_.rows() != values_.cols())
        throw Error(ErrorKind::data, "NOT_SQUARE", "similarity matrix '" + tag_ + "' is not square");
    if (mask_.empty()) mask_.assign(size(), 0);
    if (mask_.size() != size()) throw Error(ErrorKind::data, "BAD_MASK", "mask size does not match matrix");
}

std::size_t SimilarityMatrix::masked_count() const noexcept {
    std::size_t n = 0;
    for (auto m : mask_) n += m != 0;
    return n;
}

namespace {

SimilarityMatrix finish_gram(Eigen::MatrixXd gram, std::vector<std::uint8_t> mask, std::string tag) {
    const Eigen::Index n = gram.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        gram(i, i) = mask[static_cast<std::size_t>(i)] ? 0.0 : 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) gram(j, i) = gram(i, j);
    }
    return SimilarityMatrix(std::move(tag), std::move(gram), std::move(mask));
}

}  // namespace

SimilarityMatrix cosine_similarity(const Eigen::MatrixXd& rows, std::string tag) {
    const Eigen::Index n = rows.rows();
    Eigen::MatrixXd unit = rows;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double norm = rows.row(i).norm();
        if (norm > 0.0) unit.row(i) /= norm;
        else mask[static_cast<std::size_t>(i)] = 1;
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    gram.selfadjointView<Eigen::Upper>().rankUpdate(unit);
    return finish_gram(std::move(gram), std::move(mask), std::move(tag));
}

SimilarityMatrix cosine_similarity(const SparseRows& rows, std::string tag) {
    const Eigen::Index n = rows.rows();
    SparseRows unit = rows;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        double sq = 0.0;
        for (SparseRows::InnerIterator it(unit, i); it; ++it) sq += it.value() * it.value();
        if (sq > 0.0) {
            const double norm = std::sqrt(sq);
            for (SparseRows::InnerIterator it(unit, i); it; ++it) it.valueRef() /= norm;
        } else {
            mask[static_cast<std::size_t>(i)] = 1;
        }
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd(unit * SparseRows(unit.transpose()));
    return finish_gram(std::move(gram), std::move(mask), std::move(tag));
}

SimilarityMatrix mean_similarity(std::span<const SimilarityMatrix> parts, std::string tag) {
    if (parts.empty()) throw Error(ErrorKind::data, "EMPTY_INPUT", "no similarity matrices to average");
    const auto n = parts.front().size();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<std::uint8_t> mask(n, 0);
    for (const auto& p : parts) {
        if (p.size() != n) throw Error(ErrorKind::data, "SIZE_MISMATCH", "similarity matrices differ in size");
        sum += p.values();
        for (std::size_t i = 0; i < n; ++i) mask[i] |= p.zero_mask()[i];
    }
    sum /= static_cast<double>(parts.size());
    return SimilarityMatrix(std::move(tag), std::move(sum), std::move(mask));
}

std::vector<std::uint8_t> union_mask(std::span<const SimilarityMatrix* const> parts) {
    if (parts.empty()) return {};
    std::vector<std::uint8_t> mask(parts.front()->size(), 0);
    for (const auto* p : parts) {
        if (p->size() != mask.size()) throw Error(ErrorKind::data, "SIZE_MISMATCH", "similarity matrices differ in size");
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] |= p->zero_mask()[i];
    }
    return mask;
}

void save_similarity(const SimilarityMatrix& s, const std::filesystem::path& path) {
    BinaryWriter w(path);
    w.magic("SSIM");
    w.u32(static_cast<std::uint32_t>(s.size()));
    w.string(s.tag());
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i; j < s.size(); ++j) w.f32(static_cast<float>(s(i, j)));
    w.close();
}

SimilarityMatrix load_similarity(const std::filesystem::path& path) {
    BinaryReader r(path);
    r.expect_magic("SSIM");
    const auto n = r.u32();
    std::string tag = r.string();
    const auto expected = static_cast<std::uint64_t>(n) * (n + 1) / 2 * 4;
    if (r.remaining() < expected) throw Error(ErrorKind::data, "TRUNCATED", path.string() + ": payload shorter than header");
    Eigen::MatrixXd v(n, n);
    std::vector<std::uint8_t> mask(n, 0);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            const double x = r.f32();
            if (!std::isfinite(x)) throw Error(ErrorKind::data, "NON_FINITE", path.string() + ": non-finite entry");
            v(i, j) = v(j, i) = x;
        }
    if (r.remaining() != 0) throw Error(ErrorKind::data, "TRAILING_BYTES", path.string() + ": unexpected trailing data");
    for (Eigen::Index i = 0; i < n; ++i) mask[static_cast<std::size_t>(i)] = v(i, i) == 0.0;
    return SimilarityMatrix(std::move(tag), std::move(v), std::move(mask));
}

}  // namespace semgeom
