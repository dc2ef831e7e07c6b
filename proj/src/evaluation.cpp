#include "semgeom/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_set>

#include "semgeom/error.hpp"
#include "semgeom/parallel.hpp"
#include "semgeom/rng.hpp"

namespace semgeom {

PairSample sample_pairs(std::size_t vocab_size, std::size_t n, std::uint64_t seed, std::span<const std::uint8_t> mask) {
    if (!mask.empty() && mask.size() != vocab_size)
        throw Error(ErrorKind::data, "BAD_MASK", "mask size does not match vocabulary size");
    std::vector<std::uint32_t> live;
    live.reserve(vocab_size);
    for (std::uint32_t i = 0; i < vocab_size; ++i)
        if (mask.empty() || !mask[i]) live.push_back(i);

    const std::uint64_t m = live.size();
    const std::uint64_t total = m < 2 ? 0 : m * (m - 1) / 2;
    PairSample out;
    out.seed = seed;
    out.requested = n;

    // Row r of the upper triangle (over live positions) starts at offset[r].
    std::vector<std::uint64_t> offset(m + 1, 0);
    for (std::uint64_t r = 0; r < m; ++r) offset[r + 1] = offset[r] + (m - 1 - r);
    auto decode = [&](std::uint64_t idx) {
        const auto row = static_cast<std::uint64_t>(std::upper_bound(offset.begin(), offset.end(), idx) - offset.begin()) - 1;
        const auto col = row + 1 + (idx - offset[row]);
        return std::pair{live[row], live[col]};
    };

    if (n >= total) {
        out.exhaustive = true;
        out.pairs.reserve(total);
        for (std::uint64_t r = 0; r < m; ++r)
            for (std::uint64_t c = r + 1; c < m; ++c) out.pairs.emplace_back(live[r], live[c]);
        return out;
    }

    // Floyd's algorithm: n distinct indices in [0, total).
    SplitMix64 rng(seed);
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(n * 2);
    for (std::uint64_t j = total - n; j < total; ++j) {
        const auto t = rng.uniform_below(j + 1);
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    std::vector<std::uint64_t> idx(chosen.begin(), chosen.end());
    std::sort(idx.begin(), idx.end());
    out.pairs.reserve(idx.size());
    for (auto k : idx) out.pairs.push_back(decode(k));
    return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw Error(ErrorKind::numerical, "ZERO_VARIANCE", "Pearson correlation needs two equal-length series of length >= 2");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0))
        throw Error(ErrorKind::numerical, "ZERO_VARIANCE", "one of the similarity vectors is constant");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

RsaResult rsa(const SimilarityMatrix& hidden, const SimilarityMatrix& ref, const PairSample& pairs) {
    if (hidden.size() != ref.size())
        throw Error(ErrorKind::data, "VOCAB_MISMATCH", "RSA inputs cover different vocabularies");
    std::vector<double> a, b;
    a.reserve(pairs.pairs.size());
    b.reserve(pairs.pairs.size());
    for (auto [i, j] : pairs.pairs) {
        a.push_back(hidden(i, j));
        b.push_back(ref(i, j));
    }
    return RsaResult{0, ref.tag(), pearson(a, b), a.size()};
}

namespace {

// Strict total order: larger similarity first, then smaller index.
struct NeighborOrder {
    const Eigen::MatrixXd* s;
    Eigen::Index row;
    bool operator()(std::uint32_t a, std::uint32_t b) const {
        const double va = (*s)(row, a), vb = (*s)(row, b);
        if (va != vb) return va > vb;
        return a < b;
    }
};

// Neighbours of i sorted best-first, truncated to k_max.
std::vector<std::uint32_t> ranked_neighbors(const SimilarityMatrix& s, std::uint32_t i, int k_max,
                                            std::span<const std::uint8_t> exclude) {
    std::vector<std::uint32_t> cand;
    cand.reserve(s.size());
    for (std::uint32_t j = 0; j < s.size(); ++j)
        if (j != i && (exclude.empty() || !exclude[j])) cand.push_back(j);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(k_max), cand.size());
    NeighborOrder order{&s.values(), static_cast<Eigen::Index>(i)};
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(), order);
    cand.resize(k);
    return cand;
}

std::vector<std::uint8_t> combined_mask(const SimilarityMatrix& a, const SimilarityMatrix& b) {
    std::vector<std::uint8_t> m(a.size(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = a.zero_mask()[i] | b.zero_mask()[i];
    return m;
}

}  // namespace

std::vector<std::uint32_t> top_k_neighbors(const SimilarityMatrix& s, std::uint32_t i, int k,
                                           std::span<const std::uint8_t> exclude) {
    auto out = ranked_neighbors(s, i, k, exclude);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<NnResult> nn_overlap(const SimilarityMatrix& hidden, const SimilarityMatrix& ref, std::span<const int> ks) {
    if (hidden.size() != ref.size())
        throw Error(ErrorKind::data, "VOCAB_MISMATCH", "NN inputs cover different vocabularies");
    const auto mask = combined_mask(hidden, ref);
    const std::size_t masked = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
    const std::size_t live = hidden.size() - masked;
    int k_max = 0;
    for (int k : ks) {
        if (k < 1 || static_cast<std::size_t>(k) >= live)
            throw Error(ErrorKind::config, "BAD_K",
                        "k = " + std::to_string(k) + " must be in [1, " + std::to_string(live) + ") unmasked words");
        k_max = std::max(k_max, k);
    }

    std::vector<NnResult> out(ks.size());
    for (std::size_t q = 0; q < ks.size(); ++q) {
        out[q].reference = ref.tag();
        out[q].k = ks[q];
        out[q].n_words = live;
        out[q].n_masked = masked;
        out[q].per_word.assign(hidden.size(), std::numeric_limits<double>::quiet_NaN());
    }
    std::vector<char> in_ref(hidden.size(), 0);
    for (std::uint32_t i = 0; i < hidden.size(); ++i) {
        if (mask[i]) continue;
        const auto h = ranked_neighbors(hidden, i, k_max, mask);
        const auto r = ranked_neighbors(ref, i, k_max, mask);
        for (std::size_t q = 0; q < ks.size(); ++q) {
            const auto k = static_cast<std::size_t>(ks[q]);
            for (std::size_t t = 0; t < k; ++t) in_ref[r[t]] = 1;
            std::size_t shared = 0;
            for (std::size_t t = 0; t < k; ++t) shared += in_ref[h[t]];
            for (std::size_t t = 0; t < k; ++t) in_ref[r[t]] = 0;
            out[q].per_word[i] = static_cast<double>(shared) / static_cast<double>(k);
        }
    }
    for (auto& res : out) {
        double sum = 0.0;
        for (std::uint32_t i = 0; i < hidden.size(); ++i)
            if (!mask[i]) sum += res.per_word[i];
        res.mean_overlap = sum / static_cast<double>(live);
    }
    return out;
}

NnResult nn_overlap(const SimilarityMatrix& hidden, const SimilarityMatrix& ref, int k) {
    const int ks[] = {k};
    return std::move(nn_overlap(hidden, ref, ks).front());
}

std::vector<SummaryRow> summarize_rows(std::span<const ReportRow> rows) {
    using Key = std::tuple<std::string, std::string, std::string, std::string, int>;
    std::map<Key, SummaryRow> acc;
    std::vector<Key> order;
    for (const auto& r : rows) {
        Key key{r.model, r.strategy, r.reference, r.metric, r.k.value_or(-1)};
        auto [it, fresh] = acc.try_emplace(key);
        auto& s = it->second;
        if (fresh) {
            order.push_back(key);
            s = SummaryRow{r.model, r.strategy, r.reference, r.metric, r.k, r.value, r.value, 0.0, 0};
        }
        s.min = std::min(s.min, r.value);
        s.max = std::max(s.max, r.value);
        s.mean += r.value;
        ++s.n_layers;
    }
    std::vector<SummaryRow> out;
    out.reserve(order.size());
    for (const auto& key : order) {
        auto s = acc.at(key);
        s.mean /= static_cast<double>(s.n_layers);
        out.push_back(std::move(s));
    }
    return out;
}

LayerProfile layer_profile(const std::string& model, const std::string& strategy, std::span<const LayerInput> layers,
                           std::span<const SimilarityMatrix* const> references, const RunConfig& cfg,
                           const PairSample& pairs, const ProfileOptions& options) {
    struct Cell {
        std::vector<ReportRow> rows;
        std::optional<Exclusion> excluded;
    };
    std::vector<Cell> cells(layers.size() * references.size());
    parallel_for(cells.size(), options.workers, [&](std::size_t idx) {
        const auto& layer = layers[idx / references.size()];
        const auto& ref = *references[idx % references.size()];
        auto& cell = cells[idx];
        try {
            const auto r = rsa(*layer.similarity, ref, pairs);
            cell.rows.push_back(ReportRow{model, strategy, layer.layer, ref.tag(), "rsa", std::nullopt, r.r, r.n_pairs});
        } catch (const Error& e) {
            if (e.code() != "ZERO_VARIANCE") throw;
            cell.excluded = Exclusion{layer.layer, ref.tag(), e.what()};
            return;
        }
        if (options.nearest_neighbors && !cfg.nn_k_list.empty())
            for (const auto& nn : nn_overlap(*layer.similarity, ref, cfg.nn_k_list))
                cell.rows.push_back(
                    ReportRow{model, strategy, layer.layer, ref.tag(), "nn", nn.k, nn.mean_overlap, nn.n_words});
    });

    LayerProfile out;
    for (auto& c : cells) {
        std::move(c.rows.begin(), c.rows.end(), std::back_inserter(out.rows));
        if (c.excluded) out.excluded.push_back(std::move(*c.excluded));
    }
    out.summary = summarize_rows(out.rows);
    return out;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

namespace {

std::string k_field(const std::optional<int>& k) { return k ? std::to_string(*k) : "null"; }

}  // namespace

void write_report_csv(std::ostream& out, std::span<const ReportRow> rows, bool header) {
    if (header) out << "model,strategy,layer,reference,metric,k_or_null,value,n\n";
    for (const auto& r : rows)
        out << r.model << ',' << r.strategy << ',' << r.layer << ",\"" << r.reference << "\"," << r.metric << ','
            << k_field(r.k) << ',' << format_double(r.value) << ',' << r.n << '\n';
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows, bool header) {
    if (header) out << "model,strategy,reference,metric,k_or_null,min,max,mean,n_layers\n";
    for (const auto& r : rows)
        out << r.model << ',' << r.strategy << ",\"" << r.reference << "\"," << r.metric << ',' << k_field(r.k) << ','
            << format_double(r.min) << ',' << format_double(r.max) << ',' << format_double(r.mean) << ',' << r.n_layers
            << '\n';
}

}  // namespace semgeom
