#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "implet/error.hpp"
#include "implet/parallel.hpp"

namespace implet {

/// A sequence of 1- or 2-channel points stored row-major (point-major).
/// Channel 0 carries series values, channel 1 (when present) attributions.
class MultiSeq {
public:
    MultiSeq() = default;
    MultiSeq(std::size_t channels, std::vector<double> data) : channels_(channels), data_(std::move(data)) {
        if (channels_ < 1) throw ShapeError("MultiSeq needs at least one channel");
        if (data_.size() % channels_ != 0) throw ShapeError("MultiSeq data is not a whole number of points");
    }

    static MultiSeq univariate(std::span<const double> values) {
        return MultiSeq(1, std::vector<double>(values.begin(), values.end()));
    }

    static MultiSeq bivariate(std::span<const double> values, std::span<const double> attributions) {
        if (values.size() != attributions.size()) throw ShapeError("value/attribution length mismatch");
        std::vector<double> d(values.size() * 2);
        for (std::size_t i = 0; i < values.size(); ++i) {
            d[2 * i] = values[i];
            d[2 * i + 1] = attributions[i];
        }
        return MultiSeq(2, std::move(d));
    }

    std::size_t channels() const noexcept { return channels_; }
    std::size_t length() const noexcept { return data_.size() / channels_; }
    double at(std::size_t i, std::size_t ch) const { return data_[i * channels_ + ch]; }
    double& at(std::size_t i, std::size_t ch) { return data_[i * channels_ + ch]; }
    std::span<const double> point(std::size_t i) const { return {data_.data() + i * channels_, channels_}; }
    const std::vector<double>& data() const noexcept { return data_; }

    /// Copy of one channel as a plain vector.
    std::vector<double> channel(std::size_t ch) const {
        std::vector<double> out(length());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i, ch);
        return out;
    }

    /// The 1-channel sequence made of channel `ch`.
    MultiSeq project(std::size_t ch) const { return MultiSeq(1, channel(ch)); }

    bool operator==(const MultiSeq&) const = default;

private:
    std::size_t channels_ = 1;
    std::vector<double> data_;
};

namespace detail {

inline std::vector<double> resolve_weights(const MultiSeq& a, const MultiSeq& b, std::span<const double> weights) {
    if (a.channels() != b.channels())
        throw ShapeError("channel mismatch: " + std::to_string(a.channels()) + " vs " + std::to_string(b.channels()));
    if (weights.empty()) return std::vector<double>(a.channels(), 1.0);
    if (weights.size() != a.channels())
        throw ShapeError("expected " + std::to_string(a.channels()) + " channel weights, got " + std::to_string(weights.size()));
    for (double w : weights)
        if (!(w > 0.0)) throw ShapeError("channel weights must be positive");
    return {weights.begin(), weights.end()};
}

inline double point_cost(const MultiSeq& a, std::size_t i, const MultiSeq& b, std::size_t j, const std::vector<double>& w) {
    double c = 0.0;
    for (std::size_t ch = 0; ch < w.size(); ++ch) {
        const double d = a.at(i, ch) - b.at(j, ch);
        c += w[ch] * d * d;
    }
    return c;
}

}  // namespace detail

/// Dependent DTW: the per-point cost combines all channels as a weighted squared
/// Euclidean distance; steps (1,0), (0,1), (1,1); no window. Returns the
/// accumulated cost without a square root. Empty `weights` means all ones.
inline double dtw_distance(const MultiSeq& a, const MultiSeq& b, std::span<const double> weights = {}) {
    const auto w = detail::resolve_weights(a, b, weights);
    const std::size_t n = a.length();
    const std::size_t m = b.length();
    if (n == 0 || m == 0) throw ShapeError("DTW of an empty sequence");
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= m; ++j)
            cur[j] = detail::point_cost(a, i - 1, b, j - 1, w) + std::min({prev[j - 1], prev[j], cur[j - 1]});
        std::swap(prev, cur);
    }
    return prev[m];
}

struct DtwAlignment {
    double cost = 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> path;  // 0-based (i in a, j in b), start to end
};

/// DTW with the optimal warping path. Backtracking prefers the diagonal, then
/// advancing `a`, then advancing `b`.
inline DtwAlignment dtw_align(const MultiSeq& a, const MultiSeq& b, std::span<const double> weights = {}) {
    const auto w = detail::resolve_weights(a, b, weights);
    const std::size_t n = a.length();
    const std::size_t m = b.length();
    if (n == 0 || m == 0) throw ShapeError("DTW of an empty sequence");
    constexpr double inf = std::numeric_limits<double>::infinity();
    const std::size_t stride = m + 1;
    std::vector<double> acc((n + 1) * stride, inf);
    acc[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j)
            acc[i * stride + j] = detail::point_cost(a, i - 1, b, j - 1, w) +
                                  std::min({acc[(i - 1) * stride + j - 1], acc[(i - 1) * stride + j], acc[i * stride + j - 1]});

    DtwAlignment out;
    out.cost = acc[n * stride + m];
    std::size_t i = n, j = m;
    while (true) {
        out.path.emplace_back(i - 1, j - 1);
        if (i == 1 && j == 1) break;
        const double diag = acc[(i - 1) * stride + j - 1];
        const double up = acc[(i - 1) * stride + j];
        const double left = acc[i * stride + j - 1];
        if (diag <= up && diag <= left) {
            --i;
            --j;
        } else if (up <= left) {
            --i;
        } else {
            --j;
        }
    }
    std::reverse(out.path.begin(), out.path.end());
    return out;
}

struct DbaResult {
    MultiSeq centroid;
    /// Sum of DTW costs from the members to the centroid: entry 0 for the
    /// initial sequence, then one entry per refinement iteration.
    std::vector<double> cost_trace;
    std::size_t iterations = 0;
};

/// DTW barycenter averaging. Each iteration aligns every member to the current
/// centroid and replaces each centroid point by the per-channel mean of the
/// member points aligned to it. The centroid length stays equal to init's.
/// Stops when the cost sum decreases by less than `tol` or after `max_iter`
/// iterations; a refinement that would raise the cost is rejected.
inline DbaResult dba_centroid(std::span<const MultiSeq> members, const MultiSeq& init, std::size_t max_iter = 10,
                              double tol = 1e-9, std::span<const double> weights = {}) {
    if (members.empty()) throw ClusterError("DBA needs at least one member");
    for (const auto& m : members)
        if (m.channels() != init.channels()) throw ShapeError("DBA member channel count differs from init");
    if (init.length() == 0) throw ShapeError("DBA init is empty");

    const std::size_t len = init.length();
    const std::size_t ch = init.channels();
    auto align_all = [&](const MultiSeq& centroid, std::vector<DtwAlignment>& out) {
        out.resize(members.size());
        double total = 0.0;
        for (std::size_t k = 0; k < members.size(); ++k) {
            out[k] = dtw_align(centroid, members[k], weights);
            total += out[k].cost;
        }
        return total;
    };

    DbaResult res;
    res.centroid = init;
    std::vector<DtwAlignment> paths;
    double cost = align_all(res.centroid, paths);
    res.cost_trace.push_back(cost);

    std::vector<DtwAlignment> next_paths;
    for (std::size_t it = 0; it < max_iter; ++it) {
        std::vector<double> sums(len * ch, 0.0);
        std::vector<std::size_t> counts(len, 0);
        for (std::size_t k = 0; k < members.size(); ++k)
            for (auto [ci, mj] : paths[k].path) {
                for (std::size_t c = 0; c < ch; ++c) sums[ci * ch + c] += members[k].at(mj, c);
                ++counts[ci];
            }
        for (std::size_t i = 0; i < len; ++i)
            for (std::size_t c = 0; c < ch; ++c) sums[i * ch + c] /= static_cast<double>(counts[i]);
        MultiSeq candidate(ch, std::move(sums));
        const double new_cost = align_all(candidate, next_paths);
        res.cost_trace.push_back(new_cost);
        res.iterations = it + 1;
        if (new_cost > cost) break;
        res.centroid = std::move(candidate);
        std::swap(paths, next_paths);
        const double improvement = cost - new_cost;
        cost = new_cost;
        if (improvement < tol) break;
    }
    return res;
}

/// Symmetric pairwise distance matrix with a zero diagonal.
class DistanceMatrix {
public:
    explicit DistanceMatrix(std::size_t n = 0) : n_(n), d_(n * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
    void set(std::size_t i, std::size_t j, double v) {
        d_[i * n_ + j] = v;
        d_[j * n_ + i] = v;
    }

    void write_csv(std::ostream& os) const {
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) os << (j ? "," : "") << (*this)(i, j);
            os << '\n';
        }
    }

private:
    std::size_t n_;
    std::vector<double> d_;
};

/// Pairwise DTW distances; each pair is computed into its own slot.
inline DistanceMatrix pairwise_dtw(std::span<const MultiSeq> items, std::span<const double> weights = {}) {
    DistanceMatrix dm(items.size());
    parallel_for(items.size(), [&](std::size_t i) {
        for (std::size_t j = i + 1; j < items.size(); ++j) dm.set(i, j, dtw_distance(items[i], items[j], weights));
    });
    return dm;
}

/// Mean silhouette over a precomputed distance matrix. Items in singleton
/// clusters score 0, items whose a and b are both 0 score 0, and a single
/// cluster yields 0.
inline double silhouette(const DistanceMatrix& dm, std::span<const int> assignments) {
    const std::size_t n = dm.size();
    if (assignments.size() != n) throw ShapeError("assignment count does not match item count");
    if (n < 2) throw ShapeError("silhouette needs at least 2 items");
    std::map<int, std::size_t> sizes;
    for (int a : assignments) ++sizes[a];
    if (sizes.size() < 2) return 0.0;

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int own = assignments[i];
        if (sizes[own] == 1) continue;
        std::map<int, double> sum;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sum[assignments[j]] += dm(i, j);
        const double a = sum[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [cl, s] : sum)
            if (cl != own) b = std::min(b, s / static_cast<double>(sizes[cl]));
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

/// Silhouette score of a clustering under DTW distance.
inline double silhouette_dtw(std::span<const MultiSeq> items, std::span<const int> assignments,
                             std::span<const double> weights = {}) {
    if (items.size() != assignments.size()) throw ShapeError("assignment count does not match item count");
    return silhouette(pairwise_dtw(items, weights), assignments);
}

}  // namespace implet
