#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "implet/error.hpp"
#include "implet/rng.hpp"

namespace implet {

/// A univariate sample. `id` is the sample's index in the dataset it was loaded from
/// and survives splitting, so reports can always refer back to the source row.
struct TimeSeries {
    std::vector<double> values;
    std::size_t id = 0;

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

struct LabeledDataset {
    std::vector<TimeSeries> samples;
    std::vector<int> labels;  // dense, 0-based
    int n_classes = 0;
    // Original label value of each dense class index (ascending).
    std::vector<double> class_values;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    std::size_t length() const noexcept { return samples.empty() ? 0 : samples.front().size(); }

    /// Finds the position of the sample with the given id, or size() if absent.
    std::size_t find(std::size_t id) const noexcept {
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (samples[i].id == id) return i;
        return samples.size();
    }
};

/// Throws ShapeError/FormatError if the dataset breaks its invariants.
inline void validate(const LabeledDataset& ds) {
    if (ds.samples.size() != ds.labels.size())
        throw ShapeError("dataset has " + std::to_string(ds.samples.size()) + " samples but " +
                         std::to_string(ds.labels.size()) + " labels");
    const std::size_t T = ds.length();
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        if (s.size() == 0) throw ShapeError("sample " + std::to_string(i) + " is empty");
        if (s.size() != T) throw ShapeError("sample " + std::to_string(i) + " has length " +
                                            std::to_string(s.size()) + ", expected " + std::to_string(T));
        for (double v : s.values)
            if (!std::isfinite(v)) throw FormatError("non-finite value in sample " + std::to_string(i));
        if (ds.labels[i] < 0 || ds.labels[i] >= ds.n_classes)
            throw ShapeError("label " + std::to_string(ds.labels[i]) + " out of range");
    }
}

inline double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Population standard deviation.
inline double stddev_of(std::span<const double> v, double mean) {
    if (v.empty()) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

/// Z-normalizes attribution scores with the population standard deviation.
/// A constant input maps to all zeros.
inline std::vector<double> znormalize_attribution(std::span<const double> raw) {
    std::vector<double> out(raw.size(), 0.0);
    if (raw.empty()) return out;
    const bool constant = std::all_of(raw.begin(), raw.end(), [&](double v) { return v == raw.front(); });
    if (constant) return out;
    const double mu = mean_of(raw);
    const double sd = stddev_of(raw, mu);
    if (sd == 0.0 || !std::isfinite(sd)) return out;
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - mu) / sd;
    return out;
}

/// Signed per-timestep attribution of one (sample, class) pair.
struct AttributionSeries {
    std::size_t sample_id = 0;
    int class_id = 0;
    std::vector<double> raw;
    std::vector<double> normalized;

    AttributionSeries() = default;
    AttributionSeries(std::size_t sample, int cls, std::vector<double> raw_scores)
        : sample_id(sample), class_id(cls), raw(std::move(raw_scores)), normalized(znormalize_attribution(raw)) {}
};

/// Builds a dataset from the rows at the given positions, keeping ids and metadata.
inline LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> positions) {
    LabeledDataset out;
    out.n_classes = ds.n_classes;
    out.class_values = ds.class_values;
    out.samples.reserve(positions.size());
    out.labels.reserve(positions.size());
    for (auto p : positions) {
        out.samples.push_back(ds.samples.at(p));
        out.labels.push_back(ds.labels.at(p));
    }
    return out;
}

/// Stratified, seeded split into two halves of sizes floor(n/2) and ceil(n/2).
/// Per-class counts differ by at most one between halves; order within each
/// half follows the input order.
inline std::pair<LabeledDataset, LabeledDataset> split_half(const LabeledDataset& ds, std::uint64_t seed) {
    if (ds.size() < 2) throw SplitError("split_half needs at least 2 samples, got " + std::to_string(ds.size()));
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(std::max(ds.n_classes, 0)));
    for (std::size_t i = 0; i < ds.size(); ++i) by_class.at(static_cast<std::size_t>(ds.labels[i])).push_back(i);

    std::vector<std::size_t> first, second;
    bool extra_to_second = true;
    for (auto& members : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        std::size_t take = members.size() / 2;
        if (members.size() % 2 == 1) {
            if (!extra_to_second) ++take;
            extra_to_second = !extra_to_second;
        }
        first.insert(first.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
        second.insert(second.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
    }
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return {subset(ds, first), subset(ds, second)};
}

}  // namespace implet
