#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "implet/core.hpp"
#include "implet/error.hpp"

namespace implet {

enum class ScoringMode {
    sum,   // sum |w_i| + lambda * len
    mean,  // mean |w_i| + lambda * len
};

inline std::string to_string(ScoringMode m) { return m == ScoringMode::sum ? "sum" : "mean"; }

inline ScoringMode parse_scoring_mode(const std::string& s) {
    if (s == "sum") return ScoringMode::sum;
    if (s == "mean") return ScoringMode::mean;
    throw ConfigError("unknown scoring mode '" + s + "'");
}

struct ImpletParams {
    double lambda = 0.1;
    double phi = 1.0;
    std::size_t len_min = 3;
    std::optional<std::size_t> len_max;  // unset: floor(T/2)
    ScoringMode scoring = ScoringMode::sum;

    std::size_t resolved_len_max(std::size_t T) const { return len_max.value_or(T / 2); }

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be a finite value >= 0");
        if (!std::isfinite(phi)) throw ConfigError("phi must be finite");
        if (len_min < 1) throw ConfigError("len_min must be >= 1");
        if (len_max && *len_max < len_min) throw ConfigError("len_max must be >= len_min");
    }
};

/// A high-attribution subsequence. `l` and `r` are 1-based and inclusive.
struct Implet {
    std::size_t sample_id = 0;
    int class_id = 0;
    std::size_t l = 0;
    std::size_t r = 0;
    std::vector<double> values;
    std::vector<double> attributions;  // normalized
    double score = 0.0;

    std::size_t length() const noexcept { return r - l + 1; }
    bool operator==(const Implet&) const = default;
};

namespace detail {
inline double compose_score(double abs_sum, std::size_t len, double lambda, ScoringMode mode) {
    const auto n = static_cast<double>(len);
    return mode == ScoringMode::sum ? abs_sum + lambda * n : abs_sum / n + lambda * n;
}
}  // namespace detail

/// Score of the subsequence [l, r] (1-based, inclusive) of the normalized attributions.
inline double implet_score(std::size_t l, std::size_t r, std::span<const double> w, double lambda,
                           ScoringMode mode = ScoringMode::sum) {
    if (l < 1 || l > r || r > w.size())
        throw IndexError("implet range [" + std::to_string(l) + ", " + std::to_string(r) + "] outside [1, " +
                         std::to_string(w.size()) + "]");
    double s = 0.0;
    for (std::size_t i = l; i <= r; ++i) s += std::abs(w[i - 1]);
    return detail::compose_score(s, r - l + 1, lambda, mode);
}

namespace detail {

inline Implet make_implet(const TimeSeries& x, const AttributionSeries& w, std::size_t l, std::size_t r, double score) {
    Implet im;
    im.sample_id = x.id;
    im.class_id = w.class_id;
    im.l = l;
    im.r = r;
    im.values.assign(x.values.begin() + static_cast<std::ptrdiff_t>(l - 1), x.values.begin() + static_cast<std::ptrdiff_t>(r));
    im.attributions.assign(w.normalized.begin() + static_cast<std::ptrdiff_t>(l - 1),
                           w.normalized.begin() + static_cast<std::ptrdiff_t>(r));
    im.score = score;
    return im;
}

inline void check_inputs(const TimeSeries& x, const AttributionSeries& w, const ImpletParams& params) {
    params.validate();
    if (w.normalized.size() != x.size())
        throw ShapeError("attribution length " + std::to_string(w.normalized.size()) + " does not match series length " +
                         std::to_string(x.size()));
}

}  // namespace detail

/// Greedy left-to-right implet extraction. A start is eligible when its signed
/// normalized attribution reaches phi; the end maximizes the score over the
/// allowed lengths (ties to the shortest). Emitted implets never overlap and
/// the scan resumes after each one.
///
/// The running absolute sum is accumulated in the same order as implet_score,
/// so scores are bit-identical to re-scoring the emitted range. In sum mode
/// every eligible start emits, which keeps the scan linear in T.
inline std::vector<Implet> extract_implets(const TimeSeries& x, const AttributionSeries& w, const ImpletParams& params) {
    detail::check_inputs(x, w, params);
    const std::size_t T = x.size();
    const std::size_t len_min = params.len_min;
    const std::size_t len_max = params.resolved_len_max(T);
    std::vector<Implet> out;
    if (T < len_min || len_max < len_min) return out;

    const auto& nw = w.normalized;
    const std::size_t last_start = T - len_min + 1;
    std::size_t i = 1;
    while (i <= last_start) {
        if (!(nw[i - 1] >= params.phi)) {
            ++i;
            continue;
        }
        const std::size_t j_min = i + len_min - 1;
        const std::size_t j_max = std::min(i + len_max - 1, T);
        double running = 0.0;
        double best = 0.0;
        std::size_t best_j = 0;
        for (std::size_t j = i; j <= j_max; ++j) {
            running += std::abs(nw[j - 1]);
            if (j < j_min) continue;
            const double s = detail::compose_score(running, j - i + 1, params.lambda, params.scoring);
            if (best_j == 0 || s > best) {
                best = s;
                best_j = j;
            }
        }
        if (best >= params.phi) {
            out.push_back(detail::make_implet(x, w, i, best_j, best));
            i = best_j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

/// Reference transliteration of the greedy extraction: every candidate end is
/// scored from scratch with implet_score. Quadratic per start; for testing.
inline std::vector<Implet> brute_force_extract(const TimeSeries& x, const AttributionSeries& w, const ImpletParams& params) {
    detail::check_inputs(x, w, params);
    const std::size_t T = x.size();
    const std::size_t len_max = params.resolved_len_max(T);
    std::vector<Implet> implets;
    if (T < params.len_min || len_max < params.len_min) return implets;

    std::size_t i = 1;
    do {
        if (w.normalized[i - 1] >= params.phi) {
            const std::size_t j_min = i + params.len_min - 1;
            const std::size_t j_max = std::min(i + len_max - 1, T);
            std::size_t j_star = j_min;
            for (std::size_t j = j_min + 1; j <= j_max; ++j)
                if (implet_score(i, j, w.normalized, params.lambda, params.scoring) >
                    implet_score(i, j_star, w.normalized, params.lambda, params.scoring))
                    j_star = j;
            const double s = implet_score(i, j_star, w.normalized, params.lambda, params.scoring);
            if (s >= params.phi) {
                implets.push_back(detail::make_implet(x, w, i, j_star, s));
                i = j_star + 1;
            } else {
                i = i + 1;
            }
        } else {
            i = i + 1;
        }
    } while (!(i > T - params.len_min + 1));
    return implets;
}

/// Extracts implets for every sample that has an attribution. Result is indexed
/// by sample position in `ds`; samples without an attribution get an empty list.
inline std::vector<std::vector<Implet>> extract_dataset(const LabeledDataset& ds, const std::vector<AttributionSeries>& attrs,
                                                        const ImpletParams& params) {
    std::vector<std::vector<Implet>> out(ds.size());
    for (const auto& a : attrs) {
        const auto pos = ds.find(a.sample_id);
        if (pos == ds.size()) throw ReferenceError("attribution references unknown sample " + std::to_string(a.sample_id));
        auto found = extract_implets(ds.samples[pos], a, params);
        out[pos].insert(out[pos].end(), std::make_move_iterator(found.begin()), std::make_move_iterator(found.end()));
    }
    return out;
}

inline nlohmann::json params_to_json(const ImpletParams& p) {
    return {{"lambda", p.lambda},
            {"phi", p.phi},
            {"len_min", p.len_min},
            {"len_max", p.len_max ? nlohmann::json(*p.len_max) : nlohmann::json(nullptr)},
            {"scoring", to_string(p.scoring)}};
}

inline ImpletParams params_from_json(const nlohmann::json& j) {
    ImpletParams p;
    p.lambda = j.at("lambda").get<double>();
    p.phi = j.at("phi").get<double>();
    p.len_min = j.at("len_min").get<std::size_t>();
    if (j.contains("len_max") && !j.at("len_max").is_null()) p.len_max = j.at("len_max").get<std::size_t>();
    p.scoring = parse_scoring_mode(j.at("scoring").get<std::string>());
    return p;
}

/// Implet file entry; l and r are 1-based inclusive.
inline nlohmann::json implet_to_json(const Implet& im) {
    return {{"sample_id", im.sample_id}, {"class_id", im.class_id}, {"l", im.l},         {"r", im.r},
            {"values", im.values},       {"attributions", im.attributions}, {"score", im.score}};
}

inline Implet implet_from_json(const nlohmann::json& j) {
    Implet im;
    im.sample_id = j.at("sample_id").get<std::size_t>();
    im.class_id = j.at("class_id").get<int>();
    im.l = j.at("l").get<std::size_t>();
    im.r = j.at("r").get<std::size_t>();
    im.values = j.at("values").get<std::vector<double>>();
    im.attributions = j.at("attributions").get<std::vector<double>>();
    im.score = j.at("score").get<double>();
    if (im.l < 1 || im.r < im.l || im.values.size() != im.length() || im.attributions.size() != im.length())
        throw FormatError("inconsistent implet record for sample " + std::to_string(im.sample_id));
    return im;
}

}  // namespace implet
