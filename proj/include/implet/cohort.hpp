#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "implet/core.hpp"
#include "implet/error.hpp"
#include "implet/extraction.hpp"
#include "implet/parallel.hpp"
#include "implet/rng.hpp"
#include "implet/tsdist.hpp"

namespace implet {

struct ClusterParams {
    std::size_t k_max = 8;  // effective limit is min(k_max, number of implets)
    std::size_t repeats = 5;
    std::size_t max_kmeans_iter = 50;
    std::size_t dba_iter = 10;
    std::uint64_t seed = 0;
    std::vector<double> weights{1.0, 1.0};  // (value, attribution) channel weights
    bool znormalize_values = false;         // z-normalize each implet's value channel before clustering

    void validate() const {
        if (k_max < 1) throw ConfigError("k_max must be >= 1");
        if (repeats < 1) throw ConfigError("repeats must be >= 1");
        if (max_kmeans_iter < 1) throw ConfigError("max_kmeans_iter must be >= 1");
        if (weights.size() != 2) throw ConfigError("two channel weights are required");
    }
};

struct ClusterRun {
    std::size_t k = 0;  // requested
    std::size_t q = 0;  // repeat index, 0-based
    std::size_t clusters = 0;  // non-empty clusters at convergence
    std::size_t iterations = 0;
    bool converged = false;
    double silhouette = 0.0;
};

struct CohortResult {
    int class_id = 0;
    std::size_t k_star = 0;
    std::vector<MultiSeq> centroids;  // 2-channel (value, attribution)
    std::vector<int> assignments;     // per input implet, in input order
    double silhouette = 0.0;
    std::vector<ClusterRun> trace;
};

/// The 2-channel sequence an implet contributes to clustering.
inline MultiSeq implet_sequence(const Implet& im, bool znormalize_values = false) {
    if (!znormalize_values) return MultiSeq::bivariate(im.values, im.attributions);
    return MultiSeq::bivariate(znormalize_attribution(im.values), im.attributions);
}

namespace detail {

struct KMeansOutcome {
    std::vector<MultiSeq> centroids;
    std::vector<int> assignments;
    std::size_t iterations = 0;
    bool converged = false;
};

inline KMeansOutcome kmeans_dtw(std::span<const MultiSeq> items, std::size_t k, const ClusterParams& params, Rng& rng) {
    const std::size_t n = items.size();
    // Partial Fisher-Yates over canonical indices picks k distinct seeds.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(order[i], order[pick(rng)]);
    }
    KMeansOutcome out;
    for (std::size_t c = 0; c < k; ++c) out.centroids.push_back(items[order[c]]);

    std::vector<double> dist(n, 0.0);
    auto assign = [&](std::vector<int>& a) {
        a.assign(n, 0);
        parallel_for(n, [&](std::size_t i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = dtw_distance(items[i], out.centroids[c], params.weights);
                if (d < best) {
                    best = d;
                    a[i] = static_cast<int>(c);
                }
            }
            dist[i] = best;
        });
    };

    std::vector<int> prev;
    for (std::size_t it = 0; it < params.max_kmeans_iter; ++it) {
        assign(out.assignments);
        out.iterations = it + 1;
        if (out.assignments == prev) {
            out.converged = true;
            return out;
        }
        prev = out.assignments;

        std::vector<std::vector<std::size_t>> members(k);
        for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(out.assignments[i])].push_back(i);
        std::vector<bool> used(n, false);
        parallel_for(k, [&](std::size_t c) {
            if (members[c].empty()) return;
            std::vector<MultiSeq> group;
            group.reserve(members[c].size());
            for (auto i : members[c]) group.push_back(items[i]);
            out.centroids[c] = dba_centroid(group, out.centroids[c], params.dba_iter, 1e-9, params.weights).centroid;
        });
        // Empty clusters restart from the item farthest from its centroid.
        for (std::size_t c = 0; c < k; ++c) {
            if (!members[c].empty()) continue;
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i)
                if (!used[i] && (far == n || dist[i] > dist[far])) far = i;
            if (far == n) break;
            used[far] = true;
            out.centroids[c] = items[far];
        }
    }
    // Finish on an assignment step so every item sits with its nearest centroid.
    assign(out.assignments);
    out.converged = out.assignments == prev;
    return out;
}

// Drops empty clusters and renumbers the rest in index order.
inline void compact(KMeansOutcome& run) {
    std::vector<int> remap(run.centroids.size(), -1);
    std::vector<MultiSeq> kept;
    for (int a : run.assignments) remap[static_cast<std::size_t>(a)] = 0;
    for (std::size_t c = 0; c < remap.size(); ++c)
        if (remap[c] == 0) {
            remap[c] = static_cast<int>(kept.size());
            kept.push_back(std::move(run.centroids[c]));
        }
    for (int& a : run.assignments) a = remap[static_cast<std::size_t>(a)];
    run.centroids = std::move(kept);
}

}  // namespace detail

/// Clusters same-class implets with k-means under 2-channel dependent DTW,
/// DBA centroid updates and silhouette-based selection of k. Runs for every
/// k in 1..min(k_max, n) and repeat q use an RNG seeded from (seed, k, q);
/// implets are processed in canonical (sample_id, l, r) order so the result
/// does not depend on input order. Ties on silhouette keep the smallest k, then q.
inline CohortResult cluster_implets(std::span<const Implet> implets, const ClusterParams& params = {}) {
    params.validate();
    if (implets.empty()) throw ClusterError("cannot cluster an empty implet set");
    const int cls = implets.front().class_id;
    for (const auto& im : implets)
        if (im.class_id != cls) throw ClusterError("implets of different classes must be clustered separately");

    const std::size_t n = implets.size();
    std::vector<std::size_t> canon(n);
    std::iota(canon.begin(), canon.end(), 0);
    std::stable_sort(canon.begin(), canon.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = implets[a];
        const auto& y = implets[b];
        if (x.sample_id != y.sample_id) return x.sample_id < y.sample_id;
        if (x.l != y.l) return x.l < y.l;
        return x.r < y.r;
    });
    std::vector<MultiSeq> items;
    items.reserve(n);
    for (auto i : canon) items.push_back(implet_sequence(implets[i], params.znormalize_values));

    const DistanceMatrix dm = n >= 2 ? pairwise_dtw(items, params.weights) : DistanceMatrix(n);
    const std::size_t k_hi = std::min(params.k_max, n);

    std::vector<detail::KMeansOutcome> runs(k_hi * params.repeats);
    std::vector<ClusterRun> trace(runs.size());
    parallel_for(runs.size(), [&](std::size_t idx) {
        const std::size_t k = idx / params.repeats + 1;
        const std::size_t q = idx % params.repeats;
        Rng rng(derive_seed(params.seed, {k, q}));
        auto run = detail::kmeans_dtw(items, k, params, rng);
        detail::compact(run);
        trace[idx] = {k, q, run.centroids.size(), run.iterations, run.converged,
                      n >= 2 ? silhouette(dm, run.assignments) : 0.0};
        runs[idx] = std::move(run);
    });

    std::size_t best = 0;
    for (std::size_t idx = 1; idx < runs.size(); ++idx)
        if (trace[idx].silhouette > trace[best].silhouette) best = idx;

    CohortResult res;
    res.class_id = cls;
    res.k_star = runs[best].centroids.size();
    res.centroids = std::move(runs[best].centroids);
    res.silhouette = trace[best].silhouette;
    res.assignments.assign(n, 0);
    for (std::size_t c = 0; c < n; ++c) res.assignments[canon[c]] = runs[best].assignments[c];
    res.trace = std::move(trace);
    return res;
}

/// Groups implets by class and clusters each group; result is ordered by class id.
inline std::vector<CohortResult> cluster_by_class(std::span<const Implet> implets, const ClusterParams& params = {}) {
    std::vector<int> classes;
    for (const auto& im : implets) classes.push_back(im.class_id);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    std::vector<CohortResult> out;
    for (int c : classes) {
        std::vector<Implet> group;
        for (const auto& im : implets)
            if (im.class_id == c) group.push_back(im);
        out.push_back(cluster_implets(group, params));
    }
    return out;
}

enum class CilsMode { values_only, values_and_attr };

inline std::string to_string(CilsMode m) { return m == CilsMode::values_only ? "values_only" : "values_and_attr"; }

struct CilsMatch {
    std::size_t l = 0;  // 1-based inclusive
    std::size_t r = 0;
    double distance = 0.0;
};

/// Finds the window of the centroid's length in `series` closest to the
/// centroid under DTW. values_only compares the value channel alone;
/// values_and_attr pairs the series with its normalized attribution.
/// Ties go to the leftmost window.
inline CilsMatch find_cils(const MultiSeq& centroid, const TimeSeries& series, CilsMode mode,
                           const AttributionSeries* attr = nullptr, std::span<const double> weights = {}) {
    const std::size_t len = centroid.length();
    const std::size_t T = series.size();
    if (len == 0) throw ShapeError("empty centroid");
    if (len > T) throw ShapeError("centroid length " + std::to_string(len) + " exceeds series length " + std::to_string(T));

    MultiSeq query;
    if (mode == CilsMode::values_only) {
        query = centroid.project(0);
    } else {
        if (attr == nullptr) throw ConfigError("values_and_attr matching needs an attribution");
        if (attr->normalized.size() != T) throw ShapeError("attribution length does not match series");
        if (centroid.channels() != 2) throw ShapeError("values_and_attr matching needs a 2-channel centroid");
        query = centroid;
    }
    std::vector<double> w;
    if (mode == CilsMode::values_only) {
        w = {weights.empty() ? 1.0 : weights[0]};
    } else {
        w.assign(weights.begin(), weights.end());
    }

    CilsMatch best{0, 0, std::numeric_limits<double>::infinity()};
    const std::span<const double> vals(series.values);
    for (std::size_t l = 1; l + len - 1 <= T; ++l) {
        const auto v = vals.subspan(l - 1, len);
        const MultiSeq window = mode == CilsMode::values_only
                                    ? MultiSeq::univariate(v)
                                    : MultiSeq::bivariate(v, std::span<const double>(attr->normalized).subspan(l - 1, len));
        const double d = dtw_distance(query, window, w);
        if (d < best.distance) best = {l, l + len - 1, d};
    }
    return best;
}

inline nlohmann::json multiseq_to_json(const MultiSeq& s) {
    nlohmann::json j{{"values", s.channel(0)}};
    if (s.channels() > 1) j["attributions"] = s.channel(1);
    return j;
}

inline MultiSeq multiseq_from_json(const nlohmann::json& j) {
    auto values = j.at("values").get<std::vector<double>>();
    if (!j.contains("attributions")) return MultiSeq::univariate(values);
    auto attrs = j.at("attributions").get<std::vector<double>>();
    return MultiSeq::bivariate(values, attrs);
}

inline nlohmann::json cohort_to_json(const CohortResult& c) {
    nlohmann::json centroids = nlohmann::json::array();
    for (const auto& m : c.centroids) centroids.push_back(multiseq_to_json(m));
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& t : c.trace)
        trace.push_back({{"k", t.k},
                         {"repeat", t.q},
                         {"clusters", t.clusters},
                         {"iterations", t.iterations},
                         {"converged", t.converged},
                         {"silhouette", t.silhouette}});
    return {{"class_id", c.class_id}, {"k_star", c.k_star},        {"silhouette", c.silhouette},
            {"centroids", centroids}, {"assignments", c.assignments}, {"trace", trace}};
}

inline CohortResult cohort_from_json(const nlohmann::json& j) {
    CohortResult c;
    c.class_id = j.at("class_id").get<int>();
    c.k_star = j.at("k_star").get<std::size_t>();
    c.silhouette = j.at("silhouette").get<double>();
    for (const auto& m : j.at("centroids")) c.centroids.push_back(multiseq_from_json(m));
    c.assignments = j.at("assignments").get<std::vector<int>>();
    if (j.contains("trace"))
        for (const auto& t : j.at("trace"))
            c.trace.push_back({t.at("k").get<std::size_t>(), t.at("repeat").get<std::size_t>(),
                               t.at("clusters").get<std::size_t>(), t.at("iterations").get<std::size_t>(),
                               t.at("converged").get<bool>(), t.at("silhouette").get<double>()});
    if (c.centroids.size() != c.k_star) throw FormatError("cohort k_star does not match centroid count");
    return c;
}

}  // namespace implet
