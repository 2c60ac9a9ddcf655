#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "implet/attribution.hpp"
#include "implet/cohort.hpp"
#include "implet/core.hpp"
#include "implet/error.hpp"
#include "implet/extraction.hpp"
#include "implet/models.hpp"
#include "implet/removal.hpp"
#include "implet/rng.hpp"

namespace implet {

/// What accuracy is measured against after perturbation.
enum class EvalTarget { ground_truth, prediction };

inline std::string to_string(EvalTarget t) { return t == EvalTarget::ground_truth ? "ground_truth" : "prediction"; }

struct FaithfulnessOptions {
    std::string explainer_name = "implet";
    RemovalSpec removal;
    std::size_t random_trials = 10;
    EvalTarget target = EvalTarget::ground_truth;
};

struct FaithfulnessReport {
    std::string explainer_name;
    RemovalSpec removal;
    EvalTarget target = EvalTarget::ground_truth;
    double acc_clean = 0.0;
    double acc_identified = 0.0;
    double acc_random = 0.0;
    double drop_identified = 0.0;
    double drop_random = 0.0;
    double delta = 0.0;
    std::size_t n_segments_removed = 0;
    std::size_t random_trials = 0;
    std::size_t n_samples = 0;
    std::size_t n_evaluations = 0;         // size of the evaluated sample multiset
    std::size_t n_zero_segment_samples = 0;  // evaluated unperturbed
    std::size_t n_overlap_flagged = 0;       // multi-mode random draws that had to overlap
};

/// Segments (1-based intervals) to remove, indexed by sample position.
using SegmentLists = std::vector<std::vector<Interval>>;

/// Converts per-sample implet lists to segment lists, checking that each implet
/// refers to the sample at its position and fits inside it.
inline SegmentLists implet_segments(const LabeledDataset& ds, const std::vector<std::vector<Implet>>& implets) {
    if (implets.size() != ds.size())
        throw ReferenceError("implet lists cover " + std::to_string(implets.size()) + " samples, dataset has " +
                             std::to_string(ds.size()));
    SegmentLists out(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (const auto& im : implets[i]) {
            if (im.sample_id != ds.samples[i].id)
                throw ReferenceError("implet for sample " + std::to_string(im.sample_id) + " listed under sample " +
                                     std::to_string(ds.samples[i].id));
            if (im.l < 1 || im.r < im.l || im.r > ds.samples[i].size())
                throw ReferenceError("implet [" + std::to_string(im.l) + ", " + std::to_string(im.r) +
                                     "] does not fit sample " + std::to_string(im.sample_id));
            out[i].push_back({im.l, im.r});
        }
    return out;
}

/// Groups a flat implet list by sample position; unknown sample ids raise ReferenceError.
inline std::vector<std::vector<Implet>> group_by_sample(const LabeledDataset& ds, std::span<const Implet> implets) {
    std::vector<std::vector<Implet>> out(ds.size());
    for (const auto& im : implets) {
        const auto pos = ds.find(im.sample_id);
        if (pos == ds.size()) throw ReferenceError("implet references unknown sample " + std::to_string(im.sample_id));
        out[pos].push_back(im);
    }
    return out;
}

namespace detail {

inline TimeSeries remove_all(const TimeSeries& x, std::vector<Interval> segs, RemovalKind kind, std::uint64_t seed,
                             std::uint64_t stream, std::size_t sample) {
    std::sort(segs.begin(), segs.end(), [](const Interval& a, const Interval& b) { return a.l < b.l; });
    TimeSeries out = x;
    for (std::size_t k = 0; k < segs.size(); ++k)
        out = apply_removal(out, segs[k], kind, derive_seed(seed, {stream, sample, k}), x);
    return out;
}

inline std::size_t count_hits(const std::vector<int>& pred, const std::vector<int>& target) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == target[i];
    return hit;
}

}  // namespace detail

/// Identified-versus-random ablation. Single mode builds one perturbed copy per
/// (sample, segment); samples without segments are evaluated unperturbed.
/// Multi mode removes all of a sample's segments in one copy. The random
/// baseline removes length-matched random intervals, averaged over
/// `random_trials` seeded trials. Drops are relative to the clean accuracy on
/// the same sample multiset.
inline FaithfulnessReport faithfulness_eval_segments(const Model& model, const LabeledDataset& ds, const SegmentLists& segments,
                                                     const FaithfulnessOptions& opt) {
    if (ds.empty()) throw EvalError("faithfulness evaluation needs a non-empty dataset");
    if (segments.size() != ds.size()) throw ReferenceError("segment lists do not match dataset size");
    if (opt.random_trials < 1) throw ConfigError("random_trials must be >= 1");
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (const auto& iv : segments[i])
            if (iv.l < 1 || iv.r < iv.l || iv.r > ds.samples[i].size())
                throw ReferenceError("segment outside sample " + std::to_string(ds.samples[i].id));

    const std::uint64_t seed = opt.removal.seed;
    const RemovalKind kind = opt.removal.kind;
    const auto clean_pred = model.predict(ds.samples);
    const std::vector<int>& truth = opt.target == EvalTarget::ground_truth ? ds.labels : clean_pred;

    FaithfulnessReport rep;
    rep.explainer_name = opt.explainer_name;
    rep.removal = opt.removal;
    rep.target = opt.target;
    rep.random_trials = opt.random_trials;
    rep.n_samples = ds.size();

    // Evaluated multiset: owner sample of every perturbed copy.
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::size_t copies = opt.removal.multi ? 1 : std::max<std::size_t>(segments[i].size(), 1);
        if (segments[i].empty()) ++rep.n_zero_segment_samples;
        rep.n_segments_removed += segments[i].size();
        owner.insert(owner.end(), copies, i);
    }
    rep.n_evaluations = owner.size();
    std::vector<int> target(owner.size());
    std::vector<int> clean(owner.size());
    for (std::size_t e = 0; e < owner.size(); ++e) {
        target[e] = truth[owner[e]];
        clean[e] = clean_pred[owner[e]];
    }
    const double n_eval = static_cast<double>(owner.size());
    rep.acc_clean = static_cast<double>(detail::count_hits(clean, target)) / n_eval;

    auto hits = [&](const std::vector<TimeSeries>& batch) { return detail::count_hits(model.predict(batch), target); };

    // Identified removal.
    {
        std::vector<TimeSeries> batch;
        batch.reserve(owner.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto& x = ds.samples[i];
            if (segments[i].empty()) {
                batch.push_back(x);
            } else if (opt.removal.multi) {
                batch.push_back(detail::remove_all(x, segments[i], kind, seed, 0, i));
            } else {
                for (std::size_t k = 0; k < segments[i].size(); ++k)
                    batch.push_back(apply_removal(x, segments[i][k], kind, derive_seed(seed, {0, i, k}), x));
            }
        }
        rep.acc_identified = static_cast<double>(hits(batch)) / n_eval;
    }

    // Length-matched random baseline.
    std::size_t random_hits = 0;
    for (std::size_t trial = 0; trial < opt.random_trials; ++trial) {
        std::vector<TimeSeries> batch;
        batch.reserve(owner.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto& x = ds.samples[i];
            const std::size_t T = x.size();
            if (segments[i].empty()) {
                batch.push_back(x);
            } else if (opt.removal.multi) {
                std::vector<Interval> drawn;
                bool disjoint = false;
                for (std::size_t attempt = 0; attempt < 100 && !disjoint; ++attempt) {
                    drawn.clear();
                    for (std::size_t k = 0; k < segments[i].size(); ++k)
                        drawn.push_back(random_interval(T, segments[i][k].length(), derive_seed(seed, {1, trial, i, attempt, k})));
                    disjoint = true;
                    for (std::size_t a = 0; a < drawn.size() && disjoint; ++a)
                        for (std::size_t b = a + 1; b < drawn.size(); ++b)
                            if (drawn[a].overlaps(drawn[b])) {
                                disjoint = false;
                                break;
                            }
                }
                if (!disjoint) ++rep.n_overlap_flagged;
                batch.push_back(detail::remove_all(x, drawn, kind, seed, 2 + 2 * trial, i));
            } else {
                for (std::size_t k = 0; k < segments[i].size(); ++k) {
                    const auto iv = random_interval(T, segments[i][k].length(), derive_seed(seed, {1, trial, i, k}));
                    batch.push_back(apply_removal(x, iv, kind, derive_seed(seed, {2 + 2 * trial, i, k}), x));
                }
            }
        }
        random_hits += hits(batch);
    }
    rep.acc_random = static_cast<double>(random_hits) / (n_eval * static_cast<double>(opt.random_trials));
    rep.drop_identified = rep.acc_clean - rep.acc_identified;
    rep.drop_random = rep.acc_clean - rep.acc_random;
    rep.delta = rep.drop_identified - rep.drop_random;
    return rep;
}

/// Faithfulness of per-sample implet lists (indexed by sample position).
inline FaithfulnessReport faithfulness_eval(const Model& model, const LabeledDataset& ds,
                                            const std::vector<std::vector<Implet>>& implets, const FaithfulnessOptions& opt) {
    return faithfulness_eval_segments(model, ds, implet_segments(ds, implets), opt);
}

/// For every sample, the best-matching window of each centroid of the sample's class.
/// `sample_class[i]` selects which class's cohort applies to sample i.
inline SegmentLists match_cils(const std::vector<CohortResult>& cohorts, const LabeledDataset& ds,
                               const std::vector<int>& sample_class, CilsMode mode,
                               const std::vector<const AttributionSeries*>& attrs, std::span<const double> weights = {}) {
    if (sample_class.size() != ds.size()) throw ShapeError("one class per sample is required");
    if (mode == CilsMode::values_and_attr && attrs.size() != ds.size())
        throw ShapeError("values_and_attr matching needs one attribution per sample");
    SegmentLists out(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (const auto& cohort : cohorts) {
            if (cohort.class_id != sample_class[i]) continue;
            for (const auto& centroid : cohort.centroids) {
                if (centroid.length() > ds.samples[i].size()) continue;
                const AttributionSeries* a = mode == CilsMode::values_and_attr ? attrs[i] : nullptr;
                if (mode == CilsMode::values_and_attr && a == nullptr)
                    throw ReferenceError("no attribution for sample " + std::to_string(ds.samples[i].id));
                const auto m = find_cils(centroid, ds.samples[i], mode, a, weights);
                out[i].push_back({m.l, m.r});
            }
        }
    return out;
}

struct CilsEvalResult {
    FaithfulnessReport cils;
    FaithfulnessReport implets;
    std::vector<CohortResult> cohorts;
    SegmentLists cils_segments;
};

/// Cohort faithfulness pipeline: split the data in halves; extract and cluster
/// implets on the first half; match each same-class centroid in every sample of
/// the second half; compare removing those matches against removing implets
/// extracted directly from the second half.
inline CilsEvalResult cils_eval(const Model& model, const LabeledDataset& ds, const AttributionConfig& attribution,
                                const ImpletParams& implet_params, const ClusterParams& cluster_params,
                                const FaithfulnessOptions& opt, CilsMode mode, std::uint64_t split_seed) {
    if (ds.size() < 4) throw EvalError("cohort evaluation needs at least 4 samples");
    const auto [extract_half, eval_half] = split_half(ds, split_seed);

    const auto attrs_ex = attribute_dataset(model, extract_half, attribution);
    const auto per_sample = extract_dataset(extract_half, attrs_ex, implet_params);
    std::vector<Implet> pool;
    for (const auto& v : per_sample) pool.insert(pool.end(), v.begin(), v.end());

    CilsEvalResult res;
    if (!pool.empty()) res.cohorts = cluster_by_class(pool, cluster_params);

    const auto attrs_ev = attribute_dataset(model, eval_half, attribution);
    std::vector<int> sample_class(eval_half.size());
    std::vector<const AttributionSeries*> attr_ptrs(eval_half.size());
    for (std::size_t i = 0; i < eval_half.size(); ++i) {
        sample_class[i] = attrs_ev[i].class_id;
        attr_ptrs[i] = &attrs_ev[i];
    }
    res.cils_segments = match_cils(res.cohorts, eval_half, sample_class, mode, attr_ptrs, cluster_params.weights);

    FaithfulnessOptions cils_opt = opt;
    cils_opt.explainer_name = opt.explainer_name + (mode == CilsMode::values_only ? "/cils-1d" : "/cils-2d");
    res.cils = faithfulness_eval_segments(model, eval_half, res.cils_segments, cils_opt);

    FaithfulnessOptions implet_opt = opt;
    implet_opt.explainer_name = opt.explainer_name + "/implet";
    res.implets = faithfulness_eval(model, eval_half, extract_dataset(eval_half, attrs_ev, implet_params), implet_opt);
    return res;
}

inline nlohmann::json report_to_json(const FaithfulnessReport& r) {
    return {{"explainer_name", r.explainer_name},
            {"removal", {{"kind", to_string(r.removal.kind)}, {"multi", r.removal.multi}, {"seed", r.removal.seed}}},
            {"target", to_string(r.target)},
            {"acc_clean", r.acc_clean},
            {"acc_identified", r.acc_identified},
            {"acc_random", r.acc_random},
            {"drop_identified", r.drop_identified},
            {"drop_random", r.drop_random},
            {"delta", r.delta},
            {"n_segments_removed", r.n_segments_removed},
            {"random_trials", r.random_trials},
            {"n_samples", r.n_samples},
            {"n_evaluations", r.n_evaluations},
            {"n_zero_segment_samples", r.n_zero_segment_samples},
            {"n_overlap_flagged", r.n_overlap_flagged}};
}

inline std::string removal_label(const RemovalSpec& r) { return to_string(r.kind) + (r.multi ? "+multi" : ""); }

/// Plot data: one row per report, arrow tail = drop_random, tip = drop_identified.
inline void write_plot_csv(std::ostream& os, const std::string& dataset, const std::vector<FaithfulnessReport>& reports) {
    os << "dataset,explainer,removal,drop_random,drop_identified,delta\n";
    for (const auto& r : reports) {
        os << dataset << ',' << r.explainer_name << ',' << removal_label(r.removal) << ',' << nlohmann::json(r.drop_random).dump()
           << ',' << nlohmann::json(r.drop_identified).dump() << ',' << nlohmann::json(r.delta).dump() << '\n';
    }
}

}  // namespace implet
