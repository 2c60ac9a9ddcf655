#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace implet;
using namespace testing_support;

namespace {

Implet make_implet(std::size_t sample, int cls, std::size_t l, std::vector<double> values, std::vector<double> attrs) {
    Implet im;
    im.sample_id = sample;
    im.class_id = cls;
    im.l = l;
    im.r = l + values.size() - 1;
    im.values = std::move(values);
    im.attributions = std::move(attrs);
    im.score = 1.0;
    return im;
}

}  // namespace

TEST(Cohort, SingleImplet) {
    const auto im = make_implet(0, 1, 2, {1, 2, 3}, {0.5, 1.5, 1.0});
    const std::vector<Implet> one{im};
    const auto res = cluster_implets(one);
    EXPECT_EQ(res.k_star, 1u);
    EXPECT_EQ(res.silhouette, 0.0);
    ASSERT_EQ(res.centroids.size(), 1u);
    EXPECT_EQ(res.centroids[0], implet_sequence(im));
    EXPECT_EQ(res.assignments, (std::vector<int>{0}));
}

TEST(Cohort, RecoversTwoMotifs) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::vector<int> truth;
        const auto implets = two_motif_implets(10, seed + 100, &truth);
        ClusterParams p;
        p.seed = seed;
        const auto res = cluster_implets(implets, p);
        EXPECT_EQ(res.k_star, 2u) << "seed " << seed;
        EXPECT_EQ(purity(res.assignments, truth), 1.0) << "seed " << seed;
        EXPECT_GT(res.silhouette, 0.9);
    }
}

TEST(Cohort, Deterministic) {
    const auto implets = two_motif_implets(8, 3);
    ClusterParams p;
    p.seed = 17;
    const auto a = cluster_implets(implets, p);
    set_max_threads(1);
    const auto b = cluster_implets(implets, p);
    set_max_threads(0);
    EXPECT_EQ(cohort_to_json(a).dump(), cohort_to_json(b).dump());
}

TEST(Cohort, InputOrderDoesNotMatter) {
    auto implets = two_motif_implets(6, 4);
    const auto a = cluster_implets(implets);
    std::vector<Implet> reversed(implets.rbegin(), implets.rend());
    const auto b = cluster_implets(reversed);
    EXPECT_EQ(a.k_star, b.k_star);
    EXPECT_EQ(a.silhouette, b.silhouette);
    for (std::size_t i = 0; i < implets.size(); ++i)
        EXPECT_EQ(a.assignments[i], b.assignments[implets.size() - 1 - i]);
}

TEST(Cohort, AssignmentsPointToNearestCentroid) {
    std::mt19937_64 rng(12);
    std::vector<Implet> implets;
    for (std::size_t k = 0; k < 25; ++k) {
        const std::size_t len = 4 + k % 5;
        implets.push_back(make_implet(k, 0, 1, random_vector(rng, len, -2, 2), random_vector(rng, len, -1, 1)));
    }
    ClusterParams p;
    p.k_max = 4;
    const auto res = cluster_implets(implets, p);
    const auto& best_run = *std::find_if(res.trace.begin(), res.trace.end(),
                                         [&](const ClusterRun& r) { return r.silhouette == res.silhouette; });
    if (!best_run.converged) GTEST_SKIP() << "best run stopped at the iteration cap";
    for (std::size_t i = 0; i < implets.size(); ++i) {
        const auto s = implet_sequence(implets[i]);
        const double own = dtw_distance(s, res.centroids[static_cast<std::size_t>(res.assignments[i])], p.weights);
        for (const auto& c : res.centroids) EXPECT_LE(own, dtw_distance(s, c, p.weights) + 1e-12);
    }
}

TEST(Cohort, TraceCoversEveryRun) {
    const auto implets = two_motif_implets(3, 9);
    ClusterParams p;
    p.k_max = 10;
    p.repeats = 2;
    const auto res = cluster_implets(implets, p);
    EXPECT_EQ(res.trace.size(), 6u * 2u);
    for (const auto& r : res.trace) EXPECT_LE(r.clusters, r.k);
}

TEST(Cohort, Errors) {
    EXPECT_THROW(cluster_implets(std::vector<Implet>{}), ClusterError);
    const std::vector<Implet> mixed{make_implet(0, 0, 1, {1, 2, 3}, {1, 1, 1}), make_implet(1, 1, 1, {1, 2, 3}, {1, 1, 1})};
    EXPECT_THROW(cluster_implets(mixed), ClusterError);
    ClusterParams bad;
    bad.k_max = 0;
    EXPECT_THROW(cluster_implets(std::vector<Implet>{mixed[0]}, bad), ConfigError);
}

TEST(Cohort, ClusterByClassOrdersByClass) {
    auto implets = two_motif_implets(4, 1);
    for (std::size_t i = 0; i < 3; ++i) implets.push_back(make_implet(100 + i, 0, 1, {0, 0, 0}, {1, 1, 1}));
    const auto res = cluster_by_class(implets);
    ASSERT_EQ(res.size(), 2u);
    EXPECT_EQ(res[0].class_id, 0);
    EXPECT_EQ(res[1].class_id, 1);
    EXPECT_EQ(res[0].assignments.size(), 3u);
}

TEST(Cohort, JsonRoundTrip) {
    const auto res = cluster_implets(two_motif_implets(4, 2));
    const auto back = cohort_from_json(nlohmann::json::parse(cohort_to_json(res).dump()));
    EXPECT_EQ(back.k_star, res.k_star);
    EXPECT_EQ(back.centroids, res.centroids);
    EXPECT_EQ(back.assignments, res.assignments);
    EXPECT_EQ(back.trace.size(), res.trace.size());
}

TEST(Cils, ExactCopyIsFound) {
    std::mt19937_64 rng(6);
    auto v = random_vector(rng, 40, -1, 1);
    const std::vector<double> motif{5, 6, 8, 6, 5};
    std::copy(motif.begin(), motif.end(), v.begin() + 6);
    const auto centroid = MultiSeq::bivariate(motif, std::vector<double>(5, 1.0));
    const auto m = find_cils(centroid, series(v), CilsMode::values_only);
    EXPECT_EQ(m.l, 7u);
    EXPECT_EQ(m.r, 11u);
    EXPECT_EQ(m.distance, 0.0);
}

TEST(Cils, ConstantSeriesTiesGoLeft) {
    const auto centroid = MultiSeq::univariate(std::vector<double>{0, 1, 0});
    const auto m = find_cils(centroid, series(std::vector<double>(10, 0.5)), CilsMode::values_only);
    EXPECT_EQ(m.l, 1u);
    EXPECT_GT(m.distance, 0.0);
}

TEST(Cils, MatchesExhaustiveScan) {
    std::mt19937_64 rng(15);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t T = 30, len = 3 + rep % 6;
        const auto x = series(random_vector(rng, T, -2, 2));
        const AttributionSeries attr(0, 0, random_vector(rng, T, -1, 1));
        const auto centroid = random_multiseq(rng, 2, len);
        for (auto mode : {CilsMode::values_only, CilsMode::values_and_attr}) {
            double best = 1e300;
            std::size_t best_l = 0;
            for (std::size_t l = 1; l + len - 1 <= T; ++l) {
                std::vector<double> data;
                for (std::size_t t = l - 1; t < l - 1 + len; ++t) {
                    data.push_back(x.values[t]);
                    if (mode == CilsMode::values_and_attr) data.push_back(attr.normalized[t]);
                }
                const MultiSeq window(mode == CilsMode::values_only ? 1 : 2, data);
                const MultiSeq q = mode == CilsMode::values_only ? centroid.project(0) : centroid;
                const double d = dtw_oracle(q, window);
                if (d < best) {
                    best = d;
                    best_l = l;
                }
            }
            const auto m = find_cils(centroid, x, mode, &attr);
            EXPECT_NEAR(m.distance, best, 1e-9);
            EXPECT_EQ(m.l, best_l);
        }
    }
}

TEST(Cils, Errors) {
    const auto centroid = MultiSeq::bivariate(std::vector<double>{1, 2, 3}, std::vector<double>{1, 1, 1});
    EXPECT_THROW(find_cils(centroid, series({1, 2}), CilsMode::values_only), ShapeError);
    EXPECT_THROW(find_cils(centroid, series({1, 2, 3, 4}), CilsMode::values_and_attr), ConfigError);
}
