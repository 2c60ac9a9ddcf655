#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "support.hpp"

using namespace implet;
using namespace testing_support;

namespace {

// Builds an attribution whose normalized scores equal `w` exactly.
AttributionSeries normalized_attr(std::vector<double> w, std::size_t id = 0) {
    AttributionSeries a;
    a.sample_id = id;
    a.normalized = w;
    a.raw = std::move(w);
    return a;
}

ImpletParams params(std::size_t len_max, ScoringMode mode = ScoringMode::sum) {
    ImpletParams p;
    p.len_max = len_max;
    p.scoring = mode;
    return p;
}

}  // namespace

TEST(ImpletScore, Arithmetic) {
    const std::vector<double> w{0.5, -0.6, 0.4};
    EXPECT_NEAR(implet_score(1, 3, w, 0.1), 1.8, 1e-15);
    const std::vector<double> z(5, 0.0);
    EXPECT_NEAR(implet_score(1, 5, z, 0.1), 0.5, 1e-15);
    EXPECT_NEAR(implet_score(1, 3, w, 0.1, ScoringMode::mean), 0.5 + 0.3, 1e-15);
}

TEST(ImpletScore, RandomMatchesIndependentSum) {
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 200; ++rep) {
        const auto w = random_vector(rng, 40, -3, 3);
        std::uniform_int_distribution<std::size_t> pick(1, 40);
        std::size_t l = pick(rng), r = pick(rng);
        if (l > r) std::swap(l, r);
        double s = 0;
        for (std::size_t t = l; t <= r; ++t) s += std::fabs(w[t - 1]);
        EXPECT_NEAR(implet_score(l, r, w, 0.1), s + 0.1 * static_cast<double>(r - l + 1), 1e-12);
    }
}

TEST(ImpletScore, RangeErrors) {
    const std::vector<double> w(5, 1.0);
    EXPECT_THROW(implet_score(0, 2, w, 0.1), IndexError);
    EXPECT_THROW(implet_score(3, 2, w, 0.1), IndexError);
    EXPECT_THROW(implet_score(2, 6, w, 0.1), IndexError);
}

TEST(Extract, ZeroAttributionYieldsNothing) {
    const auto x = series(std::vector<double>(10, 1.0));
    const auto w = normalized_attr(std::vector<double>(10, 0.0));
    EXPECT_TRUE(extract_implets(x, w, params(5)).empty());
    EXPECT_TRUE(brute_force_extract(x, w, params(5)).empty());
}

TEST(Extract, SingleSpike) {
    std::vector<double> wv(20, 0.0);
    wv[4] = 2.0;
    std::vector<double> xv(20);
    for (std::size_t t = 0; t < 20; ++t) xv[t] = static_cast<double>(t);
    const auto x = series(xv, 3);
    const auto w = normalized_attr(wv, 3);
    for (const auto& out : {extract_implets(x, w, params(10)), brute_force_extract(x, w, params(10))}) {
        ASSERT_EQ(out.size(), 1u);
        EXPECT_EQ(out[0].l, 5u);
        EXPECT_EQ(out[0].r, 14u);
        EXPECT_EQ(out[0].score, 3.0);
        EXPECT_EQ(out[0].sample_id, 3u);
        EXPECT_EQ(out[0].values, std::vector<double>(xv.begin() + 4, xv.begin() + 14));
        EXPECT_EQ(out[0].attributions.size(), 10u);
    }
}

TEST(Extract, MatchesBruteForce) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto mode : {ScoringMode::sum, ScoringMode::mean})
        for (int rep = 0; rep < 300; ++rep) {
            const std::size_t T = 10 + rep % 60;
            std::vector<double> raw(T);
            for (auto& v : raw) v = g(rng) * (rep % 3 == 0 ? std::fabs(g(rng)) : 1.0);
            const AttributionSeries w(0, 0, raw);
            const auto x = series(random_vector(rng, T));
            ImpletParams p;
            p.scoring = mode;
            p.lambda = rep % 4 == 0 ? 0.0 : 0.1;
            p.phi = rep % 5 == 0 ? 0.5 : 1.0;
            if (rep % 2) p.len_max = 3 + rep % 7;
            EXPECT_EQ(extract_implets(x, w, p), brute_force_extract(x, w, p)) << "rep " << rep;
        }
}

TEST(Extract, ImpletsAreOrderedAndDisjoint) {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t T = 200;
        const AttributionSeries w(0, 0, random_vector(rng, T, -2, 2));
        ImpletParams p;
        p.len_max = 5 + rep % 20;
        p.scoring = rep % 2 ? ScoringMode::mean : ScoringMode::sum;
        const auto out = extract_implets(series(random_vector(rng, T)), w, p);
        for (std::size_t k = 0; k < out.size(); ++k) {
            EXPECT_GE(out[k].length(), p.len_min);
            EXPECT_LE(out[k].length(), *p.len_max);
            EXPECT_GE(out[k].score, p.phi);
            EXPECT_GE(w.normalized[out[k].l - 1], p.phi);
            if (k + 1 < out.size()) { EXPECT_LT(out[k].r, out[k + 1].l); }
        }
    }
}

TEST(Extract, ShortSeriesAndBadInputs) {
    const auto x = series({1, 2});
    const auto w = normalized_attr({5, 5});
    EXPECT_TRUE(extract_implets(x, w, ImpletParams{}).empty());
    ImpletParams bad;
    bad.len_min = 0;
    EXPECT_THROW(extract_implets(series({1, 2, 3}), normalized_attr({1, 1, 1}), bad), ConfigError);
    EXPECT_THROW(extract_implets(series({1, 2, 3}), normalized_attr({1, 1}), ImpletParams{}), ShapeError);
    ImpletParams inverted;
    inverted.len_min = 5;
    inverted.len_max = 4;
    EXPECT_THROW(inverted.validate(), ConfigError);
}

TEST(Extract, DefaultMaxLengthIsHalfSeries) {
    std::vector<double> wv(21, 0.0);
    wv[0] = 5.0;
    const auto out = extract_implets(series(std::vector<double>(21, 0.0)), normalized_attr(wv), ImpletParams{});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].length(), 10u);
}

TEST(Extract, DatasetIndexedByPosition) {
    LabeledDataset ds;
    ds.n_classes = 2;
    ds.samples = {series(std::vector<double>(20, 0.0), 7), series(std::vector<double>(20, 0.0), 3)};
    ds.labels = {0, 1};
    std::vector<double> wv(20, 0.0);
    wv[4] = 2.0;
    auto a = normalized_attr(wv, 3);
    a.class_id = 1;
    const auto out = extract_dataset(ds, {a}, params(10));
    ASSERT_EQ(out.size(), 2u);
    EXPECT_TRUE(out[0].empty());
    ASSERT_EQ(out[1].size(), 1u);
    EXPECT_EQ(out[1][0].class_id, 1);
    EXPECT_THROW(extract_dataset(ds, {normalized_attr(wv, 99)}, params(10)), ReferenceError);
}

TEST(Extract, JsonRoundTrip) {
    std::vector<double> wv(20, 0.0);
    wv[4] = 2.0;
    const auto im = extract_implets(series(std::vector<double>(20, 0.25)), normalized_attr(wv), params(10)).at(0);
    EXPECT_EQ(implet_from_json(nlohmann::json::parse(implet_to_json(im).dump())), im);
    ImpletParams p;
    p.scoring = ScoringMode::mean;
    const auto back = params_from_json(params_to_json(p));
    EXPECT_FALSE(back.len_max.has_value());
    EXPECT_EQ(back.scoring, ScoringMode::mean);
}

TEST(Extract, SumModeScalesLinearly) {
    std::mt19937_64 rng(5);
    const std::vector<std::size_t> lengths{1000, 10000, 100000};
    std::vector<double> per_step;
    for (std::size_t T : lengths) {
        const auto x = series(random_vector(rng, T));
        const AttributionSeries w(0, 0, random_vector(rng, T, -2, 2));
        const std::size_t reps = 2000000 / T;
        double best = 1e300;
        for (int trial = 0; trial < 7; ++trial) {
            const auto start = std::chrono::steady_clock::now();
            std::size_t sink = 0;
            for (std::size_t k = 0; k < reps; ++k) sink += extract_implets(x, w, ImpletParams{}).size();
            const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
            EXPECT_GT(sink, 0u);
            best = std::min(best, dt.count() / static_cast<double>(reps * T));
        }
        per_step.push_back(best);
    }
    const double lo = *std::min_element(per_step.begin(), per_step.end());
    const double hi = *std::max_element(per_step.begin(), per_step.end());
    EXPECT_LE(hi / lo, 3.0) << per_step[0] << " " << per_step[1] << " " << per_step[2];
}
